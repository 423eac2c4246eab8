"""Data-augmented MCMC for the constant-rate continuous-time SIR model.

Only removal times are observed and the epidemic is complete, so the latent
state is the initial infection time ``i1`` plus ``n - 1`` further infection
times. Infection times carry no labels: only counts enter the likelihood.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from ._path import ContinuousPath
from ._rng import as_rng
from .chain import ChainOutput, is_retained
from .epi import RemovalData
from .errors import InitializationError, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GammaPrior:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ParameterError("gamma prior needs shape > 0 and rate > 0")

    @property
    def mean(self):
        return self.shape / self.rate


@dataclass(frozen=True)
class ParametricPriors:
    beta: GammaPrior = GammaPrior(1.0, 1e3)
    gamma: GammaPrior = GammaPrior(1.0, 5.0)
    init_gap_rate: float = 0.1  # exponential prior on r_1 - i_1

    def __post_init__(self):
        if not self.init_gap_rate > 0:
            raise ParameterError("initial-gap prior rate must be > 0")


@dataclass(frozen=True, eq=False)
class ParametricState:
    i1: float
    infections: np.ndarray  # i_2..i_n, sorted
    beta: float
    gamma: float

    def path(self, data: RemovalData) -> ContinuousPath:
        return ContinuousPath(np.r_[self.i1, self.infections], data.times, data.N)

    def check(self, data: RemovalData) -> None:
        """Raise AssertionError unless the state is a valid augmentation."""
        inf = self.infections
        assert np.all(np.diff(inf) > 0), "infection times not strictly increasing"
        assert inf.size == 0 or self.i1 < inf[0], "i1 is not the first infection"
        assert self.i1 < data.times[0], "i1 must precede the first removal"
        assert inf.size + 1 == data.n, "completed epidemic needs m == n"
        assert self.path(data).valid(), "trajectory has no infectives before r_n"


def augmented_loglik(i, i1, r, beta, gamma, N) -> float:
    """Log density of infection times ``i = (i_2..i_m)`` and removals ``r`` given ``i1``.

    ``-inf`` for any configuration with a zero rate factor.
    """
    i = np.asarray(i, dtype=float)
    r = np.asarray(r, dtype=float)
    if i.ndim != 1 or r.ndim != 1 or i.size + 1 != r.size:
        raise ParameterError(f"need n - 1 = {r.size - 1} infection times besides i1, got {i.size}")
    if np.any(i <= i1):
        return -np.inf
    path = ContinuousPath(np.r_[i1, i], r, N)
    return _loglik_path(path, i, r, beta, gamma)


def _loglik_path(path: ContinuousPath, i, r, beta, gamma) -> float:
    x_i, y_i = path.counts_left(i)
    _, y_r = path.counts_left(r)
    xy = x_i * y_i
    if np.any(xy <= 0) or np.any(y_r <= 0) or np.any(i >= r[-1]):
        return -np.inf
    ixy, iy = path.integrals()
    with np.errstate(divide="ignore"):
        ll = (i.size * np.log(beta) + np.sum(np.log(xy))
              + r.size * np.log(gamma) + np.sum(np.log(y_r))
              - beta * ixy - gamma * iy)
    return float(ll)


def gibbs_beta(state: ParametricState, data: RemovalData, prior: GammaPrior, seed=None,
               no_data: bool = False) -> float:
    """Draw ``beta ~ Gamma(shape + m - 1, rate + int X Y dt)``."""
    rng = as_rng(seed)
    if no_data:
        return float(rng.gamma(prior.shape, 1.0 / prior.rate))
    ixy, _ = state.path(data).integrals()
    return float(rng.gamma(prior.shape + state.infections.size, 1.0 / (prior.rate + ixy)))


def gibbs_gamma(state: ParametricState, data: RemovalData, prior: GammaPrior, seed=None,
                no_data: bool = False) -> float:
    """Draw ``gamma ~ Gamma(shape + n, rate + int Y dt)``."""
    rng = as_rng(seed)
    if no_data:
        return float(rng.gamma(prior.shape, 1.0 / prior.rate))
    _, iy = state.path(data).integrals()
    return float(rng.gamma(prior.shape + data.n, 1.0 / (prior.rate + iy)))


def initial_time_rate(infection_rate: float, gamma: float, N: int, gap_rate: float) -> float:
    """Rate of the exponential ``upper - i1`` full conditional.

    On ``(i1, upper)`` only the initial infective is present, so the
    integral term contributes ``(beta (N-1) + gamma) (upper - i1)`` and the
    exponential prior on ``r_1 - i1`` adds ``gap_rate``.
    """
    return gap_rate + infection_rate * (N - 1) + gamma


def update_initial_time(state: ParametricState, data: RemovalData, priors: ParametricPriors,
                        seed=None, no_data: bool = False) -> float:
    """Gibbs draw of ``i1`` on ``(-inf, min(i_2, r_1))``."""
    rng = as_rng(seed)
    upper = data.times[0] if state.infections.size == 0 else min(state.infections[0], data.times[0])
    if no_data:
        rate = priors.init_gap_rate
    else:
        rate = initial_time_rate(state.beta, state.gamma, data.N, priors.init_gap_rate)
    return float(upper - rng.exponential(1.0 / rate))


def move_infection_time(state: ParametricState, data: RemovalData, seed=None,
                        no_data: bool = False, _ll: float | None = None):
    """Metropolis-Hastings move of one non-initial infection time.

    A current time is picked uniformly and replaced by a uniform draw on
    ``(i1, r_n)``; the proposal is symmetric. Returns
    ``(accepted, new_state, loglik_of_new_state)``.
    """
    rng = as_rng(seed)
    m = state.infections.size
    if m == 0:
        return False, state, _ll
    k = int(rng.integers(m))
    prop = float(rng.uniform(state.i1, data.times[-1]))
    return _mh_infection_move(state, data, k, prop, float(rng.random()), no_data, _ll)


def _mh_infection_move(state, data, k, prop, u, no_data=False, ll_cur=None):
    if no_data:
        ll_cur = ll_new = 0.0
    new_inf = state.infections.copy()
    new_inf[k] = prop
    new_inf.sort()
    if not no_data:
        if ll_cur is None:
            ll_cur = augmented_loglik(state.infections, state.i1, data.times, state.beta, state.gamma, data.N)
        ll_new = augmented_loglik(new_inf, state.i1, data.times, state.beta, state.gamma, data.N)
    if ll_new == -np.inf:
        return False, state, ll_cur
    if np.log(u) < ll_new - ll_cur:
        return True, replace(state, infections=new_inf), ll_new
    return False, state, ll_cur


def initial_state(data: RemovalData, priors: ParametricPriors, rng, infection_rate=None,
                  max_tries: int = 100) -> ParametricState:
    """Infection times ``r_j - Exp(gamma0)`` with ``gamma0`` the prior mean.

    Retries until the trajectory is valid, then falls back to placing every
    infection just before ``r_1``, which is always valid.
    """
    r = data.times
    g0 = priors.gamma.mean
    b0 = priors.beta.mean if infection_rate is None else infection_rate
    for _ in range(max_tries):
        times = np.sort(r - rng.exponential(1.0 / g0, size=r.size))
        st = ParametricState(times[0], times[1:], b0, g0)
        if np.isfinite(augmented_loglik(st.infections, st.i1, r, b0, g0, data.N)):
            return st
    logger.info("random initialisation failed %d times; using deterministic start", max_tries)
    n = r.size
    gap = 1.0 / g0
    times = r[0] - gap * (1.0 - np.arange(n) / n)
    st = ParametricState(times[0], times[1:], b0, g0)
    if not np.isfinite(augmented_loglik(st.infections, st.i1, r, b0, g0, data.N)):
        raise InitializationError("no valid initial infection times (is N >= n?)")
    return st


def run_parametric_mcmc(data: RemovalData, priors: ParametricPriors = ParametricPriors(),
                        iterations: int = 10_000, thin: int = 10, seed=None, burnin: int | None = None,
                        moves_per_sweep: int | None = None, no_data: bool = False,
                        check_states: bool = False) -> ChainOutput:
    """Gibbs updates of ``beta``, ``gamma``, ``i1`` then ``moves_per_sweep``
    (default ``n``) infection-time moves per iteration."""
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    burnin = iterations // 5 if burnin is None else burnin
    k_moves = data.n if moves_per_sweep is None else moves_per_sweep
    rng = as_rng(seed)
    state = initial_state(data, priors, rng)
    if not no_data and not np.isfinite(augmented_loglik(state.infections, state.i1, data.times,
                                                          state.beta, state.gamma, data.N)):
        raise InitializationError("initial state has zero likelihood")

    keep_it, betas, gammas, i1s, infs = [], [], [], [], []
    acc = [0, 0]
    t0 = time.perf_counter()
    for it in range(1, iterations + 1):
        state = replace(state, beta=gibbs_beta(state, data, priors.beta, rng, no_data))
        state = replace(state, gamma=gibbs_gamma(state, data, priors.gamma, rng, no_data))
        state = replace(state, i1=update_initial_time(state, data, priors, rng, no_data))
        ll = None
        for _ in range(k_moves):
            ok, state, ll = move_infection_time(state, data, rng, no_data, ll)
            acc[0] += ok
            acc[1] += 1
        if check_states and not no_data:
            state.check(data)
        if is_retained(it, burnin, thin):
            keep_it.append(it)
            betas.append(state.beta)
            gammas.append(state.gamma)
            i1s.append(state.i1)
            infs.append(state.infections.copy())
    out = ChainOutput(
        "parametric", np.array(keep_it, dtype=int),
        params={"beta": np.array(betas), "gamma": np.array(gammas), "i1": np.array(i1s)},
        acceptance={"infection_move": acc},
        extra={"infections": np.array(infs).reshape(len(keep_it), data.n - 1)},
        meta={"iterations": iterations, "burnin": burnin, "thin": thin,
              "moves_per_sweep": k_moves, "seconds": time.perf_counter() - t0},
    )
    return out
