"""Continuous-time SIR inference with a sigmoidal Gaussian-process rate.

The infection rate is ``beta(t) = beta_star * sigmoid(g(t))``. Infections are
the retained points of a rate ``beta_star X Y`` process; the rejected
("thinned") points are kept as latent variables together with the GP values
at every retained and thinned point, which makes the likelihood tractable.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._path import ContinuousPath
from ._rng import as_rng
from .chain import ChainOutput, is_retained
from .epi import RemovalData, TimeScale
from .errors import DataError, InitializationError, ParameterError
from .gp import JITTER_MAX, KernelParams, cholesky_jittered, kernel_matrix, link_sigmoid, log_sigmoid
from .parametric import GammaPrior, ParametricPriors, augmented_loglik, initial_state

logger = logging.getLogger(__name__)

BIRTH, DEATH, MOVE = "birth", "death", "move"
MOVE_MIX = (0.25, 0.25, 0.5)
REPORT_POINTS = 200


def sgcp_augmented_loglik(s, s_thinned, lam_star, g_obs, g_thin, T) -> float:
    """Log density of observed points ``s`` and thinned points on ``[0, T]``.

    ``(M + K) log lam* - lam* T + sum log sig(g_obs) + sum log sig(-g_thin)``.
    """
    s, st = np.atleast_1d(np.asarray(s, float)), np.atleast_1d(np.asarray(s_thinned, float))
    g_obs, g_thin = np.atleast_1d(np.asarray(g_obs, float)), np.atleast_1d(np.asarray(g_thin, float))
    if s.shape != g_obs.shape or st.shape != g_thin.shape:
        raise ParameterError("each point needs exactly one g value")
    if not lam_star > 0:
        raise ParameterError("lam_star must be > 0")
    k = s.size + st.size
    return float(k * np.log(lam_star) - lam_star * T + np.sum(log_sigmoid(g_obs)) + np.sum(log_sigmoid(-g_thin)))


@dataclass(frozen=True, eq=False)
class ThinnedAugmentedState:
    i1: float
    infections: np.ndarray  # i_2..i_n, sorted
    g_infections: np.ndarray
    thinned: np.ndarray
    g_thinned: np.ndarray
    beta_star: float
    gamma: float

    @property
    def M(self) -> int:
        return int(self.thinned.size)

    def path(self, r, N) -> ContinuousPath:
        return ContinuousPath(np.r_[self.i1, self.infections], r, N)

    def check(self, r, N) -> None:
        assert self.beta_star > 0 and self.gamma > 0
        assert self.infections.shape == self.g_infections.shape
        assert self.thinned.shape == self.g_thinned.shape
        pts = np.r_[self.i1, self.infections, self.thinned, r]
        assert np.unique(pts).size == pts.size, "event and thinned times must be distinct"
        assert np.isfinite(sir_thinned_augmented_loglik(self, r, N)), "state has zero likelihood"


def sir_thinned_augmented_loglik(state: ThinnedAugmentedState, r, N, sigma: bool = True) -> float:
    """Log likelihood of infections, thinned points and removals given ``i1``.

    With ``sigma=False`` the sigmoid factors are dropped, which leaves the
    likelihood of the bounding process alone.
    """
    r = np.asarray(r, dtype=float)
    i, th = state.infections, state.thinned
    if i.size + 1 != r.size:
        raise ParameterError(f"need n - 1 = {r.size - 1} infection times besides i1, got {i.size}")
    if np.any(i <= state.i1) or np.any(th <= state.i1) or np.any(th >= r[-1]):
        return -np.inf
    path = state.path(r, N)
    base = augmented_loglik(i, state.i1, r, state.beta_star, state.gamma, N)
    if not np.isfinite(base):
        return -np.inf
    x, y = path.counts_left(th)
    xy = x * y
    if np.any(xy <= 0):
        return -np.inf
    ll = base + th.size * np.log(state.beta_star) + np.sum(np.log(xy))
    if sigma:
        ll += np.sum(log_sigmoid(state.g_infections)) + np.sum(log_sigmoid(-state.g_thinned))
    return float(ll)


# -- GP conditionals on scattered points -------------------------------------------

class _PointGp:
    """Joint GP values at a scattered, changing set of times (fixed jitter)."""

    def __init__(self, kernel: KernelParams, jitter: float):
        self.kernel = kernel
        self.jitter = jitter

    def chol(self, pts):
        K = kernel_matrix(pts, self.kernel)
        return cholesky_jittered(K, self.kernel.omega, self.jitter)[0]

    def conditional(self, pts, vals, t, L=None):
        """Mean and variance of ``g(t)`` given ``g(pts) = vals`` (scalar ``t``)."""
        var0 = self.kernel.omega + self.jitter
        if pts.size == 0:
            return 0.0, var0
        if L is None:
            L = self.chol(pts)
        k = kernel_matrix(pts, self.kernel, np.array([t]))[:, 0]
        a = linalg.solve_triangular(L, k, lower=True, check_finite=False)
        alpha = linalg.solve_triangular(L, vals, lower=True, check_finite=False)
        return float(a @ alpha), max(float(var0 - a @ a), 0.0)

    def draw(self, pts, vals, t, rng):
        mu, var = self.conditional(pts, vals, t)
        return mu + np.sqrt(var) * rng.standard_normal()

    def mean_on(self, pts, vals, grid):
        """Conditional mean on a grid."""
        if pts.size == 0:
            return np.zeros(grid.size)
        L = self.chol(pts)
        K = kernel_matrix(pts, self.kernel, grid)
        a = linalg.solve_triangular(L, K, lower=True, check_finite=False)
        alpha = linalg.solve_triangular(L, vals, lower=True, check_finite=False)
        return a.T @ alpha


def _uniform_on(starts, ends, rng) -> float:
    lengths = ends - starts
    cum = np.cumsum(lengths)
    u = rng.random() * cum[-1]
    k = min(int(np.searchsorted(cum, u, side="right")), starts.size - 1)
    return float(starts[k] + (u - (cum[k] - lengths[k])))


def thinned_point_step(thinned, g_thinned, region, xy_at, beta_star, draw_g, rng, sigma: bool = True):
    """One birth, death or move of a thinned point.

    ``region`` is ``(starts, ends)`` of the set where ``X Y >= 1``;
    ``xy_at(t)`` returns ``X(t-) Y(t-)`` and ``draw_g(t, exclude)`` draws
    ``g(t)`` from its conditional given every value except thinned point
    ``exclude`` (or all values when ``None``). The conditional-prior draw
    cancels against the GP prior, so the acceptance ratios only involve
    the bounding intensity and the sigmoid. Returns
    ``(thinned, g_thinned, kind, accepted)``.
    """
    starts, ends = region
    area = float(np.sum(ends - starts))
    M = thinned.size
    u = rng.random()
    kind = BIRTH if u < MOVE_MIX[0] else DEATH if u < MOVE_MIX[0] + MOVE_MIX[1] else MOVE

    def lam(t, g):
        out = beta_star * xy_at(t)
        return out * link_sigmoid(-g) if sigma else out

    if kind == BIRTH:
        if area <= 0:
            return thinned, g_thinned, kind, False
        t = _uniform_on(starts, ends, rng)
        g = draw_g(t, None)
        if np.log(rng.random()) < np.log(lam(t, g) * area / (M + 1)):
            return np.append(thinned, t), np.append(g_thinned, g), kind, True
        return thinned, g_thinned, kind, False
    if M == 0:
        return thinned, g_thinned, kind, False
    k = int(rng.integers(M))
    if kind == DEATH:
        with np.errstate(divide="ignore"):
            ratio = M / (area * lam(thinned[k], g_thinned[k]))
        if rng.random() < ratio:
            return np.delete(thinned, k), np.delete(g_thinned, k), kind, True
        return thinned, g_thinned, kind, False
    t = _uniform_on(starts, ends, rng)
    g = draw_g(t, k)
    with np.errstate(divide="ignore"):
        ratio = lam(t, g) / lam(thinned[k], g_thinned[k])
    if rng.random() < ratio:
        th, gt = thinned.copy(), g_thinned.copy()
        th[k], gt[k] = t, g
        return th, gt, kind, True
    return thinned, g_thinned, kind, False


# -- sampler --------------------------------------------------------------------------

@dataclass(frozen=True)
class CtsGpPriors:
    beta_star: GammaPrior = GammaPrior(1.0, 100.0)
    gamma: GammaPrior = GammaPrior(1.0, 5.0)
    init_gap_rate: float = 0.1


def gibbs_beta_star(state: ThinnedAugmentedState, r, N, prior: GammaPrior, seed=None,
                    no_data: bool = False) -> float:
    """Draw ``beta* ~ Gamma(shape + (n - 1) + M, rate + int X Y dt)``."""
    rng = as_rng(seed)
    if no_data:
        return float(rng.gamma(prior.shape, 1.0 / prior.rate))
    ixy, _ = state.path(r, N).integrals()
    k = state.infections.size + state.M
    return float(rng.gamma(prior.shape + k, 1.0 / (prior.rate + ixy)))


class _CtsChain:
    def __init__(self, data, priors, kernel, rng, known_infections=None, no_data=False,
                 fixed_beta_star=None, fixed_gamma=None, g_function=None, jitter=None):
        self.r = np.asarray(data.times, dtype=float)
        self.N = data.N
        self.priors = priors
        self.gp = _PointGp(kernel, JITTER_MAX * kernel.omega if jitter is None else float(jitter))
        self.rng = rng
        self.no_data = no_data
        self.fixed_beta_star = fixed_beta_star
        self.fixed_gamma = fixed_gamma
        self.fixed_path = known_infections is not None or no_data
        # a deterministic g function replaces the GP (used to check the thinned-point kernel)
        self.g_function = g_function
        if known_infections is not None:
            ki = np.sort(np.asarray(known_infections, dtype=float))
            if ki.size != self.r.size:
                raise DataError("known infections must list one time per removal")
            self.i1, self.inf = float(ki[0]), ki[1:].copy()
        else:
            st = initial_state(data, ParametricPriors(gamma=priors.gamma, init_gap_rate=priors.init_gap_rate), rng)
            self.i1, self.inf = st.i1, st.infections.copy()
        path = self.path()
        if not path.valid():
            raise InitializationError("initial infection times give an invalid trajectory")
        ixy, _ = path.integrals()
        b0 = max(self.inf.size, 1) / ixy
        self.beta_star = fixed_beta_star if fixed_beta_star is not None else 2.0 * b0
        self.gamma = fixed_gamma if fixed_gamma is not None else priors.gamma.mean
        self.g_inf = self._g0(self.inf)
        self.thin = np.zeros(0)
        self.g_thin = np.zeros(0)
        self.acc = {k: [0, 0] for k in ("infection_move", BIRTH, DEATH, MOVE, "g_update")}

    def _g0(self, t):
        if self.g_function is not None:
            return np.asarray(self.g_function(t), dtype=float)
        return np.zeros(t.size)

    def path(self, inf=None, i1=None):
        return ContinuousPath(np.r_[self.i1 if i1 is None else i1, self.inf if inf is None else inf], self.r, self.N)

    def state(self) -> ThinnedAugmentedState:
        return ThinnedAugmentedState(self.i1, self.inf.copy(), self.g_inf.copy(), self.thin.copy(),
                                     self.g_thin.copy(), self.beta_star, self.gamma)

    def points(self):
        return np.r_[self.inf, self.thin], np.r_[self.g_inf, self.g_thin]

    def loglik(self, inf=None, g_inf=None) -> float:
        st = ThinnedAugmentedState(self.i1, self.inf if inf is None else inf,
                                   self.g_inf if g_inf is None else g_inf, self.thin, self.g_thin,
                                   self.beta_star, self.gamma)
        return sir_thinned_augmented_loglik(st, self.r, self.N)

    def _draw_g(self, t, drop):
        """Conditional draw at ``t`` given all values except index ``drop`` of the point list."""
        if self.g_function is not None:
            return float(self.g_function(np.array([t]))[0])
        pts, vals = self.points()
        if drop is not None:
            pts, vals = np.delete(pts, drop), np.delete(vals, drop)
        return self.gp.draw(pts, vals, t, self.rng)

    # Gibbs steps
    def update_gamma(self):
        if self.fixed_gamma is not None:
            return
        p = self.priors.gamma
        if self.no_data:
            self.gamma = float(self.rng.gamma(p.shape, 1.0 / p.rate))
            return
        _, iy = self.path().integrals()
        self.gamma = float(self.rng.gamma(p.shape + self.r.size, 1.0 / (p.rate + iy)))

    def update_beta_star(self):
        if self.fixed_beta_star is not None:
            return
        self.beta_star = gibbs_beta_star(self.state(), self.r, self.N, self.priors.beta_star, self.rng, self.no_data)

    def update_i1(self):
        if self.fixed_path:
            return
        upper = min(self.r[0], self.inf[0] if self.inf.size else np.inf, self.thin.min() if self.thin.size else np.inf)
        rate = self.priors.init_gap_rate + self.beta_star * (self.N - 1) + self.gamma
        self.i1 = float(upper - self.rng.exponential(1.0 / rate))

    def move_infections(self, count):
        if self.fixed_path or self.inf.size == 0:
            return
        cur = self.loglik()
        for _ in range(count):
            k = int(self.rng.integers(self.inf.size))
            t = float(self.rng.uniform(self.i1, self.r[-1]))
            g = self._draw_g(t, k)
            inf, g_inf = self.inf.copy(), self.g_inf.copy()
            inf[k], g_inf[k] = t, g
            order = np.argsort(inf, kind="stable")
            inf, g_inf = inf[order], g_inf[order]
            new = self.loglik(inf, g_inf)
            self.acc["infection_move"][1] += 1
            if new > -np.inf and np.log(self.rng.random()) < new - cur:
                self.inf, self.g_inf, cur = inf, g_inf, new
                self.acc["infection_move"][0] += 1

    def move_thinned(self, count):
        path = self.path()
        region = path.active_region()

        def xy_at(t):
            x, y = path.counts_left(t)
            return float(x * y)

        n_inf = self.inf.size

        def draw_g(t, exclude):
            return self._draw_g(t, None if exclude is None else n_inf + exclude)

        for _ in range(count):
            self.thin, self.g_thin, kind, ok = thinned_point_step(
                self.thin, self.g_thin, region, xy_at, self.beta_star, draw_g, self.rng,
                sigma=not self.no_data)
            self.acc[kind][0] += ok
            self.acc[kind][1] += 1

    def update_g(self, epsilon, count):
        if self.g_function is not None:
            return
        pts, vals = self.points()
        if pts.size == 0:
            return
        L = self.gp.chol(pts)
        c = np.sqrt(1.0 - epsilon * epsilon)
        n_inf = self.inf.size
        for _ in range(count):
            prop = c * vals + epsilon * (L @ self.rng.standard_normal(pts.size))
            self.acc["g_update"][1] += 1
            if self.no_data:
                log_ratio = 0.0
            else:
                log_ratio = (np.sum(log_sigmoid(prop[:n_inf])) - np.sum(log_sigmoid(vals[:n_inf]))
                             + np.sum(log_sigmoid(-prop[n_inf:])) - np.sum(log_sigmoid(-vals[n_inf:])))
            if np.log(self.rng.random()) < log_ratio:
                vals = prop
                self.acc["g_update"][0] += 1
        self.g_inf, self.g_thin = vals[:n_inf].copy(), vals[n_inf:].copy()


def run_cts_gp_mcmc(data: RemovalData, kernel: KernelParams, priors: CtsGpPriors = CtsGpPriors(),
                    epsilon: float = 0.2, iterations: int = 10_000, thin: int = 10, seed=None,
                    burnin: int | None = None, moves_per_sweep: int | None = None,
                    thinned_moves_per_sweep: int | None = None, g_updates_per_sweep: int = 1,
                    known_infections=None, fixed_beta_star: float | None = None,
                    fixed_gamma: float | None = None, no_data: bool = False,
                    g_function=None, report_grid=None, check_states: bool = False,
                    jitter: float | None = None) -> ChainOutput:
    """Sweep: Gibbs ``gamma``, ``beta*`` and ``i1``; infection-time moves;
    thinned-point births, deaths and moves; under-relaxed joint ``g`` update.

    ``no_data=True`` drops every likelihood term except the bounding process
    of the thinned points and keeps the trajectory fixed at its initial
    value. ``beta(t) = beta* sigmoid(E[g(t) | g at points])`` is reported on
    ``report_grid`` (default: 200 points from the median ``i1`` to ``r_n``).
    ``jitter`` defaults to ``1e-6 * omega`` because points can sit very close.
    """
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    if not 0 <= epsilon <= 1:
        raise ParameterError("epsilon must lie in [0, 1]")
    if TimeScale(data.time_scale) != TimeScale.CONTINUOUS:
        raise DataError("continuous-time fit needs continuous removal times")
    burnin = iterations // 5 if burnin is None else burnin
    n = data.n
    k_inf = n if moves_per_sweep is None else moves_per_sweep
    k_thin = max(10, n) if thinned_moves_per_sweep is None else thinned_moves_per_sweep
    rng = as_rng(seed)
    ch = _CtsChain(data, priors, kernel, rng, known_infections, no_data, fixed_beta_star, fixed_gamma,
                   g_function, jitter)

    keep, rows, draws = [], {k: [] for k in ("gamma", "beta_star", "i1", "M", "g_probe")}, []
    infs = []
    t0 = time.perf_counter()
    for it in range(1, iterations + 1):
        ch.update_gamma()
        ch.update_beta_star()
        ch.update_i1()
        ch.move_infections(k_inf)
        ch.move_thinned(k_thin)
        ch.update_g(epsilon, g_updates_per_sweep)
        if check_states and not no_data:
            ch.state().check(ch.r, ch.N)
        if is_retained(it, burnin, thin):
            keep.append(it)
            rows["gamma"].append(ch.gamma)
            rows["beta_star"].append(ch.beta_star)
            rows["i1"].append(ch.i1)
            rows["M"].append(ch.thin.size)
            rows["g_probe"].append(ch.g_inf[0] if ch.g_inf.size else np.nan)
            draws.append((*ch.points(), ch.beta_star))
            infs.append(ch.inf.copy())
    params = {k: np.asarray(v, dtype=float) for k, v in rows.items()}
    if report_grid is None:
        lo = float(np.median(params["i1"])) if keep else ch.r[0]
        report_grid = np.linspace(lo, ch.r[-1], REPORT_POINTS)
    grid = np.asarray(report_grid, dtype=float)
    beta = np.empty((len(draws), grid.size))
    for s, (pts, vals, bs) in enumerate(draws):
        if g_function is not None:
            beta[s] = bs * link_sigmoid(g_function(grid))
        else:
            beta[s] = bs * link_sigmoid(ch.gp.mean_on(pts, vals, grid))
    return ChainOutput(
        "cts-gp", np.array(keep, dtype=int), params=params, beta_grid=grid, beta=beta,
        acceptance=ch.acc,
        extra={"infections": np.array(infs).reshape(len(keep), n - 1)},
        meta={"iterations": iterations, "burnin": burnin, "thin": thin, "epsilon": epsilon,
              "moves_per_sweep": k_inf, "thinned_moves_per_sweep": k_thin,
              "g_updates_per_sweep": g_updates_per_sweep, "jitter": ch.gp.jitter,
              "seconds": time.perf_counter() - t0},
    )
