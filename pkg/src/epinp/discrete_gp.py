"""GP-prior inference of a daily infection rate in the discrete-time SIR model.

Individuals are labelled ``0..n-1`` in order of removal (label ``j`` is
removed on day ``r[j]``). The latent state is the infection day of every
individual, the initial infective ``kappa``, the geometric parameter
``gamma`` and ``g = log beta`` on the days ``i_kappa .. r_n - 1``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _discrete_kernels as K
from ._rng import as_rng
from .chain import ChainOutput, is_retained
from .epi import EpidemicEvents, RemovalData, TimeScale, trajectory_counts
from .errors import DataError, InitializationError, ParameterError
from .gp import GpField, KernelParams, conditional_extend, grid_cholesky, underrelaxed_propose

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaPrior:
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ParameterError("beta prior needs a > 0 and b > 0")

    @property
    def mean(self):
        return self.a / (self.a + self.b)


@dataclass(frozen=True, eq=False)
class DiscreteAugmentedState:
    infections: np.ndarray  # infection day per label
    kappa: int
    field: GpField  # g on days i_kappa .. r_n - 1
    gamma: float

    @property
    def i_kappa(self) -> int:
        return int(self.infections[self.kappa])

    @property
    def beta(self) -> np.ndarray:
        return np.exp(self.field.values)


def _as_removals(r) -> np.ndarray:
    if isinstance(r, RemovalData):
        r = r.times
    return np.asarray(r, dtype=np.int64)


def _beta_on_days(beta, days) -> np.ndarray:
    if callable(beta):
        return np.asarray(beta(days.astype(float)), dtype=float)
    if isinstance(beta, dict):
        return np.array([beta[int(t)] for t in days], dtype=float)
    raise ParameterError("beta must be a rate function or a day -> rate mapping")


def daily_counts(infections, removals, N, days):
    """``(Y(t), X(t))`` on integer ``days`` for labelled infection/removal days."""
    i = np.asarray(infections)[None, :]
    r = np.asarray(removals)[None, :]
    t = np.asarray(days)[:, None]
    y = np.sum((i <= t) & (t < r), axis=1)
    x = N - np.sum(i <= t, axis=1)
    return y, x


def discrete_log_h(infections, removals, beta, N) -> float:
    """Log infection-process factor: escape and infection terms of the likelihood.

    ``beta`` maps days to rates (a rate function or a dict). ``-inf`` if the
    initial infective is not unique or an infection happens on a day after
    one with no infectives.
    """
    i = np.asarray(infections, dtype=np.int64)
    r = _as_removals(removals)
    if i.shape != r.shape:
        raise ParameterError("one infection day per removal is required")
    if np.any(r <= i):
        return -np.inf
    ik = i.min()
    if np.sum(i == ik) != 1:
        return -np.inf
    days = np.arange(ik, r.max())
    y, _ = daily_counts(i, r, N, days)
    _, x_next = daily_counts(i, r, N, days + 1)
    b = _beta_on_days(beta, days)
    lam = b * y
    others = i[i != ik]
    lam_inf = lam[others - 1 - ik]
    if np.any(lam_inf <= 0):
        return -np.inf
    return float(np.sum(np.log(-np.expm1(-lam_inf))) - np.sum(lam * x_next))


def geometric_logpmf(k, gamma):
    k = np.asarray(k)
    with np.errstate(divide="ignore"):
        return np.where(k >= 1, np.log(gamma) + special.xlog1py(k - 1, -gamma), -np.inf)


def discrete_loglik(infections, removals, beta, N, gamma) -> float:
    """Full augmented log-likelihood with geometric infectious periods."""
    lh = discrete_log_h(infections, removals, beta, N)
    if lh == -np.inf:
        return lh
    periods = _as_removals(removals) - np.asarray(infections, dtype=np.int64)
    return lh + float(np.sum(geometric_logpmf(periods, gamma)))


def discrete_augmented_loglik(state: DiscreteAugmentedState, r, N) -> float:
    """Log-likelihood of a state whose rate is ``exp(g)`` on the field grid."""
    r = _as_removals(r)
    i = np.asarray(state.infections, dtype=np.int64)
    ik = int(i.min())
    need = np.arange(ik, r.max())
    grid = state.field.grid
    if need.size and (grid.size == 0 or grid[0] > ik or grid[-1] < need[-1]
                      or np.any(np.isin(need, grid, invert=True))):
        raise ParameterError("field grid must cover i_kappa .. r_n - 1")
    if i[state.kappa] != ik:
        return -np.inf
    table = dict(zip(grid.astype(int).tolist(), np.exp(state.field.values).tolist()))
    return discrete_loglik(i, r, table, N, state.gamma)


def gibbs_gamma_discrete(infections, removals, prior: BetaPrior, seed=None, no_data: bool = False) -> float:
    """Draw ``gamma ~ Beta(n + a, sum(r - i) - n + b)``."""
    rng = as_rng(seed)
    if no_data:
        return float(rng.beta(prior.a, prior.b))
    periods = _as_removals(removals) - np.asarray(infections, dtype=np.int64)
    if np.any(periods < 1):
        raise ParameterError("infectious periods must be >= 1")
    n = periods.size
    return float(rng.beta(n + prior.a, periods.sum() - n + prior.b))


# -- sampler internals -------------------------------------------------------------

class _DiscreteChain:
    """Mutable array form of a discrete augmented state."""

    def __init__(self, r, N, infections, gamma, *, kernel=None, field=None, fixed_beta=None,
                 floor: int, no_data=False):
        self.r = _as_removals(r)
        self.N = int(N)
        self.floor = int(floor)
        self.kernel = kernel
        self.fixed = fixed_beta is not None
        self.D = int(self.r.max()) - self.floor + 1
        self.rem = self.r - self.floor
        self.inf = np.asarray(infections, dtype=np.int64) - self.floor
        if np.any(self.inf < 0):
            raise ParameterError("infection day below the floor")
        self.gamma = float(gamma)
        self.st = np.zeros(K.STATUS_SIZE, dtype=np.int64)
        self.st[K.END] = self.D - 2
        self.st[K.FIXED] = self.fixed
        self.st[K.NO_DATA] = no_data
        self.st[K.KAPPA] = int(np.argmin(self.inf))
        self.cur = np.zeros(1)
        self._rebuild_counts()
        self.beta = np.zeros(self.D)
        if self.fixed:
            self.field = None
            days = np.arange(self.floor, self.floor + self.D - 1)
            self.beta[:-1] = _beta_on_days(fixed_beta, days)
            self.st[K.LO] = 0
        else:
            self.set_field(field)
        self.cur[0] = self.scratch_log_h()

    # bookkeeping
    def _rebuild_counts(self):
        D = self.D
        new_inf = np.bincount(self.inf, minlength=D).astype(np.int64)
        rem_cnt = np.bincount(self.rem, minlength=D).astype(np.int64)
        ci = np.cumsum(new_inf)
        self.new_inf = new_inf
        self.Y = (ci - np.cumsum(rem_cnt)).astype(np.int64)
        self.X = (self.N - ci).astype(np.int64)

    def set_field(self, field: GpField):
        lo = int(field.grid[0]) - self.floor
        self.field = field
        self.st[K.LO] = lo
        self.beta[lo:lo + len(field)] = np.exp(field.values)

    def sync_field(self):
        """Drop field values below a grid start raised by accepted moves."""
        lo_day = int(self.st[K.LO]) + self.floor
        if not self.fixed and self.field.grid[0] < lo_day:
            self.field = self.field.restrict_range(lo_day, self.field.grid[-1])

    @property
    def kappa(self) -> int:
        return int(self.st[K.KAPPA])

    def i_kappa_offset(self) -> int:
        return int(self.inf[self.kappa])

    def scratch_log_h(self) -> float:
        if self.st[K.NO_DATA]:
            return 0.0
        return K.log_h(self.new_inf, self.Y, self.X, self.beta, self.i_kappa_offset(), int(self.st[K.END]))

    def check(self):
        """Compare incremental counts and log h with a from-scratch evaluation."""
        new_inf, Y, X = self.new_inf.copy(), self.Y.copy(), self.X.copy()
        self._rebuild_counts()
        assert np.array_equal(new_inf, self.new_inf) and np.array_equal(Y, self.Y) and np.array_equal(X, self.X)
        i = self.inf
        assert np.sum(i == i.min()) == 1 and i[self.kappa] == i.min(), "kappa invariant broken"
        assert np.all(i < self.rem)
        if not self.fixed:
            assert self.field.grid[0] == self.inf[self.kappa] + self.floor
            assert self.field.grid[-1] == self.r.max() - 1
        if not self.st[K.NO_DATA]:
            days = np.arange(i.min(), self.D - 1) + self.floor
            table = dict(zip(days.tolist(), self.beta[days - self.floor].tolist()))
            ref = discrete_log_h(i + self.floor, self.r, table, self.N)
            assert abs(ref - self.cur[0]) <= 1e-10 * max(1.0, abs(ref)), (ref, self.cur[0])

    # moves
    def infection_moves(self, js, ws, us, rng):
        m = 0
        while True:
            m = K.infection_moves(m, js, ws, us, self.inf, self.rem, self.new_inf, self.Y, self.X,
                                  self.beta, self.st, self.cur)
            self.sync_field()
            if m >= js.size:
                return
            self._extension_move(js[m], ws[m], us[m], rng)
            m += 1

    def _extension_move(self, j, w, u, rng):
        kap, start = int(self.st[K.PEND_KAPPA]), int(self.st[K.PEND_START])
        lo = int(self.st[K.LO])
        new_days = np.arange(start, lo) + self.floor
        ext = conditional_extend(self.field, new_days.astype(float), rng)
        self.beta[start:lo] = np.exp(ext.values[:lo - start])
        b = int(self.rem[j] - w)
        if K.attempt(j, b, kap, start, u, self.inf, self.new_inf, self.Y, self.X, self.beta, self.st, self.cur):
            self.field = ext

    def update_g(self, epsilon, rng):
        prop = underrelaxed_propose(self.field, epsilon, rng)
        lo = int(self.st[K.LO])
        u = rng.random()
        if self.st[K.NO_DATA]:
            lh = 0.0
        else:
            beta = self.beta.copy()
            beta[lo:lo + len(prop)] = np.exp(prop.values)
            lh = K.log_h(self.new_inf, self.Y, self.X, beta, lo, int(self.st[K.END]))
        if lh > -np.inf and np.log(u) < lh - self.cur[0]:
            self.field = prop
            self.beta[lo:lo + len(prop)] = np.exp(prop.values)
            self.cur[0] = lh
            return True
        return False

    def state(self) -> DiscreteAugmentedState:
        return DiscreteAugmentedState(self.inf + self.floor, self.kappa, self.field, self.gamma)


def default_floor_gap(prior: BetaPrior) -> int:
    """Days below ``r_1`` allowed for ``i_kappa``: 100 prior-mean infectious periods."""
    return int(math.ceil(100.0 / prior.mean))


def propose_infection_time(state: DiscreteAugmentedState, r, N, gamma=None, seed=None,
                           floor: int | None = None, _draws=None):
    """One Metropolis-Hastings update of a single infection day.

    A label ``j`` is picked uniformly and ``i_j`` is proposed as ``r_j - W``
    with ``W ~ Geometric(gamma)`` on ``1, 2, ...``. Because the proposal is
    the infectious-period prior, the period factors cancel and acceptance
    uses the infection-process factor alone. Returns ``(accepted, state)``.
    """
    rng = as_rng(seed)
    r = _as_removals(r)
    gamma = state.gamma if gamma is None else gamma
    floor = int(r.min()) - 10_000 if floor is None else floor
    ch = _DiscreteChain(r, N, state.infections, state.gamma, kernel=state.field.kernel,
                        field=state.field, floor=floor)
    if _draws is None:
        _draws = (int(rng.integers(r.size)), int(rng.geometric(gamma)), float(rng.random()))
    j, w, u = _draws
    before = int(ch.st[K.ACCEPTED])
    ch.infection_moves(np.array([j]), np.array([w]), np.array([u]), rng)
    return bool(ch.st[K.ACCEPTED] > before), ch.state()


def update_g(state: DiscreteAugmentedState, r, N, epsilon: float, seed=None):
    """Under-relaxed proposal for ``g`` accepted on the infection-process ratio.

    The proposal is reversible with respect to the GP prior, so the prior
    density cancels. Returns ``(accepted, state)``.
    """
    rng = as_rng(seed)
    r = _as_removals(r)
    ch = _DiscreteChain(r, N, state.infections, state.gamma, kernel=state.field.kernel,
                        field=state.field, floor=int(state.infections.min()))
    ok = ch.update_g(epsilon, rng)
    return ok, ch.state()


# -- initialisation --------------------------------------------------------------

def _initial_infections(r, N, gamma0, floor, rng, max_tries=100):
    n = r.size

    def ok(i):
        return i.min() >= floor and np.isfinite(discrete_log_h(i, r, lambda t: np.ones_like(t), N))

    for _ in range(max_tries):
        i = r - rng.geometric(gamma0, size=n)
        if ok(i):
            return i
    logger.info("random initialisation failed %d times; using deterministic start", max_tries)
    # first-removed individual seeds everyone else on the following day
    i = np.full(n, r.min() - 1, dtype=np.int64)
    i[int(np.argmin(r))] = r.min() - 2
    if not ok(i):
        raise InitializationError("no valid initial infection days")
    return i


def _constant_rate_guess(i, r, N):
    days = np.arange(i.min(), r.max())
    y, _ = daily_counts(i, r, N, days)
    _, x_next = daily_counts(i, r, N, days + 1)
    exposure = float(np.sum(y * x_next)) + float(np.sum(y))
    return max(r.size - 1, 1) / max(exposure, 1.0)


def run_discrete_gp_mcmc(data: RemovalData, kernel: KernelParams, prior: BetaPrior = BetaPrior(),
                         epsilon: float = 0.2, iterations: int = 10_000, thin: int = 10, seed=None,
                         burnin: int | None = None, moves_per_sweep: int | None = None,
                         g_updates_per_sweep: int = 1, floor_gap: int | None = None,
                         known_infections=None, fixed_beta=None, fixed_gamma: float | None = None,
                         no_data: bool = False, check_every: int = 0,
                         jitter: float | None = None) -> ChainOutput:
    """MCMC for ``g = log beta``, ``gamma`` and the infection days.

    Each sweep draws ``gamma`` from its Beta full conditional, makes
    ``moves_per_sweep`` (default ``n``) infection-day proposals, then
    ``g_updates_per_sweep`` under-relaxed updates of ``g``. When the grid
    start ``i_kappa`` moves earlier the new values of ``g`` are drawn from
    the GP conditional inside the proposal, so the prior terms cancel from
    the acceptance ratio; when it moves later the values are dropped.

    ``known_infections`` fixes the infection days (one per label).
    ``fixed_beta`` replaces the GP by a known rate. ``no_data`` forces the
    likelihood to one, leaving only support constraints. ``jitter`` is the
    absolute diagonal term of the kernel (default: the smallest one that
    factorises the kernel on the widest possible grid).
    """
    if data.time_scale != TimeScale.DISCRETE:
        raise DataError("discrete-time fits need integer removal days")
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    if not 0 <= epsilon <= 1:
        raise ParameterError("epsilon must lie in [0, 1]")
    burnin = iterations // 5 if burnin is None else burnin
    r = data.times.astype(np.int64)
    n, N = r.size, data.N
    k_moves = n if moves_per_sweep is None else moves_per_sweep
    gap = default_floor_gap(prior) if floor_gap is None else int(floor_gap)
    floor = int(r.min()) - gap
    rng = as_rng(seed)

    gamma = prior.mean if fixed_gamma is None else float(fixed_gamma)
    if known_infections is not None:
        inf0 = np.asarray(known_infections, dtype=np.int64)
        if inf0.shape != r.shape or np.any(inf0 >= r):
            raise DataError("known infection days must precede each removal")
        if np.sum(inf0 == inf0.min()) != 1:
            raise DataError("known infection days must have a unique initial infective")
        floor = min(floor, int(inf0.min()))
        k_moves = 0
    else:
        inf0 = _initial_infections(r, N, gamma, floor, rng)

    end_day = int(r.max()) - 1
    if fixed_beta is None:
        full_grid = np.arange(floor, end_day + 1, dtype=float)
        _, jitter = grid_cholesky(full_grid, kernel, jitter)
        grid = np.arange(int(inf0.min()), end_day + 1, dtype=float)
        g0 = np.log(_constant_rate_guess(inf0, r, N))
        field = GpField(grid, np.full(grid.size, g0), kernel, jitter)
        ch = _DiscreteChain(r, N, inf0, gamma, kernel=kernel, field=field, floor=floor, no_data=no_data)
    else:
        ch = _DiscreteChain(r, N, inf0, gamma, fixed_beta=fixed_beta, floor=floor, no_data=no_data)
    if not np.isfinite(ch.cur[0]):
        raise InitializationError("initial state has zero likelihood; check the data and rate")

    n_keep = max(0, (iterations - burnin) // thin)
    days_all = np.arange(floor, end_day + 1)
    beta_rows = np.full((n_keep, days_all.size), np.nan) if fixed_beta is None else None
    keep_it = np.zeros(n_keep, dtype=np.int64)
    gammas = np.zeros(n_keep)
    kappas = np.zeros(n_keep, dtype=np.int64)
    ikappas = np.zeros(n_keep, dtype=np.int64)
    infs = np.zeros((n_keep, n), dtype=np.int64)
    g_acc = [0, 0]
    s = 0
    min_ik = ch.i_kappa_offset()
    t0 = time.perf_counter()
    for it in range(1, iterations + 1):
        if fixed_gamma is None:
            ch.gamma = gibbs_gamma_discrete(ch.inf, ch.rem, prior, rng, no_data)
        if k_moves:
            js = rng.integers(n, size=k_moves)
            ws = rng.geometric(ch.gamma, size=k_moves)
            us = rng.random(k_moves)
            ch.infection_moves(js, ws, us, rng)
            min_ik = min(min_ik, ch.i_kappa_offset())
        if fixed_beta is None:
            for _ in range(g_updates_per_sweep):
                g_acc[0] += ch.update_g(epsilon, rng)
                g_acc[1] += 1
        if check_every and it % check_every == 0:
            ch.check()
        if is_retained(it, burnin, thin):
            keep_it[s] = it
            gammas[s] = ch.gamma
            kappas[s] = ch.kappa + 1
            ikappas[s] = ch.i_kappa_offset() + floor
            infs[s] = ch.inf + floor
            if beta_rows is not None:
                lo = int(ch.field.grid[0]) - floor
                beta_rows[s, lo:lo + len(ch.field)] = np.exp(ch.field.values)
            s += 1
    hits = int(ch.st[K.FLOOR_HITS])
    if (k_moves and hits > 1e-4 * ch.st[K.PROPOSED]) or (k_moves and min_ik < 0.1 * gap):
        logger.warning("i_kappa approached the hard floor at day %d (%d proposals below it)",
                       floor, int(ch.st[K.FLOOR_HITS]))

    out = ChainOutput(
        "discrete-gp", keep_it,
        params={"gamma": gammas, "kappa": kappas, "i_kappa": ikappas},
        acceptance={"infection_move": [int(ch.st[K.ACCEPTED]), int(ch.st[K.PROPOSED])],
                    "g_update": g_acc},
        extra={"infections": infs},
        meta={"iterations": iterations, "burnin": burnin, "thin": thin, "moves_per_sweep": k_moves,
              "g_updates_per_sweep": g_updates_per_sweep, "epsilon": epsilon, "floor": floor,
              "floor_hits": int(ch.st[K.FLOOR_HITS]), "seconds": time.perf_counter() - t0},
    )
    if beta_rows is not None:
        present = np.any(np.isfinite(beta_rows), axis=0) if n_keep else np.zeros(days_all.size, bool)
        out.beta_grid = days_all[present].astype(float)
        out.beta = beta_rows[:, present]
    return out


# -- maximum likelihood with known infection days ----------------------------------

@dataclass
class DailyEstimate:
    days: np.ndarray
    beta_hat: np.ndarray  # nan where no estimate exists, inf where saturated
    saturated: np.ndarray
    susceptibles: np.ndarray
    infectives: np.ndarray
    new_infections: np.ndarray


def ml_daily_estimate(events: EpidemicEvents) -> DailyEstimate:
    """Binomial MLE ``-log(1 - c_t / X(t)) / Y(t)`` of ``beta(t)`` per day.

    ``c_t`` is the number of infections on day ``t + 1``. Days with
    ``X(t) = 0`` or ``Y(t) = 0`` get ``nan``; ``c_t = X(t)`` gives ``inf``.
    """
    if events.time_scale != TimeScale.DISCRETE:
        raise DataError("daily estimates need a discrete-time path")
    inf = events.infection_times.astype(np.int64)
    t_end = int(events.removal_times.max()) if events.removal_times.size else int(inf.max())
    days = np.arange(int(events.initial_time), t_end)
    xs = np.zeros(days.size, dtype=np.int64)
    ys = np.zeros(days.size, dtype=np.int64)
    for k, t in enumerate(days):
        xs[k], ys[k] = trajectory_counts(events, t)
    c = np.array([np.sum(inf == t + 1) for t in days], dtype=np.int64)
    est = np.full(days.size, np.nan)
    ok = (xs > 0) & (ys > 0)
    with np.errstate(divide="ignore"):
        est[ok] = -np.log1p(-c[ok] / xs[ok]) / ys[ok]
    sat = ok & (c == xs)
    est[sat] = np.inf
    return DailyEstimate(days, est, sat, xs, ys, c)
