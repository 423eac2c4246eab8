"""Domain types for closed-population SIR epidemics.

Times are floats in continuous time and integer days in discrete time. Counts
are right-continuous: ``X(t)``/``Y(t)`` include every event at time ``t``,
while the ``*_left`` variants give the left limits ``X(t-)``/``Y(t-)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import special

from .errors import DataError, ParameterError


class TimeScale(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


class Event(NamedTuple):
    time: float
    kind: str  # "I" or "R"
    individual: int | None = None


@dataclass(frozen=True, eq=False)
class EpidemicEvents:
    """A complete or partial SIR sample path.

    ``events`` is sorted by time. Within one time point infections are listed
    before removals, which only matters for discrete-time paths.
    """

    events: tuple[Event, ...]
    N: int
    time_scale: TimeScale = TimeScale.CONTINUOUS
    _inf: np.ndarray = field(init=False, repr=False)
    _rem: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        evs = tuple(Event(float(e.time) if self.time_scale == TimeScale.CONTINUOUS else int(e.time),
                          e.kind, e.individual) for e in self.events)
        evs = tuple(sorted(evs, key=lambda e: (e.time, 0 if e.kind == "I" else 1)))
        object.__setattr__(self, "events", evs)
        object.__setattr__(self, "time_scale", TimeScale(self.time_scale))
        inf = np.array([e.time for e in evs if e.kind == "I"], dtype=float)
        rem = np.array([e.time for e in evs if e.kind == "R"], dtype=float)
        object.__setattr__(self, "_inf", inf)
        object.__setattr__(self, "_rem", rem)
        self.validate()

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_times(cls, infections, removals, N, time_scale=TimeScale.CONTINUOUS,
                   labels: bool = False) -> "EpidemicEvents":
        """Build from paired per-individual infection/removal times.

        ``removals[j]`` may be ``nan`` for an individual still infective.
        With ``labels=True`` individual ``j`` carries label ``j + 1``.
        """
        infections = np.asarray(infections)
        removals = np.asarray(removals, dtype=float)
        evs = []
        for j, (a, b) in enumerate(zip(infections, removals)):
            lab = j + 1 if labels else None
            evs.append(Event(a, "I", lab))
            if np.isfinite(b):
                evs.append(Event(b, "R", lab))
        return cls(tuple(evs), int(N), time_scale)

    # -- accessors ------------------------------------------------------------
    @property
    def initial_time(self):
        return self.events[0].time

    @property
    def infection_times(self) -> np.ndarray:
        return self._inf.copy()

    @property
    def removal_times(self) -> np.ndarray:
        return self._rem.copy()

    @property
    def final_size(self) -> int:
        return len(self._inf)

    @property
    def complete(self) -> bool:
        return len(self._inf) == len(self._rem)

    def by_individual(self) -> dict[int, tuple]:
        """Map label -> (infection time, removal time or None)."""
        out: dict[int, list] = {}
        for e in self.events:
            if e.individual is None:
                raise DataError("events carry no individual labels")
            rec = out.setdefault(e.individual, [None, None])
            rec[0 if e.kind == "I" else 1] = e.time
        return {k: tuple(v) for k, v in out.items()}

    def to_removal_data(self) -> "RemovalData":
        return RemovalData(self._rem.copy(), self.N, self.time_scale)

    # -- validation -----------------------------------------------------------
    def validate(self) -> None:
        if self.N < 1:
            raise DataError("population size must be >= 1")
        if not self.events:
            raise DataError("empty event sequence")
        if self.events[0].kind != "I":
            raise DataError("a path must start with the initial infection")
        for e in self.events:
            if e.kind not in ("I", "R"):
                raise DataError(f"unknown event kind {e.kind!r}")
        t0 = self.events[0].time
        if sum(1 for e in self.events if e.time == t0 and e.kind == "I") != 1:
            raise DataError("exactly one initial infective is allowed")
        if self.time_scale == TimeScale.CONTINUOUS:
            times = [e.time for e in self.events]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise DataError("continuous-time events must be strictly ordered")
        x, y = self.N, 0
        ninf = nrem = 0
        i = 0
        evs = self.events
        while i < len(evs):
            t = evs[i].time
            j = i
            while j < len(evs) and evs[j].time == t:
                j += 1
            block = evs[i:j]
            n_i = sum(1 for e in block if e.kind == "I")
            n_r = len(block) - n_i
            if n_i > x:
                raise DataError(f"more infections than susceptibles at t={t}")
            if n_i and i > 0 and y < 1:
                raise DataError(f"infection at t={t} with no infectives")
            if n_r > y:
                raise DataError(f"removal at t={t} with no infectives")
            x -= n_i
            y += n_i - n_r
            ninf += n_i
            nrem += n_r
            if nrem > ninf:
                raise DataError("more removals than infections")
            i = j
        labelled = [e for e in evs if e.individual is not None]
        if labelled:
            seen: dict[int, float] = {}
            for e in labelled:
                if e.kind == "I":
                    if e.individual in seen:
                        raise DataError(f"individual {e.individual} infected twice")
                    seen[e.individual] = e.time
                else:
                    if e.individual not in seen or seen[e.individual] >= e.time:
                        raise DataError(f"individual {e.individual} removed before infection")


def trajectory_counts(events: EpidemicEvents, t) -> tuple[int, int]:
    """Right-continuous counts ``(X(t), Y(t))``."""
    if t < events.initial_time:
        raise DataError(f"t={t} precedes the initial infection")
    ni = int(np.searchsorted(events._inf, t, side="right"))
    nr = int(np.searchsorted(events._rem, t, side="right"))
    return events.N - ni, ni - nr


def trajectory_counts_left(events: EpidemicEvents, t) -> tuple[int, int]:
    """Left limits ``(X(t-), Y(t-))``; ``(N, 0)`` at the initial time."""
    if t < events.initial_time:
        raise DataError(f"t={t} precedes the initial infection")
    ni = int(np.searchsorted(events._inf, t, side="left"))
    nr = int(np.searchsorted(events._rem, t, side="left"))
    return events.N - ni, ni - nr


@dataclass(frozen=True, eq=False)
class RemovalData:
    """Observed removal times of a completed epidemic."""

    times: np.ndarray
    N: int
    time_scale: TimeScale = TimeScale.CONTINUOUS

    def __post_init__(self):
        ts = TimeScale(self.time_scale)
        object.__setattr__(self, "time_scale", ts)
        t = np.sort(np.asarray(self.times, dtype=float))
        if t.size == 0:
            raise DataError("no removals")
        if not np.all(np.isfinite(t)):
            raise DataError("removal times must be finite")
        if ts == TimeScale.DISCRETE:
            if not np.all(t == np.round(t)):
                raise DataError("discrete-time removal data must be integer days")
            t = t.astype(np.int64)
        elif np.any(np.diff(t) <= 0):
            raise DataError("continuous removal times must be distinct; use RemovalData.with_ties_broken")
        if t.size > self.N:
            raise DataError(f"n={t.size} removals exceed population size N={self.N}")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def span(self) -> tuple:
        return self.times[0], self.times[-1]

    @classmethod
    def with_ties_broken(cls, times, N, spacing: float = 1e-3, tolerance: float = 0.5) -> "RemovalData":
        """Continuous-time data with exact ties spread forward by ``spacing``.

        A group of ``k`` tied times ``t`` becomes ``t, t+spacing, ...``. The
        largest shift, ``(k-1)*spacing``, must stay below ``tolerance`` and
        must not reach the next distinct time.
        """
        t = np.sort(np.asarray(times, dtype=float))
        out = t.copy()
        k = 0
        while k < t.size:
            m = k
            while m + 1 < t.size and t[m + 1] == t[k]:
                m += 1
            if m > k:
                shift = (m - k) * spacing
                nxt = t[m + 1] if m + 1 < t.size else np.inf
                if shift > tolerance or t[k] + shift >= nxt:
                    raise DataError(f"cannot break {m - k + 1} ties at t={t[k]} within tolerance {tolerance}")
                out[k:m + 1] = t[k] + spacing * np.arange(m - k + 1)
            k = m + 1
        return cls(out, N, TimeScale.CONTINUOUS)


# -- rate functions -------------------------------------------------------------

class RateFunction:
    """Non-negative infection rate ``beta(t)`` on ``[t_min, t_max]``."""

    t_min: float = -np.inf
    t_max: float = np.inf

    def __call__(self, t):
        raise NotImplementedError

    def bound(self) -> float:
        """A finite upper bound ``beta*`` used for thinning."""
        raise NotImplementedError

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min) or np.any(t > self.t_max):
            raise ParameterError(f"rate queried outside its domain [{self.t_min}, {self.t_max}]")
        return t


@dataclass(frozen=True)
class Constant(RateFunction):
    beta: float

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ParameterError("constant rate must be finite and >= 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, float(self.beta)) if t.ndim else float(self.beta)

    def bound(self):
        return float(self.beta)


class Tabulated(RateFunction):
    """Left-continuous step function: ``beta(t) = values[k]`` on ``(grid[k-1], grid[k]]``."""

    def __init__(self, grid: Sequence[float], values: Sequence[float]):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size == 0:
            raise ParameterError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise ParameterError("grid must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ParameterError("tabulated rates must be finite and >= 0")
        self.grid, self.values = grid, values
        self.t_min, self.t_max = grid[0], grid[-1]

    def __call__(self, t):
        t = self._check_domain(t)
        out = self.values[np.searchsorted(self.grid, t, side="left")]
        return out if t.ndim else float(out)

    def bound(self):
        return float(self.values.max())


class Function(RateFunction):
    """An arbitrary vectorised callable with a user-supplied bound."""

    def __init__(self, f: Callable, bound: float, t_min=-np.inf, t_max=np.inf):
        if not np.isfinite(bound) or bound < 0:
            raise ParameterError("rate bound must be finite and >= 0")
        self.f, self._bound = f, float(bound)
        self.t_min, self.t_max = t_min, t_max

    def __call__(self, t):
        t = self._check_domain(t)
        v = np.asarray(self.f(t), dtype=float)
        if np.any(v < 0) or np.any(v > self._bound * (1 + 1e-12)):
            raise ParameterError("rate function left [0, bound]")
        return v if t.ndim else float(v)

    def bound(self):
        return self._bound


class Transformed(RateFunction):
    """``link(g)`` for a GP field, step-interpolated like :class:`Tabulated`.

    ``link="exp"`` gives ``exp(g)``; ``link="sigmoid"`` gives ``scale * sigmoid(g)``.
    """

    def __init__(self, field, link: str = "exp", scale: float = 1.0):
        from .gp import link_exp, link_sigmoid

        if link == "exp":
            vals = link_exp(field.values)
        elif link == "sigmoid":
            vals = scale * link_sigmoid(field.values)
        else:
            raise ParameterError(f"unknown link {link!r}")
        self.field, self.link, self.scale = field, link, scale
        self._tab = Tabulated(field.grid, vals)
        self.t_min, self.t_max = self._tab.t_min, self._tab.t_max

    def __call__(self, t):
        return self._tab(t)

    def bound(self):
        return self.scale if self.link == "sigmoid" else self._tab.bound()


# -- infectious periods -------------------------------------------------------

class InfectiousPeriodModel:
    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def logpmf(self, k):
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(InfectiousPeriodModel):
    """Exponential periods with rate ``gamma`` (mean ``1/gamma``)."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError("removal rate must be > 0")

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.gamma, size)

    def logpmf(self, k):
        k = np.asarray(k, dtype=float)
        return np.where(k >= 0, np.log(self.gamma) - self.gamma * k, -np.inf)

    @property
    def mean(self):
        return 1.0 / self.gamma


@dataclass(frozen=True)
class Geometric(InfectiousPeriodModel):
    """``p(k) = gamma (1-gamma)^(k-1)`` on ``k = 1, 2, ...``."""

    gamma: float

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ParameterError("geometric parameter must lie in (0, 1]")

    def sample(self, rng, size=None):
        return rng.geometric(self.gamma, size)

    def logpmf(self, k):
        k = np.asarray(k)
        with np.errstate(divide="ignore"):
            v = np.log(self.gamma) + special.xlog1py(k - 1, -self.gamma)
        return np.where(k >= 1, v, -np.inf)

    @property
    def mean(self):
        return 1.0 / self.gamma
