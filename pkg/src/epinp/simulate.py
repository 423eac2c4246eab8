"""Exact forward simulation of SIR epidemics with one initial infective."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from ._rng import as_rng
from .epi import (Constant, EpidemicEvents, Event, Geometric, InfectiousPeriodModel,
                  RateFunction, TimeScale)
from .errors import ParameterError

FINAL_SIZE_ORACLE_MAX_N = 10


def _as_rate(beta) -> RateFunction:
    if isinstance(beta, RateFunction):
        return beta
    return Constant(float(beta))


def simulate_continuous(N: int, beta, gamma: float, seed=None, t0: float = 0.0) -> EpidemicEvents:
    """Simulate the continuous-time SIR model by thinning.

    After each event with ``(X, Y) = (x, y)`` a potential removal time
    ``tau_R ~ Exp(gamma*y)`` is drawn, then points of a rate ``beta* x y``
    Poisson process are generated and each is kept with probability
    ``beta(s)/beta*``. The first kept point before ``tau_R`` is the next
    infection, otherwise the next event is a removal. With a constant rate
    every candidate is kept, which is the Gillespie algorithm.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    if not gamma > 0:
        raise ParameterError("removal rate must be > 0")
    rate = _as_rate(beta)
    bstar = rate.bound()
    if not np.isfinite(bstar) or bstar < 0:
        raise ParameterError("infection rate must be bounded and non-negative")
    rng = as_rng(seed)

    t = float(t0)
    x, y = N - 1, 1
    events = [Event(t, "I")]
    while y > 0:
        tau_r = rng.exponential(1.0 / (gamma * y))
        tau_i = np.inf
        if x > 0 and bstar > 0:
            s = 0.0
            scale = 1.0 / (bstar * x * y)
            while True:
                s += rng.exponential(scale)
                if s >= tau_r:
                    break
                if rng.random() * bstar < rate(t + s):
                    tau_i = s
                    break
        if tau_i < tau_r:
            t += tau_i
            x, y = x - 1, y + 1
            events.append(Event(t, "I"))
        else:
            t += tau_r
            y -= 1
            events.append(Event(t, "R"))
        assert events[-1].time > events[-2].time, "tied event times"
    return EpidemicEvents(tuple(events), N, TimeScale.CONTINUOUS)


def simulate_discrete(N: int, beta, ip: InfectiousPeriodModel | float, seed=None,
                      t0: int = 0) -> EpidemicEvents:
    """Simulate the discrete-time SIR model day by day.

    On day ``t`` every susceptible independently escapes infection with
    probability ``exp(-beta(t) Y(t))``; those who do not escape become
    infective on day ``t+1``. An infective's period is drawn from ``ip`` when
    it is infected. Individuals are labelled ``1..n`` in order of removal
    (ties by infection day).
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    rate = _as_rate(beta)
    if not isinstance(ip, InfectiousPeriodModel):
        ip = Geometric(float(ip))
    rng = as_rng(seed)

    t = int(t0)
    inf_times = [t]
    rem_times = [t + int(ip.sample(rng))]
    x = N - 1
    while True:
        y = sum(1 for a, b in zip(inf_times, rem_times) if a <= t < b)
        if y == 0:
            break
        b = float(rate(t))
        if not np.isfinite(b) or b < 0:
            raise ParameterError(f"invalid infection rate {b} on day {t}")
        c = int(rng.binomial(x, -np.expm1(-b * y))) if x > 0 else 0
        if c:
            periods = np.atleast_1d(ip.sample(rng, c)).astype(int)
            inf_times.extend([t + 1] * c)
            rem_times.extend((t + 1 + periods).tolist())
            x -= c
        t += 1
    order = sorted(range(len(inf_times)), key=lambda k: (rem_times[k], inf_times[k], k))
    return EpidemicEvents.from_times(np.array(inf_times)[order], np.array(rem_times)[order], N,
                                     TimeScale.DISCRETE, labels=True)


def final_size_oracle(N: int, beta: float, gamma: float) -> np.ndarray:
    """Exact final-size distribution of the Markov SIR chain.

    Returns ``p`` with ``p[k]`` the probability that ``k`` individuals are
    ever infected (``k = 0..N``; ``p[0] == 0``). Enumerates the embedded
    jump chain, so only small populations are accepted.
    """
    if N > FINAL_SIZE_ORACLE_MAX_N:
        raise ParameterError(f"final-size enumeration limited to N <= {FINAL_SIZE_ORACLE_MAX_N}")
    if N < 1 or beta < 0 or not gamma > 0:
        raise ParameterError("need N >= 1, beta >= 0, gamma > 0")
    # every jump raises 2*(N-x) - y by one, so sweep states level by level
    level = {(N - 1, 1): 1.0}
    p = np.zeros(N + 1)
    while level:
        nxt: dict = defaultdict(float)
        for (x, y), pr in level.items():
            if y == 0:
                p[N - x] += pr
                continue
            ri, rr = beta * x * y, gamma * y
            tot = ri + rr
            if ri > 0:
                nxt[(x - 1, y + 1)] += pr * ri / tot
            nxt[(x, y - 1)] += pr * rr / tot
        level = nxt
    return p
