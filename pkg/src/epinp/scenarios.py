"""Reference rate functions and data sets used by the example fits."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .epi import EpidemicEvents, Function, Geometric, RemovalData, TimeScale
from .errors import DataError
from .simulate import simulate_continuous, simulate_discrete


def scenario1_beta(t):
    """Slowly decaying rate ``0.01 exp(-t^(1/3))``."""
    t = np.asarray(t, dtype=float)
    return 0.01 * np.exp(-np.cbrt(np.maximum(t, 0.0)))


def scenario2_beta(t):
    """Two bumps of height 0.002 centred on days 10 and 55."""
    t = np.asarray(t, dtype=float)
    return 0.002 * np.exp(-(t - 10.0) ** 2 / 18.0) + 0.002 * np.exp(-(t - 55.0) ** 2 / 18.0)


RATES = {
    "scenario1": Function(scenario1_beta, 0.01, t_min=0.0),
    # the bumps barely overlap, so the sum never exceeds 0.0021
    "scenario2": Function(scenario2_beta, 0.0021, t_min=0.0),
}

SCENARIOS = {
    "scenario1": dict(beta="scenario1", gamma=0.5, N=500, omega=10.0, length_scale=6.0),
    "scenario2": dict(beta="scenario2", gamma=0.1, N=500, omega=8.0, length_scale=5.0),
    "smallpox": dict(N=120, omega=5.0, length_scale=14.0),
}


def simulate_major_outbreak(N, beta, gamma, seed: int, min_final_size: int,
                            time_scale=TimeScale.DISCRETE, max_attempts: int = 1000) -> tuple[EpidemicEvents, int]:
    """First simulated outbreak reaching ``min_final_size`` infections.

    Attempt ``k`` uses the stream ``SeedSequence([seed, k])``, so the chosen
    path depends only on ``seed``. Returns ``(events, k)``.
    """
    for k in range(max_attempts):
        ss = np.random.SeedSequence([seed, k])
        if TimeScale(time_scale) == TimeScale.DISCRETE:
            ev = simulate_discrete(N, beta, Geometric(gamma), ss)
        else:
            ev = simulate_continuous(N, beta, gamma, ss)
        if ev.final_size >= min_final_size:
            return ev, k
    raise DataError(f"no outbreak of size >= {min_final_size} in {max_attempts} attempts")


def abakaliki_path() -> Path:
    here = Path(__file__).resolve()
    for parent in here.parents:
        cand = parent / "data" / "abakaliki.csv"
        if cand.exists():
            return cand
    raise FileNotFoundError("data/abakaliki.csv not found")


def load_abakaliki(time_scale=TimeScale.DISCRETE, N: int = 120, **kw) -> RemovalData:
    from .io import read_removals

    return read_removals(abakaliki_path(), N, time_scale, **kw)
