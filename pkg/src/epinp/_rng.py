from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence | np.random.Generator | None"


def as_rng(seed=None) -> np.random.Generator:
    """Return a Generator for ``seed``.

    Generators are passed through unchanged so that callers can thread one
    stream through many calls. Integers and SeedSequences build a PCG64
    stream, which is splittable through ``SeedSequence.spawn``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return ss.spawn(n)
