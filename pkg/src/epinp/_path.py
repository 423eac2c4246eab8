"""Piecewise-constant (X, Y) bookkeeping for continuous-time augmented states."""
from __future__ import annotations

import numpy as np


class ContinuousPath:
    """Counts of a label-free continuous-time SIR path on ``[i1, r_n]``.

    ``infections`` holds all infection times including ``i1``; removals are
    the observed times. Integrals are exact sums over event intervals.
    """

    __slots__ = ("N", "inf", "rem", "times", "x", "y", "t_end")

    def __init__(self, infections, removals, N: int):
        self.N = int(N)
        self.inf = np.sort(np.asarray(infections, dtype=float))
        self.rem = np.asarray(removals, dtype=float)
        self.t_end = self.rem[-1]
        times = np.concatenate([self.inf, self.rem])
        dy = np.concatenate([np.ones(self.inf.size), -np.ones(self.rem.size)])
        dx = np.concatenate([-np.ones(self.inf.size), np.zeros(self.rem.size)])
        order = np.argsort(times, kind="stable")
        self.times = times[order]
        # state right after each event
        self.y = np.cumsum(dy[order])
        self.x = self.N + np.cumsum(dx[order])

    def counts_left(self, t):
        """``(X(t-), Y(t-))`` for an array of times."""
        t = np.asarray(t, dtype=float)
        ni = np.searchsorted(self.inf, t, side="left")
        nr = np.searchsorted(self.rem, t, side="left")
        return self.N - ni, ni - nr

    def _dt(self):
        t = np.minimum(self.times, self.t_end)
        return np.diff(t)

    def integrals(self) -> tuple[float, float]:
        """``(int X Y dt, int Y dt)`` over ``[i1, r_n]``."""
        dt = self._dt()
        x, y = self.x[:-1], self.y[:-1]
        return float(np.sum(x * y * dt)), float(np.sum(y * dt))

    def valid(self) -> bool:
        """Y >= 1 on ``[i1, r_n)`` and all counts within bounds."""
        dt = self._dt()
        y = self.y[:-1]
        return bool(np.all(self.x >= 0) and np.all(self.y >= 0) and np.all(y[dt > 0] >= 1)
                    and self.inf[0] < self.rem[0])

    def active_region(self):
        """Intervals of ``(i1, r_n)`` with ``X Y >= 1`` as ``(starts, ends)``."""
        dt = self._dt()
        xy = self.x[:-1] * self.y[:-1]
        keep = (xy >= 1) & (dt > 0)
        starts = self.times[:-1][keep]
        ends = np.minimum(self.times[1:], self.t_end)[keep]
        return starts, ends
