"""Squared-exponential Gaussian-process priors on a finite set of times."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import linalg
from scipy.special import expit

from ._rng import as_rng
from .errors import NumericalError, ParameterError

JITTER_START = 1e-10
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class KernelParams:
    omega: float  # marginal variance of g
    length_scale: float

    def __post_init__(self):
        if not (self.omega > 0 and self.length_scale > 0):
            raise ParameterError("kernel needs omega > 0 and length_scale > 0")


def kernel_matrix(points, params: KernelParams, other=None) -> np.ndarray:
    """``K[i, j] = omega * exp(-0.5 * ((x_i - y_j) / l)^2)``.

    With ``other=None`` the result is the (bitwise symmetric) Gram matrix of
    ``points``; otherwise the cross-covariance with ``other``.
    """
    x = np.asarray(points, dtype=float)
    y = x if other is None else np.asarray(other, dtype=float)
    d = (x[:, None] - y[None, :]) / params.length_scale
    return params.omega * np.exp(-0.5 * d * d)


def cholesky_jittered(K: np.ndarray, omega: float, jitter: float | None = None):
    """Lower Cholesky factor of ``K + jitter * I`` and the jitter used.

    With ``jitter=None`` the relative jitter starts at 1e-10 and grows
    tenfold up to 1e-6 (both relative to ``omega``).
    """
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), (jitter if jitter is not None else JITTER_START * omega)
    if jitter is not None:
        try:
            return linalg.cholesky(K + jitter * np.eye(n), lower=True, check_finite=False), jitter
        except linalg.LinAlgError as exc:
            raise NumericalError(f"Cholesky failed with jitter {jitter:g}") from exc
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        try:
            L = linalg.cholesky(K + rel * omega * np.eye(n), lower=True, check_finite=False)
            return L, rel * omega
        except linalg.LinAlgError:
            rel *= 10
    raise NumericalError(f"kernel matrix of size {n} not positive definite at jitter {JITTER_MAX:g}*omega")


@lru_cache(maxsize=128)
def _cached_chol(offsets: bytes, omega: float, length_scale: float, jitter: float | None):
    # the SE kernel is stationary, so the factor depends only on grid offsets
    x = np.frombuffer(offsets, dtype=float)
    L, jit = cholesky_jittered(kernel_matrix(x, KernelParams(omega, length_scale)), omega, jitter)
    L.setflags(write=False)
    return L, jit


def grid_cholesky(grid, params: KernelParams, jitter: float | None = None):
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return np.zeros((0, 0)), (jitter if jitter is not None else JITTER_START * params.omega)
    key = np.ascontiguousarray(grid - grid[0]).tobytes()
    return _cached_chol(key, params.omega, params.length_scale, jitter)


@dataclass(frozen=True, eq=False)
class GpField:
    """Values of a zero-mean GP at an increasing grid of times.

    ``jitter`` is the absolute diagonal term added to the kernel; fields
    derived from this one (extensions, restrictions, proposals) reuse it so
    that every finite-dimensional prior stays consistent.
    """

    grid: np.ndarray
    values: np.ndarray
    kernel: KernelParams
    jitter: float | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ParameterError("grid and values must be 1-d and of equal length")
        if np.any(np.diff(grid) <= 0):
            raise ParameterError("GP grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise NumericalError("GP values must be finite")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.jitter is None:
            object.__setattr__(self, "jitter", grid_cholesky(grid, self.kernel)[1])

    @cached_property
    def chol(self) -> np.ndarray:
        return grid_cholesky(self.grid, self.kernel, self.jitter)[0]

    def __len__(self):
        return self.grid.size

    def with_values(self, values) -> "GpField":
        f = GpField(self.grid, values, self.kernel, self.jitter)
        if "chol" in self.__dict__:
            f.__dict__["chol"] = self.chol
        return f

    def restrict(self, points) -> "GpField":
        """The sub-field on ``points``, which must all lie on the grid."""
        points = np.asarray(points, dtype=float)
        idx = np.searchsorted(self.grid, points)
        if np.any(idx >= self.grid.size) or np.any(self.grid[np.minimum(idx, self.grid.size - 1)] != points):
            raise ParameterError("restriction points must lie on the grid")
        return GpField(self.grid[idx], self.values[idx], self.kernel, self.jitter)

    def restrict_range(self, lo, hi) -> "GpField":
        """The sub-field on grid points within ``[lo, hi]``."""
        a = np.searchsorted(self.grid, lo, side="left")
        b = np.searchsorted(self.grid, hi, side="right")
        return GpField(self.grid[a:b], self.values[a:b], self.kernel, self.jitter)

    def at(self, t) -> np.ndarray:
        """Values at grid points ``t``."""
        idx = np.searchsorted(self.grid, t)
        if np.any(idx >= self.grid.size) or np.any(self.grid[np.minimum(idx, self.grid.size - 1)] != t):
            raise ParameterError("points are not on the grid")
        return self.values[idx]


def sample_prior(grid, params: KernelParams, seed=None, jitter: float | None = None) -> GpField:
    """Draw ``g = L z`` with ``L`` the Cholesky factor of the kernel on ``grid``."""
    rng = as_rng(seed)
    grid = np.asarray(grid, dtype=float)
    L, jit = grid_cholesky(grid, params, jitter)
    g = L @ rng.standard_normal(grid.size)
    f = GpField(grid, g, params, jit)
    f.__dict__["chol"] = L
    return f


def conditional_moments(field: GpField, new_points):
    """Mean and covariance of ``g(new_points)`` given ``field``."""
    new_points = np.asarray(new_points, dtype=float)
    k = field.kernel
    Knn = kernel_matrix(new_points, k) + field.jitter * np.eye(new_points.size)
    if len(field) == 0:
        return np.zeros(new_points.size), Knn
    Kon = kernel_matrix(field.grid, k, new_points)
    A = linalg.solve_triangular(field.chol, Kon, lower=True, check_finite=False)
    alpha = linalg.solve_triangular(field.chol, field.values, lower=True, check_finite=False)
    mean = A.T @ alpha
    cov = Knn - A.T @ A
    return mean, 0.5 * (cov + cov.T)


def conditional_extend(field: GpField, new_points, seed=None) -> GpField:
    """Extend ``field`` by a draw from the GP conditional at ``new_points``.

    Existing values are carried over unchanged.
    """
    new_points = np.atleast_1d(np.asarray(new_points, dtype=float))
    if new_points.size == 0:
        return field
    if np.intersect1d(new_points, field.grid).size or np.unique(new_points).size != new_points.size:
        raise ParameterError("new points must be distinct and disjoint from the grid")
    rng = as_rng(seed)
    mean, cov = conditional_moments(field, new_points)
    Lc, _ = cholesky_jittered(cov, field.kernel.omega)
    draw = mean + Lc @ rng.standard_normal(new_points.size)
    grid = np.concatenate([field.grid, new_points])
    vals = np.concatenate([field.values, draw])
    order = np.argsort(grid, kind="stable")
    return GpField(grid[order], vals[order], field.kernel, field.jitter)


def underrelaxed_propose(field: GpField, epsilon: float, seed=None) -> GpField:
    """``g~ = sqrt(1 - eps^2) g + eps V`` with ``V`` a fresh prior draw on the grid.

    Leaves ``N(0, Sigma)`` invariant and is reversible with respect to it.
    """
    if not 0 <= epsilon <= 1:
        raise ParameterError("epsilon must lie in [0, 1]")
    rng = as_rng(seed)
    v = field.chol @ rng.standard_normal(len(field))
    return field.with_values(np.sqrt(1.0 - epsilon * epsilon) * field.values + epsilon * v)


def link_sigmoid(z):
    """``1 / (1 + exp(-z))``, saturating without overflow warnings."""
    return expit(z)


def link_exp(z):
    with np.errstate(over="ignore"):
        return np.exp(z)


def log_sigmoid(z):
    """``log(sigmoid(z))`` evaluated stably."""
    z = np.asarray(z, dtype=float)
    return -np.logaddexp(0.0, -z)
