"""Chain containers, posterior summaries and effective sample sizes."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class ChainOutput:
    """Retained draws of one or more chains.

    ``params`` maps scalar names (``gamma``, ``beta``, ``kappa`` ...) to
    traces of equal length. ``beta`` is a ``(samples, len(beta_grid))``
    array of rate-function draws; ``nan`` marks grid points that were not
    part of an iteration's state. ``acceptance`` maps a move type to
    ``[accepted, proposed]``.
    """

    model: str
    iterations: np.ndarray
    params: dict[str, np.ndarray] = field(default_factory=dict)
    beta_grid: np.ndarray | None = None
    beta: np.ndarray | None = None
    acceptance: dict[str, list[int]] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    chain: np.ndarray | None = None

    def __len__(self):
        return int(self.iterations.size)

    def acceptance_rates(self) -> dict[str, float]:
        return {k: (a / p if p else float("nan")) for k, (a, p) in self.acceptance.items()}

    @staticmethod
    def merge(chains: list["ChainOutput"]) -> "ChainOutput":
        """Concatenate chains of the same model, aligning their beta grids."""
        if len(chains) == 1:
            return chains[0]
        first = chains[0]
        labels = [c.chain if c.chain is not None else np.full(len(c), k) for k, c in enumerate(chains)]
        out = ChainOutput(first.model, np.concatenate([c.iterations for c in chains]),
                          chain=np.concatenate(labels))
        for name in first.params:
            out.params[name] = np.concatenate([c.params[name] for c in chains])
        for name in first.extra:
            try:
                out.extra[name] = np.concatenate([c.extra[name] for c in chains])
            except ValueError:
                pass
        if first.beta_grid is not None:
            grid = np.unique(np.concatenate([c.beta_grid for c in chains]))
            rows = []
            for c in chains:
                block = np.full((len(c), grid.size), np.nan)
                block[:, np.searchsorted(grid, c.beta_grid)] = c.beta
                rows.append(block)
            out.beta_grid, out.beta = grid, np.vstack(rows)
        for c in chains:
            for k, (a, p) in c.acceptance.items():
                acc = out.acceptance.setdefault(k, [0, 0])
                acc[0] += a
                acc[1] += p
        out.meta = {"chains": [c.meta for c in chains]}
        return out


def retained_count(iterations: int, burnin: int, thin: int) -> int:
    return max(0, (iterations - burnin) // thin)


def is_retained(k: int, burnin: int, thin: int) -> bool:
    """Whether 1-based iteration ``k`` is stored."""
    return k > burnin and (k - burnin) % thin == 0


def autocorrelation(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.size
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    if acov[0] == 0:
        return np.r_[1.0, np.zeros(n - 1)]
    return acov / acov[0]


def effective_sample_size(x) -> float:
    """ESS with Geyer's initial positive sequence truncation."""
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    n = x.size
    if n < 4:
        return float(n)
    if np.all(x == x[0]):
        return float(n)
    rho = autocorrelation(x)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
    tau = max(tau, 1.0 / n)
    return float(min(n, n / tau))


@dataclass
class PosteriorSummary:
    """Pointwise summaries of ``beta(t)`` plus scalar parameter quantiles."""

    grid: np.ndarray
    median: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_samples: np.ndarray
    params: dict[str, dict[str, float]]
    ess: dict[str, float]
    notes: list[str]
    level: float = 0.95

    def as_rows(self):
        for k in range(self.grid.size):
            yield self.grid[k], self.median[k], self.mean[k], self.lo[k], self.hi[k]


def band_quantiles(samples: np.ndarray, level: float = 0.95):
    """Pointwise ``(median, mean, lo, hi, count)`` ignoring ``nan`` entries."""
    a = (1 - level) / 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = np.nanquantile(samples, [0.5, a, 1 - a], axis=0)
        mean = np.nanmean(samples, axis=0)
    return q[0], mean, q[1], q[2], np.sum(np.isfinite(samples), axis=0)


def summarize(chain: ChainOutput, level: float = 0.95) -> PosteriorSummary:
    if len(chain) == 0:
        raise ValueError("cannot summarise an empty chain")
    notes: list[str] = []
    if chain.beta is not None:
        med, mean, lo, hi, cnt = band_quantiles(chain.beta, level)
        keep = cnt > 0
        for t in chain.beta_grid[~keep]:
            notes.append(f"grid point {t:g} has no samples and is omitted")
        grid, med, mean, lo, hi, cnt = (a[keep] for a in (chain.beta_grid, med, mean, lo, hi, cnt))
    else:
        grid = med = mean = lo = hi = np.zeros(0)
        cnt = np.zeros(0, dtype=int)
    a = (1 - level) / 2
    params = {}
    ess = {}
    for name, tr in chain.params.items():
        tr = np.asarray(tr, dtype=float)
        params[name] = {
            "median": float(np.median(tr)), "mean": float(np.mean(tr)),
            "lo": float(np.quantile(tr, a)), "hi": float(np.quantile(tr, 1 - a)),
        }
        ess[name] = effective_sample_size(tr)
    for n in notes:
        logger.info(n)
    return PosteriorSummary(grid, med, mean, lo, hi, cnt, params, ess, notes, level)
