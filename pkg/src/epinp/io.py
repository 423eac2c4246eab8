"""CSV and config-file input/output."""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .chain import ChainOutput, PosteriorSummary
from .epi import EpidemicEvents, Event, RemovalData, TimeScale
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# -- events and removals ------------------------------------------------------------

def write_events(path, events: EpidemicEvents) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "kind", "individual"])
        for e in events.events:
            t = int(e.time) if events.time_scale == TimeScale.DISCRETE else e.time
            w.writerow([_fmt(t), e.kind, "" if e.individual is None else int(e.individual)])


def read_events(path, N: int, time_scale=TimeScale.DISCRETE) -> EpidemicEvents:
    ts = TimeScale(time_scale)
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or not {"time", "kind"} <= set(rd.fieldnames):
            raise DataError(f"{path}: events file needs a 'time,kind,individual' header")
        for k, row in enumerate(rd, start=2):
            try:
                t = float(row["time"])
            except ValueError as exc:
                raise DataError(f"{path}:{k}: bad time {row['time']!r}") from exc
            if ts == TimeScale.DISCRETE:
                if t != round(t):
                    raise DataError(f"{path}:{k}: discrete event times must be integers")
                t = int(t)
            kind = row["kind"].strip()
            if kind not in ("I", "R"):
                raise DataError(f"{path}:{k}: kind must be I or R")
            lab = (row.get("individual") or "").strip()
            events.append(Event(t, kind, int(lab) if lab else None))
    ev = EpidemicEvents(tuple(events), N, ts)
    ev.validate()
    return ev


def write_removals(path, data: RemovalData) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("time\n")
        for t in data.times:
            fh.write(_fmt(t) + "\n")


def read_removals(path, N: int, time_scale=TimeScale.DISCRETE, tie_spacing: float = 1e-3,
                  tie_tolerance: float = 0.5) -> RemovalData:
    """Removal times from a one-column CSV with header ``time``.

    Continuous-time data with exact ties (typically whole days) have the
    ties spread by ``tie_spacing``.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise DataError(f"removals file {path} not found") from exc
    if not rows or [c.strip() for c in rows[0]][:1] != ["time"]:
        raise DataError(f"{path}: first line must be the header 'time'")
    vals = []
    for k, row in enumerate(rows[1:], start=2):
        if not row or not row[0].strip():
            continue
        try:
            vals.append(float(row[0]))
        except ValueError as exc:
            raise DataError(f"{path}:{k}: bad time {row[0]!r}") from exc
    ts = TimeScale(time_scale)
    if ts == TimeScale.CONTINUOUS and len(set(vals)) != len(vals):
        data = RemovalData.with_ties_broken(vals, N, tie_spacing, tie_tolerance)
    else:
        data = RemovalData(np.asarray(vals), N, ts)
    if data.n:
        logger.info("read %d removals (N=%d) spanning %s to %s", data.n, N, data.times[0], data.times[-1])
    return data


# -- config -----------------------------------------------------------------------------

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for k, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{k}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{k}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{k}: duplicate key {key!r}")
        out[key] = val
    return out


def read_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


class RunConfig:
    """Typed access to a flat config; records every value it hands out.

    ``resolved`` (the values actually used, defaults included) is what gets
    echoed to ``diagnostics.json`` and is enough to repeat the run.
    """

    def __init__(self, command: str, values: dict[str, str], base_dir: Path | None = None):
        self.command = command
        self.values = dict(values)
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        self.resolved: dict[str, object] = {}

    def _get(self, key, default, conv, required):
        if key in self.values:
            raw = self.values[key]
            try:
                val = conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        elif required:
            raise ConfigError(f"missing required key {key!r} for {self.command}")
        else:
            val = default
        self.resolved[key] = val
        return val

    def has(self, key) -> bool:
        return key in self.values

    def str(self, key, default=None, required=False) -> str | None:
        return self._get(key, default, str, required)

    def float(self, key, default=None, required=False) -> float | None:
        return self._get(key, default, float, required)

    def int(self, key, default=None, required=False) -> int | None:
        def conv(s):
            v = float(s)
            if v != int(v):
                raise ValueError(s)
            return int(v)
        return self._get(key, default, conv, required)

    def bool(self, key, default=False) -> bool:
        def conv(s):
            s = s.lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)
        return self._get(key, default, conv, False)

    def path(self, key, required=True) -> Path | None:
        s = self.str(key, required=required)
        if s is None:
            return None
        p = Path(s)
        if not p.is_absolute():
            p = self.base_dir / p
        if not p.exists():
            raise ConfigError(f"{key}: {p} does not exist")
        return p

    def seed(self) -> int:
        if "seed" in self.values:
            s = self.int("seed")
        elif "mcmc.seed" in self.values:
            s = self.int("mcmc.seed")
        else:
            raise ConfigError("a seed is required (config key 'seed' or --seed)")
        if s < 0:
            raise ConfigError("seed must be a non-negative integer")
        self.resolved["seed"] = s
        return s

    def unused(self) -> list[str]:
        return sorted(k for k in self.values if k not in self.resolved and k not in ("mcmc.seed", "out"))


# -- chain outputs ----------------------------------------------------------------------

def write_samples(path, chain: ChainOutput) -> None:
    """Long format ``iteration,day,beta``; grid points absent from an
    iteration's state are skipped. A ``chain`` column is added for merged
    multi-chain output."""
    multi = chain.chain is not None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("iteration,day,beta" + (",chain\n" if multi else "\n"))
        grid = [_fmt(float(t)) if float(t) != int(t) else str(int(t)) for t in chain.beta_grid]
        for s in range(len(chain)):
            it = int(chain.iterations[s])
            row = chain.beta[s]
            tail = f",{int(chain.chain[s])}\n" if multi else "\n"
            for k in np.flatnonzero(np.isfinite(row)):
                fh.write(f"{it},{grid[k]},{float(row[k])!r}{tail}")


def read_samples(path):
    """``(iterations, days, beta, chain)`` arrays from a samples file."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        rows = list(rd)
    it = np.array([int(r["iteration"]) for r in rows], dtype=np.int64)
    day = np.array([float(r["day"]) for r in rows])
    beta = np.array([float(r["beta"]) for r in rows])
    ch = np.array([int(r["chain"]) for r in rows], dtype=np.int64) if rows and "chain" in rows[0] else None
    return it, day, beta, ch


def write_params(path, chain: ChainOutput, names) -> None:
    multi = chain.chain is not None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", *names] + (["chain"] if multi else []))
        for s in range(len(chain)):
            row = [int(chain.iterations[s])]
            for n in names:
                v = chain.params[n][s]
                row.append(_fmt(int(v)) if n in ("kappa", "i_kappa", "M") else _fmt(v))
            if multi:
                row.append(int(chain.chain[s]))
            w.writerow(row)


def write_summary(path, summary: PosteriorSummary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "median", "mean", "lo95", "hi95"])
        for t, med, mean, lo, hi in summary.as_rows():
            day = str(int(t)) if float(t) == int(t) else _fmt(t)
            w.writerow([day, _fmt(med), _fmt(mean), _fmt(lo), _fmt(hi)])


def write_json(path, obj) -> None:
    def default(o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Path):
            return str(o)
        raise TypeError(type(o).__name__)

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
