"""Command-line pipeline: ``epinp <command> --config FILE [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import spawn_seeds
from .chain import ChainOutput, PosteriorSummary, band_quantiles, summarize
from .cts_gp import CtsGpPriors, run_cts_gp_mcmc
from .discrete_gp import BetaPrior, ml_daily_estimate, run_discrete_gp_mcmc
from .epi import Constant, RemovalData, TimeScale
from .errors import ConfigError, DataError, EpinpError
from .gp import KernelParams
from .io import (RunConfig, read_config, read_events, read_removals, read_samples, write_events, write_json,
                 write_params, write_removals, write_samples, write_summary)
from .parametric import GammaPrior, ParametricPriors, run_parametric_mcmc
from .scenarios import RATES, SCENARIOS, simulate_major_outbreak

logger = logging.getLogger("epinp")

COMMANDS = ("simulate", "fit-parametric", "fit-discrete-gp", "fit-cts-gp", "ml-estimate", "summarize")


def _time_scale(cfg: RunConfig, default: str) -> TimeScale:
    s = cfg.str("time_scale", default)
    try:
        return TimeScale(s)
    except ValueError as exc:
        raise ConfigError(f"time_scale must be 'discrete' or 'continuous', got {s!r}") from exc


def _load_data(cfg: RunConfig, ts: TimeScale) -> RemovalData:
    N = cfg.int("population_size", required=True)
    return read_removals(cfg.path("data"), N, ts, cfg.float("data.tie_spacing", 1e-3),
                         cfg.float("data.tie_tolerance", 0.5))


def _mcmc(cfg: RunConfig) -> dict:
    its = cfg.int("mcmc.iterations", 10_000)
    out = dict(iterations=its, thin=cfg.int("mcmc.thin", 10), burnin=cfg.int("mcmc.burnin", its // 5))
    if out["thin"] < 1 or out["burnin"] < 0 or its < 1:
        raise ConfigError("need mcmc.iterations >= 1, mcmc.thin >= 1 and mcmc.burnin >= 0")
    out["moves_per_sweep"] = cfg.int("mcmc.moves_per_sweep", None)
    return out


def _kernel(cfg: RunConfig) -> KernelParams:
    return KernelParams(cfg.float("gp.omega", required=True), cfg.float("gp.length_scale", required=True))


def _gamma_prior(cfg, key, shape, rate) -> GammaPrior:
    return GammaPrior(cfg.float(f"{key}.shape", shape), cfg.float(f"{key}.rate", rate))


# -- per-command chain runners (module level so worker processes can import them) ------

def _chain_parametric(cfg: RunConfig, data, seed):
    priors = ParametricPriors(_gamma_prior(cfg, "prior.beta", 1.0, 1e3), _gamma_prior(cfg, "prior.gamma", 1.0, 5.0),
                              cfg.float("prior.init_gap.rate", 0.1))
    return run_parametric_mcmc(data, priors, seed=seed, **_mcmc(cfg))


def _known_infections(cfg: RunConfig, data: RemovalData, ts: TimeScale):
    path = cfg.path("data.events", required=False)
    if path is None:
        return None
    ev = read_events(path, data.N, ts)
    if not np.array_equal(np.sort(ev.removal_times), np.asarray(data.times, dtype=float)):
        raise DataError("removals in data.events do not match the removal data")
    if ts == TimeScale.DISCRETE:
        # labels follow removal order; ties keep the order of the events file
        by = ev.by_individual()
        pairs = sorted(by.values(), key=lambda p: p[1])
        return np.array([p[0] for p in pairs], dtype=np.int64)
    return ev.infection_times


def _chain_discrete(cfg: RunConfig, data, seed):
    prior = BetaPrior(cfg.float("prior.gamma_beta.a", 1.0), cfg.float("prior.gamma_beta.b", 1.0))
    return run_discrete_gp_mcmc(
        data, _kernel(cfg), prior, epsilon=cfg.float("gp.epsilon", 0.2), seed=seed,
        g_updates_per_sweep=cfg.int("gp.updates_per_sweep", 1), floor_gap=cfg.int("mcmc.floor_gap", None),
        known_infections=_known_infections(cfg, data, TimeScale.DISCRETE), jitter=cfg.float("gp.jitter", None),
        **_mcmc(cfg))


def _chain_cts(cfg: RunConfig, data, seed):
    priors = CtsGpPriors(_gamma_prior(cfg, "prior.beta_star", 1.0, 100.0), _gamma_prior(cfg, "prior.gamma", 1.0, 5.0),
                         cfg.float("prior.init_gap.rate", 0.1))
    return run_cts_gp_mcmc(
        data, _kernel(cfg), priors, epsilon=cfg.float("gp.epsilon", 0.2), seed=seed,
        g_updates_per_sweep=cfg.int("gp.updates_per_sweep", 1),
        thinned_moves_per_sweep=cfg.int("mcmc.thinned_moves_per_sweep", None),
        known_infections=_known_infections(cfg, data, TimeScale.CONTINUOUS), jitter=cfg.float("gp.jitter", None),
        **_mcmc(cfg))


RUNNERS = {"fit-parametric": _chain_parametric, "fit-discrete-gp": _chain_discrete, "fit-cts-gp": _chain_cts}


def _run_one(command, values, base_dir, data, seed):
    cfg = RunConfig(command, values, base_dir)
    out = RUNNERS[command](cfg, data, seed)
    return out, cfg.resolved


def run_chains(cfg: RunConfig, data: RemovalData, seed: int) -> ChainOutput:
    """Run ``mcmc.chains`` chains on seeds spawned from ``seed`` and merge them."""
    k = cfg.int("mcmc.chains", 1)
    if k < 1:
        raise ConfigError("mcmc.chains must be >= 1")
    if k == 1:
        return RUNNERS[cfg.command](cfg, data, np.random.SeedSequence(seed))
    seeds = spawn_seeds(seed, k)
    workers = min(k, cfg.int("mcmc.workers", k))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_one, cfg.command, cfg.values, cfg.base_dir, data, s) for s in seeds]
            results = [f.result() for f in futs]
    else:
        results = [_run_one(cfg.command, cfg.values, cfg.base_dir, data, s) for s in seeds]
    for _, resolved in results:
        cfg.resolved.update(resolved)
    chains = []
    for j, (c, _) in enumerate(results):
        c.chain = np.full(len(c), j)
        chains.append(c)
    return ChainOutput.merge(chains)


# -- commands ------------------------------------------------------------------------------

def _diagnostics(cfg: RunConfig, chain: ChainOutput, summary: PosteriorSummary | None, extra=None) -> dict:
    d = {
        "command": cfg.command,
        "version": __version__,
        "seed": cfg.resolved.get("seed"),
        "config": {k: cfg.resolved[k] for k in sorted(cfg.resolved)},
        "acceptance_rates": chain.acceptance_rates(),
        "acceptance_counts": chain.acceptance,
        "retained_samples": len(chain),
    }
    if summary is not None:
        d["ess"] = summary.ess
        d["parameters"] = summary.params
        d["notes"] = summary.notes
    if chain.chain is not None:
        d["chains"] = chain.meta["chains"]
    else:
        d["meta"] = chain.meta
    if extra:
        d.update(extra)
    return d


def cmd_simulate(cfg: RunConfig, out: Path) -> None:
    seed = cfg.seed()
    name = cfg.str("simulate.scenario", None)
    if name is not None:
        if name not in ("scenario1", "scenario2"):
            raise ConfigError("simulate.scenario must be scenario1 or scenario2")
        sc = SCENARIOS[name]
        beta, gamma = RATES[name], cfg.float("simulate.gamma", sc["gamma"])
        N = cfg.int("population_size", sc["N"])
    else:
        beta = Constant(cfg.float("simulate.beta", required=True))
        gamma = cfg.float("simulate.gamma", required=True)
        N = cfg.int("population_size", required=True)
    ts = TimeScale(cfg.str("simulate.time_scale", "discrete"))
    min_size = cfg.int("simulate.min_final_size", 1)
    ev, attempt = simulate_major_outbreak(N, beta, gamma, seed, min_size, ts)
    write_events(out / "events.csv", ev)
    write_removals(out / "removals.csv", ev.to_removal_data())
    if name is not None:
        lo = int(np.floor(ev.initial_time))
        hi = int(np.ceil(ev.removal_times.max()))
        days = np.arange(lo, hi + 1)
        with open(out / "beta_true.csv", "w", encoding="utf-8") as fh:
            fh.write("day,beta\n")
            for d, b in zip(days, beta(days.astype(float))):
                fh.write(f"{d},{float(b)!r}\n")
    write_json(out / "diagnostics.json", {
        "command": "simulate", "seed": seed, "attempt": attempt, "final_size": ev.final_size,
        "duration": float(ev.removal_times.max() - ev.initial_time),
        "config": {k: cfg.resolved[k] for k in sorted(cfg.resolved)}, "version": __version__})


def _constant_band(chain: ChainOutput, data: RemovalData) -> ChainOutput:
    """Report a constant-rate chain on whole days from ``r_1`` to ``r_n``."""
    days = np.arange(np.floor(data.times[0]), np.ceil(data.times[-1]) + 1)
    chain.beta_grid = days
    chain.beta = np.repeat(chain.params["beta"][:, None], days.size, axis=1)
    return chain


def cmd_fit(cfg: RunConfig, out: Path) -> None:
    seed = cfg.seed()
    default_ts = "discrete" if cfg.command == "fit-discrete-gp" else "continuous"
    ts = _time_scale(cfg, default_ts)
    if (cfg.command == "fit-discrete-gp") != (ts == TimeScale.DISCRETE):
        raise ConfigError(f"{cfg.command} needs time_scale = {default_ts}")
    data = _load_data(cfg, ts)
    logger.info("n=%d N=%d span=%s", data.n, data.N, data.span)
    chain = run_chains(cfg, data, seed)
    if len(chain) == 0:
        raise ConfigError("no samples retained; increase mcmc.iterations or lower mcmc.burnin")
    if cfg.command == "fit-parametric":
        chain = _constant_band(chain, data)
        names = ["beta", "gamma", "i1"]
    elif cfg.command == "fit-discrete-gp":
        names = ["gamma", "kappa", "i_kappa"]
    else:
        names = ["gamma", "beta_star", "i1", "M"]
    summary = summarize(chain)
    write_samples(out / "samples.csv", chain)
    write_params(out / "params.csv", chain, names)
    write_summary(out / "summary.csv", summary)
    if cfg.command == "fit-cts-gp" and cfg.bool("output.thinned_trace", False):
        write_params(out / "thinned.csv", chain, ["M"])
    write_json(out / "diagnostics.json", _diagnostics(cfg, chain, summary, {
        "n": data.n, "N": data.N}))


def cmd_ml(cfg: RunConfig, out: Path) -> None:
    N = cfg.int("population_size", required=True)
    ev = read_events(cfg.path("data.events"), N, TimeScale.DISCRETE)
    est = ml_daily_estimate(ev)
    with open(out / "ml.csv", "w", encoding="utf-8") as fh:
        fh.write("day,beta_hat,susceptibles,infectives,new_infections\n")
        for k in range(est.days.size):
            b = est.beta_hat[k]
            fh.write(f"{int(est.days[k])},{'' if np.isnan(b) else repr(float(b))},"
                     f"{int(est.susceptibles[k])},{int(est.infectives[k])},{int(est.new_infections[k])}\n")
    write_json(out / "diagnostics.json", {"command": "ml-estimate", "version": __version__,
                                          "saturated_days": est.days[est.saturated].tolist(),
                                          "config": {k: cfg.resolved[k] for k in sorted(cfg.resolved)}})


def summarize_samples(path, level: float = 0.95) -> PosteriorSummary:
    """Pointwise band of a ``samples.csv`` file."""
    it, day, beta, ch = read_samples(path)
    if it.size == 0:
        raise DataError(f"{path}: no samples")
    key = it if ch is None else it + (int(it.max()) + 1) * ch
    rows, r_idx = np.unique(key, return_inverse=True)
    grid, g_idx = np.unique(day, return_inverse=True)
    mat = np.full((rows.size, grid.size), np.nan)
    mat[r_idx, g_idx] = beta
    med, mean, lo, hi, cnt = band_quantiles(mat, level)
    ess = {}
    return PosteriorSummary(grid, med, mean, lo, hi, cnt, {}, ess, [], level)


def cmd_summarize(cfg: RunConfig, out: Path) -> None:
    path = cfg.path("summarize.samples")
    s = summarize_samples(path, cfg.float("summarize.level", 0.95))
    write_summary(out / "summary.csv", s)
    write_json(out / "diagnostics.json", {"command": "summarize", "version": __version__,
                                          "samples": str(path),
                                          "config": {k: cfg.resolved[k] for k in sorted(cfg.resolved)}})


HANDLERS = {"simulate": cmd_simulate, "fit-parametric": cmd_fit, "fit-discrete-gp": cmd_fit,
            "fit-cts-gp": cmd_fit, "ml-estimate": cmd_ml, "summarize": cmd_summarize}


def run_pipeline(command: str, values: dict[str, str], out: Path, base_dir: Path | None = None) -> RunConfig:
    """Run ``command`` and move its artifacts into ``out`` only on success."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = RunConfig(command, values, base_dir)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        HANDLERS[command](cfg, tmp)
        for f in sorted(tmp.iterdir()):
            f.replace(out / f.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    for k in cfg.unused():
        logger.warning("config key %s was not used by %s", k, command)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epinp", description="Nonparametric inference for SIR infection rates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="output directory (overrides the config key 'out'; default '.')")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg_path = Path(args.config)
        values = read_config(cfg_path)
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            values[k.strip()] = v.strip()
        if args.seed is not None:
            values.pop("mcmc.seed", None)
            values["seed"] = str(args.seed)
        out = Path(args.out) if args.out else Path(values.get("out", "."))
        if not out.is_absolute() and not args.out:
            out = cfg_path.parent / out
        run_pipeline(args.command, values, out, base_dir=cfg_path.parent)
    except EpinpError as exc:
        print(f"epinp: error: {exc}", file=sys.stderr)
        return exc.exit_code
    logger.info("finished in %.1f s", time.perf_counter() - t0)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
