"""Multi-seed training runs and their on-disk artifacts.

Layout under the output directory::

    seed_<s>/samples.csv       iter,x,y for every snapshot dump
    seed_<s>/report.json       config echo, per-snapshot scalars, stats, eval
    seed_<s>/generator.npz     parameter checkpoints
    seed_<s>/discriminator.npz
    aggregate.json             per-seed metrics and medians/means

Wall-clock figures live under a top-level ``timing`` key, the only part of
any report that changes between identical runs.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .config import ExperimentConfig
from .fitting import StatsSnapshot
from .metrics import EvalReport, d_star_on_real, evaluate
from .mixture import MixtureSpec, closed_form_stats
from .trainer import RunLog, TrainConfig, generate, train


def eval_samples(cfg: ExperimentConfig, log: RunLog) -> np.ndarray:
    rng = np.random.default_rng([cfg.eval.seed, log.config.seed])
    noise = rng.standard_normal((cfg.eval.samples, log.config.noise_dim))
    return generate(log.config.generator, log.generator, noise)


def run_report(cfg: ExperimentConfig, spec: MixtureSpec, log: RunLog, report: EvalReport,
               samples: np.ndarray) -> dict:
    stats = {
        "real_closed_form": closed_form_stats(spec).to_dict(),
        "gdf_target": log.target.to_dict() if log.target else None,
        "ldf_accumulator": log.accumulator.to_dict() if log.accumulator else None,
        "generated_final_dump": log.final_generated.to_dict(),
    }
    try:
        d_star = d_star_on_real(spec, samples, seed=cfg.eval.seed).to_dict()
    except ValueError as exc:
        d_star = {"error": str(exc)}
    return {
        "schema_version": io.SCHEMA_VERSION,
        "kind": "run_report",
        "seed": log.config.seed,
        "config": {**cfg.to_dict(), "train": log.config.to_dict()},
        "snapshots": [
            {"iteration": s.iteration, "loss_d": s.loss_d, "loss_g": s.loss_g, "penalty": s.penalty,
             "d_real_mean": s.d_real_mean, "d_fake_mean": s.d_fake_mean}
            for s in log.snapshots
        ],
        "stats": stats,
        "eval": {**report.to_dict(),
                 "minor_modes_covered": report.minor_modes_covered(spec.weights),
                 "parameters": cfg.eval.to_dict()},
        "optimal_d_diagnostic": d_star,
        "timing": {"wall_clock_s": log.wall_clock_s},
    }


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: Optional[Path]) -> dict:
    """Train and evaluate one seed; write its artifacts when ``out_dir`` is given."""
    spec = cfg.mixture_spec()
    log = train(replace(cfg.train, seed=seed), spec)
    samples = eval_samples(cfg, log)
    report = evaluate(samples, spec, cfg.eval.quality_sigma, cfg.eval.smoothing)
    full = run_report(cfg, spec, log, report, samples)
    if out_dir is not None:
        d = Path(out_dir) / f"seed_{seed}"
        io.write_samples_csv(d / "samples.csv", [(s.iteration, s.samples) for s in log.snapshots])
        io.write_json(d / "report.json", full)
        io.save_checkpoint(d / "generator.npz", log.config.generator, log.generator, seed,
                           log.config.iterations)
        io.save_checkpoint(d / "discriminator.npz", log.config.discriminator, log.discriminator,
                           seed, log.config.iterations)
    return full


def _summary(full: dict) -> dict:
    ev = full["eval"]
    return {
        "seed": full["seed"],
        "modes_covered": ev["modes_covered"],
        "minor_modes_covered": ev["minor_modes_covered"],
        "kl_to_real": ev["kl_to_real"],
        "high_quality_fraction": ev["high_quality_fraction"],
        "per_mode_counts": ev["per_mode_counts"],
        "ldf_accumulator": full["stats"]["ldf_accumulator"],
        "generated_final_dump": full["stats"]["generated_final_dump"],
    }


def _kl_key(v: Optional[float]) -> float:
    return float("inf") if v is None else v


def _median(values: list[Optional[float]]) -> Optional[float]:
    m = statistics.median(_kl_key(v) for v in values)
    return None if m == float("inf") else m


def aggregate(cfg: ExperimentConfig, summaries: list[dict]) -> dict:
    """Order-independent summary across seeds (entries sorted by seed)."""
    entries = sorted(summaries, key=lambda s: s["seed"])
    modes = [e["modes_covered"] for e in entries]
    minor = [e["minor_modes_covered"] for e in entries]
    kls = [e["kl_to_real"] for e in entries]
    K = cfg.mixture_spec().K
    finite_kl = [k for k in kls if k is not None]
    return {
        "schema_version": io.SCHEMA_VERSION,
        "kind": "aggregate",
        "config": cfg.to_dict(),
        "seeds": entries,
        "median_modes_covered": statistics.median(modes),
        "mean_modes_covered": statistics.fmean(modes),
        "seeds_all_modes": sum(1 for m in modes if m == K),
        "median_minor_modes_covered": statistics.median(minor),
        # a seed with no high-quality sample has undefined KL, ranked as infinite
        "median_kl_to_real": _median(kls),
        "mean_kl_to_real": statistics.fmean(finite_kl) if finite_kl else None,
        "seeds_without_kl": sum(1 for k in kls if k is None),
    }


def _run_seed_summary(args) -> dict:
    cfg, seed, out_dir = args
    return _summary(run_seed(cfg, seed, out_dir))


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None, jobs: int = 1) -> dict:
    """Run every seed (optionally in parallel) and write ``aggregate.json``."""
    tasks = [(cfg, seed, out_dir) for seed in cfg.seeds()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_seed_summary, tasks))
    else:
        summaries = [_run_seed_summary(t) for t in tasks]
    agg = aggregate(cfg, summaries)
    if out_dir is not None:
        io.write_json(Path(out_dir) / "aggregate.json", agg)
    return agg
