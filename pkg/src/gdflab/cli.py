"""Command-line entry point: ``gdflab train|eval|simulate-sampling|check-collapse``.

Exit codes: 0 success, 2 usage or config error, 3 numerical failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import config as cfgmod
from . import io
from .experiment import run_experiment
from .fitting import collapse_feasibility
from .metrics import evaluate
from .mixture import ring_spec
from .theory import batch_size_sweep, overlap_sweep
from .trainer import TrainingDiverged

EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _fail(msg: str, code: int = EXIT_USAGE):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load(config_path, overrides):
    try:
        return cfgmod.load(Path(config_path) if config_path else None, list(overrides))
    except cfgmod.ConfigError as exc:
        _fail(str(exc))


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        _fail(f"{what}: expected comma-separated numbers, got {text!r}")


@click.group()
def main():
    """Distribution-fitting GAN lab on 2D Gaussian mixtures."""


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML experiment config.")
@click.option("--override", "-o", "overrides", multiple=True, help="Dotted key=value, e.g. train.iterations=1.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(1), help="Parallel trials.")
def train(config_path, overrides, out_dir, jobs):
    """Train every seed and write per-seed artifacts plus aggregate.json."""
    cfg = _load(config_path, overrides)
    out = Path(out_dir) if out_dir else cfg.resolved_output_dir()
    try:
        agg = run_experiment(cfg, out, jobs=jobs)
    except TrainingDiverged as exc:
        _fail(str(exc), EXIT_NUMERIC)
    click.echo(f"wrote {out / 'aggregate.json'}: median modes {agg['median_modes_covered']}, "
               f"median KL {agg['median_kl_to_real']}")


@main.command("eval")
@click.argument("samples_csv", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--override", "-o", "overrides", multiple=True)
@click.option("--iter", "iteration", type=int, default=None, help="Snapshot to evaluate (default: last).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="EvalReport JSON path.")
def eval_cmd(samples_csv, config_path, overrides, iteration, out_path):
    """Evaluate generated samples from a samples CSV (iter,x,y)."""
    cfg = _load(config_path, overrides)
    try:
        groups = io.read_samples_csv(Path(samples_csv))
    except io.SchemaError as exc:
        _fail(str(exc))
    it = max(groups) if iteration is None else iteration
    if it not in groups:
        _fail(f"iteration {it} not in {samples_csv}")
    spec = cfg.mixture_spec()
    report = evaluate(groups[it], spec, cfg.eval.quality_sigma, cfg.eval.smoothing)
    payload = {
        "schema_version": io.SCHEMA_VERSION,
        "kind": "eval_report",
        "source": {"samples_csv": str(samples_csv), "iteration": it},
        "mixture": cfg.mixture,
        **report.to_dict(),
        "minor_modes_covered": report.minor_modes_covered(spec.weights),
        "parameters": cfg.eval.to_dict(),
    }
    text = io.dumps_json(payload)
    click.echo(text, nl=False)
    io.atomic_write_text(Path(out_path) if out_path else Path(samples_csv).with_suffix(".eval.json"), text)


@main.command("simulate-sampling")
@click.option("--weights", default=None, help="Comma-separated mixture weights (default: uniform over --K).")
@click.option("--K", "k", default=8, show_default=True, type=click.IntRange(1))
@click.option("--b-list", default="8,16,32,64,128,256,512,1024", show_default=True)
@click.option("--sweep", type=click.Choice(["batch", "overlap"]), default="batch", show_default=True)
@click.option("--stds", default="0.02,0.1,0.25,0.5,1.0,2.0", show_default=True,
              help="Component stds for the overlap sweep.")
@click.option("--radius", default=2.0, show_default=True, type=float)
@click.option("--trials", default=100_000, show_default=True, type=click.IntRange(1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--workers", default=1, show_default=True, type=click.IntRange(1))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def simulate_sampling(weights, k, b_list, sweep, stds, radius, trials, seed, workers, out_path):
    """Exact and Monte-Carlo probability of a batch missing a component."""
    w = _floats(weights, "--weights") if weights else [1.0 / k] * k
    try:
        if sweep == "batch":
            bs = [int(b) for b in _floats(b_list, "--b-list")]
            rows = batch_size_sweep(w, bs, trials, seed, workers)
        else:
            bs = [int(b) for b in _floats(b_list, "--b-list")]
            if len(bs) != 1:
                _fail("--b-list must hold a single batch size for the overlap sweep")
            base = ring_spec(len(w), radius, 1.0, w)
            rows = overlap_sweep(base, _floats(stds, "--stds"), bs[0], trials, seed, workers=workers)
    except ValueError as exc:
        _fail(str(exc))
    io.write_sweep_csv(Path(out_path), rows)
    for p, e in rows:
        exact = "" if e.exact is None else f" exact={e.exact:.6g}"
        click.echo(f"{p}: {e.estimate:.6g} +/- {e.std_error:.2g}{exact}")


@main.command("check-collapse")
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--override", "-o", "overrides", multiple=True)
@click.option("--beta", required=True, help="Comma-separated sampled weights per component.")
@click.option("--tol", default=1e-9, show_default=True, type=float)
def check_collapse(config_path, overrides, beta, tol):
    """Can a collapsed batch weighting still match the real mean?"""
    cfg = _load(config_path, overrides)
    try:
        result = collapse_feasibility(cfg.mixture_spec(), np.array(_floats(beta, "--beta")), tol)
    except ValueError as exc:
        _fail(str(exc))
    click.echo(str(result))


@main.command("default-config")
def default_config():
    """Print the default ring-of-8 experiment config."""
    click.echo(cfgmod.default_config_text(), nl=False)


if __name__ == "__main__":
    main()
