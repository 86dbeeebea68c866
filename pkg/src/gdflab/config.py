"""Experiment configuration files.

A config is a YAML mapping with four sections plus two scalars::

    schema_version: 1
    mixture: {kind: ring, K: 8, radius: 2.0, std: 0.02, weights: null}
    train:   {...TrainConfig fields...; seed is the base seed}
    eval:    {samples: 2560, quality_sigma: 3.0, smoothing: 1.0e-6, seed: 12345}
    output_dir: runs/ring
    trials: 10

Trial ``i`` trains with seed ``train.seed + i``.  Any key can be replaced
from the command line with a dotted override such as ``train.iterations=1``.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .mixture import MixtureSpec, spec_from_dict
from .trainer import TrainConfig

CONFIG_SCHEMA_VERSION = 1
OUTPUT_ENV = "GDFLAB_OUTPUT_DIR"

MIXTURE_KEYS = {
    "ring": {"kind", "K", "radius", "std", "weights"},
    "components": {"kind", "components"},
}
EVAL_KEYS = {"samples", "quality_sigma", "smoothing", "seed"}
TOP_KEYS = {"schema_version", "mixture", "train", "eval", "output_dir", "trials"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    samples: int = 2560
    quality_sigma: float = 3.0
    smoothing: float = 1e-6
    seed: int = 12345

    def to_dict(self) -> dict:
        return {"samples": self.samples, "quality_sigma": self.quality_sigma,
                "smoothing": self.smoothing, "seed": self.seed}


@dataclass(frozen=True)
class ExperimentConfig:
    mixture: dict = field(default_factory=lambda: {
        "kind": "ring", "K": 8, "radius": 2.0, "std": 0.02, "weights": None})
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: Optional[str] = None
    trials: int = 10

    def mixture_spec(self) -> MixtureSpec:
        return spec_from_dict(self.mixture)

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or "runs")

    def seeds(self) -> list[int]:
        return [self.train.seed + i for i in range(self.trials)]

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "mixture": copy.deepcopy(self.mixture),
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
            "output_dir": self.output_dir,
            "trials": self.trials,
        }


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}" if where else f"unknown key {unknown[0]}")


def from_dict(raw: Any) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _check_keys(raw, TOP_KEYS, "")
    version = raw.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    base = ExperimentConfig()

    mixture = {**base.mixture, **(raw.get("mixture") or {})}
    kind = mixture.get("kind")
    if kind not in MIXTURE_KEYS:
        raise ConfigError(f"mixture.kind: unknown kind {kind!r}")
    if kind == "components":
        mixture = {k: v for k, v in mixture.items() if k in MIXTURE_KEYS["components"]}
    _check_keys(mixture, MIXTURE_KEYS[kind], "mixture")

    train_raw = raw.get("train") or {}
    if not isinstance(train_raw, dict):
        raise ConfigError("train must be a mapping")
    _check_keys(train_raw, set(TrainConfig.__dataclass_fields__), "train")
    eval_raw = raw.get("eval") or {}
    _check_keys(eval_raw, EVAL_KEYS, "eval")

    try:
        train = TrainConfig.from_dict(train_raw)
        ev = EvalConfig(**{**base.eval.to_dict(), **eval_raw})
        cfg = ExperimentConfig(
            mixture=mixture, train=train, eval=ev,
            output_dir=raw.get("output_dir"), trials=int(raw.get("trials", base.trials)),
        )
        cfg.mixture_spec()
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.trials < 1:
        raise ConfigError("trials must be at least 1")
    if ev.samples < 1 or not ev.quality_sigma > 0 or not ev.smoothing > 0:
        raise ConfigError("eval.samples, eval.quality_sigma and eval.smoothing must be positive")
    return cfg


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Set ``section.key=value`` pairs; values are parsed as YAML scalars."""
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key}: {p} is not a section")
        node[parts[-1]] = _scalar(text)
    return out


def _scalar(text: str) -> Any:
    value = yaml.safe_load(text)
    if isinstance(value, str):
        # YAML 1.1 reads "1e-3" as a string; accept it as a number
        try:
            return float(value)
        except ValueError:
            pass
    return value


def load(path: Optional[Path], overrides: list[str] = ()) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return from_dict(apply_overrides(raw, list(overrides)))


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def default_config_text() -> str:
    return dumps(ExperimentConfig(output_dir="runs/ring"))
