"""Weighted mixtures of isotropic 2D Gaussians.

Random streams use numpy's PCG64 bit generator (``np.random.default_rng``),
so a seed reproduces the same draws on any platform numpy supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fitting import EXACT_COUNT, StatsSnapshot

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Component:
    weight: float
    center: tuple[float, float]
    std: float


@dataclass(frozen=True)
class MixtureSpec:
    components: tuple[Component, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        for c in comps:
            if not (0.0 < c.weight <= 1.0):
                raise ValueError(f"component weight {c.weight} outside (0, 1]")
            if not c.std > 0:
                raise ValueError(f"component std must be positive, got {c.std}")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.center for c in self.components], dtype=np.float64)

    @property
    def stds(self) -> np.ndarray:
        return np.array([c.std for c in self.components])

    def to_dict(self) -> dict:
        return {
            "kind": "components",
            "components": [
                {"weight": c.weight, "center": list(c.center), "std": c.std}
                for c in self.components
            ],
        }


@dataclass(frozen=True)
class BatchDraw:
    samples: np.ndarray
    component_labels: np.ndarray

    def label_frequencies(self, K: int) -> np.ndarray:
        return np.bincount(self.component_labels, minlength=K) / len(self.component_labels)


def _check_weights(weights: Sequence[float], K: int) -> list[float]:
    w = [float(x) for x in weights]
    if len(w) != K:
        raise ValueError(f"expected {K} weights, got {len(w)}")
    if any(x <= 0 for x in w):
        raise ValueError("weights must be positive")
    if abs(sum(w) - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {sum(w)!r}, not 1")
    return w


def ring_spec(K: int = 8, radius: float = 2.0, component_std: float = 0.02,
              weights: Optional[Sequence[float]] = None) -> MixtureSpec:
    """K Gaussians evenly spaced on a circle, the first at (radius, 0)."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if not radius > 0:
        raise ValueError("radius must be positive")
    w = [1.0 / K] * K if weights is None else _check_weights(weights, K)
    angles = 2.0 * np.pi * np.arange(K) / K
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    # snap rounding residue so symmetric rings have an exactly zero centroid
    centers[np.abs(centers) < 1e-14 * radius] = 0.0
    if K % 2 == 0:
        centers[K // 2:] = -centers[:K // 2]
    comps = [Component(w[k], (float(centers[k, 0]), float(centers[k, 1])), float(component_std))
             for k in range(K)]
    return MixtureSpec(tuple(comps))


def extreme_ring_spec(radius: float = 2.0, component_std: float = 0.02) -> MixtureSpec:
    """Ring of 8 with one dominant component (0.86) and seven at 0.02."""
    return ring_spec(8, radius, component_std, [0.86] + [0.02] * 7)


def spec_from_dict(d: dict) -> MixtureSpec:
    kind = d.get("kind", "ring")
    if kind == "ring":
        weights = d.get("weights")
        return ring_spec(int(d.get("K", 8)), float(d.get("radius", 2.0)),
                         float(d.get("std", 0.02)), weights if weights else None)
    if kind == "components":
        return MixtureSpec(tuple(
            Component(float(c["weight"]), (float(c["center"][0]), float(c["center"][1])),
                      float(c["std"]))
            for c in d["components"]
        ))
    raise ValueError(f"unknown mixture kind {kind!r}")


def sample(spec: MixtureSpec, b: int, rng: np.random.Generator) -> BatchDraw:
    if b < 1:
        raise ValueError("batch size must be at least 1")
    labels = rng.choice(spec.K, size=b, p=spec.weights)
    noise = rng.standard_normal((b, 2))
    samples = spec.centers[labels] + noise * spec.stds[labels][:, None]
    return BatchDraw(samples, labels)


def log_density(spec: MixtureSpec, x: np.ndarray) -> np.ndarray:
    """Log-density at each row of ``x`` (shape (m, 2) or (2,))."""
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d2 = ((pts[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=-1)
    var = spec.stds ** 2
    logs = np.log(spec.weights) - np.log(2 * np.pi * var) - d2 / (2 * var)
    top = logs.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(logs - top).sum(axis=1, keepdims=True)))[:, 0]


def density(spec: MixtureSpec, x) -> float | np.ndarray:
    out = np.exp(log_density(spec, x))
    return float(out[0]) if np.ndim(x) == 1 else out


def closed_form_stats(spec: MixtureSpec) -> StatsSnapshot:
    a = spec.weights
    mu_k = spec.centers
    mean = a @ mu_k
    second = a @ (spec.stds[:, None] ** 2 + mu_k ** 2)
    var = np.maximum(second - mean ** 2, 0.0)
    return StatsSnapshot(mean, np.sqrt(var), count=EXACT_COUNT)


def dataset_pass_stats(samples: np.ndarray) -> StatsSnapshot:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("dataset_pass_stats needs at least 2 rows")
    return StatsSnapshot(x.mean(axis=0), x.std(axis=0), count=x.shape[0])
