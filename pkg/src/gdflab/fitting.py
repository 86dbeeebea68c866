"""Distribution-fitting penalties and the statistics they match.

The global variant (GDF) pulls per-dimension mean and std of a generated
batch toward fixed statistics of the whole real distribution.  The local
variant (LDF) uses running statistics of every real batch drawn so far.
Both penalties are ``(||mu_g - mu_t||_1 + ||sigma_g - sigma_t||_1) / n``.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal, Optional, Sequence, Union

import numpy as np

from . import autodiff as ad
from .autodiff import DEFAULT_STD_EPS, Node

if TYPE_CHECKING:
    from .mixture import MixtureSpec

# count recorded for statistics computed analytically rather than from samples
EXACT_COUNT = 2 ** 53
FEASIBILITY_TOL = 1e-9
VARIANCE_ROUNDING = 64 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class StatsSnapshot:
    mean: np.ndarray
    std: np.ndarray
    count: int

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        std = np.atleast_1d(np.asarray(self.std, dtype=np.float64))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        if mean.shape != std.shape:
            raise ValueError("mean and std must have the same shape")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise ValueError("statistics must be finite")
        if np.any(std < 0):
            raise ValueError("std must be non-negative")
        if self.count < 1:
            raise ValueError("count must be at least 1")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "count": int(self.count)}

    @classmethod
    def from_dict(cls, d: dict) -> "StatsSnapshot":
        return cls(np.array(d["mean"]), np.array(d["std"]), int(d["count"]))


@dataclass
class RunningStats:
    """Count, per-dimension sum and sum of squares of every row seen."""

    dim: int
    count: int = 0
    sum: np.ndarray = field(default=None)
    sum_sq: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sum is None:
            self.sum = np.zeros(self.dim)
        if self.sum_sq is None:
            self.sum_sq = np.zeros(self.dim)

    def copy(self) -> "RunningStats":
        return RunningStats(self.dim, self.count, self.sum.copy(), self.sum_sq.copy())


def running_update(acc: RunningStats, batch: np.ndarray) -> RunningStats:
    """Fold a (b, n) batch into ``acc`` in place and return it."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a non-empty 2D array")
    if x.shape[1] != acc.dim:
        raise ValueError(f"batch has {x.shape[1]} columns, accumulator has {acc.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("batch contains non-finite values")
    acc.count += x.shape[0]
    acc.sum += x.sum(axis=0)
    acc.sum_sq += (x * x).sum(axis=0)
    return acc


def snapshot(acc: RunningStats) -> StatsSnapshot:
    if acc.count < 2:
        raise ValueError(f"snapshot needs at least 2 samples, have {acc.count}")
    mean = acc.sum / acc.count
    second = acc.sum_sq / acc.count
    var = second - mean * mean
    # differences within rounding noise of the second moment are treated as zero
    var[var <= VARIANCE_ROUNDING * second] = 0.0
    return StatsSnapshot(mean, np.sqrt(var), acc.count)


@dataclass
class PenaltyMode:
    """Which distribution-fitting penalty, its target, and its weight."""

    kind: Literal["none", "gdf", "ldf"] = "none"
    weight: float = 1.0
    target: Optional[StatsSnapshot] = None
    accumulator: Optional[RunningStats] = None

    def __post_init__(self):
        if self.kind not in ("none", "gdf", "ldf"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("penalty weight must be finite and non-negative")
        if self.kind == "gdf":
            if self.target is None or self.target.count < 2:
                raise ValueError("GDF needs a target snapshot with count >= 2")
        if self.kind == "ldf" and self.accumulator is None:
            raise ValueError("LDF needs a running accumulator")

    @classmethod
    def none(cls) -> "PenaltyMode":
        return cls("none", 1.0)

    @classmethod
    def gdf(cls, target: StatsSnapshot, weight: float = 1.0) -> "PenaltyMode":
        return cls("gdf", weight, target=target)

    @classmethod
    def ldf(cls, dim: int = 2, weight: float = 1.0) -> "PenaltyMode":
        return cls("ldf", weight, accumulator=RunningStats(dim))

    def current_target(self) -> Optional[StatsSnapshot]:
        if self.kind == "gdf":
            return self.target
        if self.kind == "ldf":
            return snapshot(self.accumulator)
        return None


def penalty(generated: Node, mode: PenaltyMode, epsilon: float = DEFAULT_STD_EPS) -> Node:
    """Unweighted fitting penalty of a generated batch, as a 1x1 node.

    Mode ``none`` yields a constant zero.  The target statistics enter as
    constants, so no gradient reaches the accumulator or the real stats.
    """
    if mode.kind == "none":
        return ad.constant(0.0)
    b, n = generated.shape
    if b < 2:
        raise ValueError(f"penalty needs a batch of at least 2, got {b}")
    target = mode.current_target()
    if target.dim != n:
        raise ValueError(f"target has {target.dim} dimensions, batch has {n}")
    mu_t = ad.constant(target.mean.reshape(1, n))
    sd_t = ad.constant(target.std.reshape(1, n))
    mu_gap = ad.abs(ad.sub(ad.mean_rows(generated), mu_t))
    sd_gap = ad.abs(ad.sub(ad.std_rows(generated, epsilon), sd_t))
    return ad.scale(ad.add(ad.sum_all(mu_gap), ad.sum_all(sd_gap)), 1.0 / n)


def penalty_value(batch: np.ndarray, target: StatsSnapshot, epsilon: float = DEFAULT_STD_EPS) -> float:
    """Same quantity as :func:`penalty` computed directly on arrays."""
    x = np.asarray(batch, dtype=np.float64)
    mu = x.mean(axis=0)
    sd = np.sqrt(x.var(axis=0) + epsilon)
    n = x.shape[1]
    return float((np.abs(mu - target.mean).sum() + np.abs(sd - target.std).sum()) / n)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    gap: float

    def __str__(self) -> str:
        return "Feasible" if self.feasible else f"Infeasible(gap={self.gap:.17g})"


def collapse_feasibility(spec: "MixtureSpec", sampled_weights: Sequence[float],
                         tol: float = FEASIBILITY_TOL) -> Feasibility:
    """Can a collapsed batch weighting ``beta`` still match the real mean?

    ``beta`` must be non-negative, sum to 1 and give zero weight to at least
    one component.  Feasible means mean matching alone cannot rule out the
    collapse; the gap is ``||sum alpha_k mu_k - sum beta_k mu_k||_1``.
    """
    beta = np.asarray(sampled_weights, dtype=np.float64)
    alpha = spec.weights
    if beta.shape != alpha.shape:
        raise ValueError(f"expected {alpha.size} sampled weights, got {beta.size}")
    if np.any(~np.isfinite(beta)) or np.any(beta < 0):
        raise ValueError("sampled weights must be finite and non-negative")
    if abs(beta.sum() - 1.0) > 1e-9:
        raise ValueError(f"sampled weights sum to {beta.sum()!r}, not 1")
    if not np.any((beta == 0) & (alpha > 0)):
        raise ValueError("sampled weights do not describe a collapse: no component is missed")
    diff = [math.fsum((alpha - beta) * spec.centers[:, j]) for j in range(spec.centers.shape[1])]
    gap = math.fsum(abs(d) for d in diff)
    return Feasibility(gap <= tol, gap)
