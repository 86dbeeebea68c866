"""How often does a real batch miss part of the mixture?

A batch is *nonuniformly sampled* when at least one mixture component
contributes no sample to it.  This module computes that probability exactly
(inclusion-exclusion over component subsets) and by Monte Carlo, and sweeps
it over batch size and component overlap.

Monte-Carlo work is split into fixed chunks of trials; chunk ``i`` draws
from ``np.random.default_rng([seed, ..., i])``.  The estimate for a given
``(seed, trials)`` is therefore the same whatever the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .mixture import Component, MixtureSpec, sample

MAX_EXACT_K = 20
CHUNK_TRIALS = 50_000
MIN_MC_TRIALS = 1000
DEFAULT_PEAK_FRACTION = 0.01


@dataclass(frozen=True)
class ProbabilityEstimate:
    estimate: float
    std_error: float
    trials: int
    exact: Optional[float] = None

    @classmethod
    def from_hits(cls, hits: int, trials: int, exact: Optional[float] = None) -> "ProbabilityEstimate":
        p = hits / trials
        return cls(p, math.sqrt(p * (1.0 - p) / trials), trials, exact)

    def within(self, sigmas: float = 3.0) -> bool:
        """Whether the exact value lies within ``sigmas`` standard errors.

        With zero observed variance (p-hat of 0 or 1) the binomial floor
        ``1/trials`` is used instead of a zero-width band.
        """
        if self.exact is None:
            raise ValueError("no exact value attached")
        se = max(self.std_error, 1.0 / self.trials)
        return abs(self.estimate - self.exact) <= sigmas * se


@dataclass(frozen=True)
class SamplingScenario:
    spec: MixtureSpec
    batch_size: int
    # when set, the event is "every label falls inside this subset"
    dominance: Optional[tuple[int, ...]] = None
    peak_fraction: float = DEFAULT_PEAK_FRACTION

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.dominance is not None:
            s = tuple(sorted(set(int(k) for k in self.dominance)))
            if not s or len(s) >= self.spec.K or s[0] < 0 or s[-1] >= self.spec.K:
                raise ValueError("dominance must be a proper, non-empty subset of components")
            object.__setattr__(self, "dominance", s)


def _validate_weights(weights: Sequence[float]) -> np.ndarray:
    a = np.asarray(weights, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("weights must be a non-empty list")
    if np.any(a <= 0) or abs(a.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be positive and sum to 1")
    return a


def exact_nonuniform_probability(weights: Sequence[float], b: int) -> float:
    """P(some component gets zero of ``b`` i.i.d. labels), by inclusion-exclusion."""
    a = _validate_weights(weights)
    K = a.size
    if K > MAX_EXACT_K:
        raise ValueError(f"exact enumeration supports K <= {MAX_EXACT_K}, got {K}")
    if b < 1:
        raise ValueError("b must be at least 1")
    if K == 1:
        return 0.0
    # weight of every subset, indexed by bitmask
    subset_w = np.zeros(1 << K)
    sizes = np.zeros(1 << K, dtype=np.int64)
    for k in range(K):
        step = 1 << k
        subset_w[step:2 * step] = subset_w[:step] + a[k]
        sizes[step:2 * step] = sizes[:step] + 1
    masks = slice(1, (1 << K) - 1)  # proper, non-empty subsets
    miss = np.clip(1.0 - subset_w[masks], 0.0, 1.0) ** b
    signs = np.where(sizes[masks] % 2 == 1, 1.0, -1.0)
    return float(min(1.0, max(0.0, math.fsum(signs * miss))))


def exact_dominance_probability(weights: Sequence[float], subset: Sequence[int], b: int) -> float:
    a = _validate_weights(weights)
    return float(a[list(subset)].sum() ** b)


def _chunks(trials: int) -> list[tuple[int, int]]:
    out, start, i = [], 0, 0
    while start < trials:
        n = min(CHUNK_TRIALS, trials - start)
        out.append((i, n))
        start += n
        i += 1
    return out


def _run_chunks(count_hits: Callable[[np.random.Generator, int], int], trials: int,
                key: tuple[int, ...], workers: int) -> int:
    def job(chunk: tuple[int, int]) -> int:
        idx, n = chunk
        return count_hits(np.random.default_rng([*key, idx]), n)

    chunks = _chunks(trials)
    if workers <= 1:
        return sum(job(c) for c in chunks)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(job, chunks))


def mc_nonuniform_probability(scenario: SamplingScenario, trials: int, seed: int = 0,
                              workers: int = 1) -> ProbabilityEstimate:
    """Monte-Carlo frequency of a nonuniformly sampled batch (labels only)."""
    if trials < MIN_MC_TRIALS:
        raise ValueError(f"at least {MIN_MC_TRIALS} trials required")
    alpha = scenario.spec.weights
    b = scenario.batch_size
    if scenario.dominance is not None:
        inside = np.zeros(alpha.size, dtype=bool)
        inside[list(scenario.dominance)] = True

        def count_hits(rng: np.random.Generator, n: int) -> int:
            counts = rng.multinomial(b, alpha, size=n)
            return int(np.count_nonzero(counts[:, ~inside].sum(axis=1) == 0))
        exact = exact_dominance_probability(alpha, scenario.dominance, b)
    else:
        def count_hits(rng: np.random.Generator, n: int) -> int:
            counts = rng.multinomial(b, alpha, size=n)
            return int(np.count_nonzero((counts == 0).any(axis=1)))
        exact = exact_nonuniform_probability(alpha, b) if alpha.size <= MAX_EXACT_K else None
    hits = _run_chunks(count_hits, trials, (seed,), workers)
    return ProbabilityEstimate.from_hits(hits, trials, exact)


def batch_size_sweep(weights: Sequence[float], b_values: Sequence[int], trials: int,
                     seed: int = 0, workers: int = 1) -> list[tuple[int, ProbabilityEstimate]]:
    bs = [int(b) for b in b_values]
    if any(b2 <= b1 for b1, b2 in zip(bs, bs[1:])):
        raise ValueError("b_values must be strictly increasing")
    a = _validate_weights(weights)
    spec = MixtureSpec(tuple(Component(float(w), (0.0, 0.0), 1.0) for w in a))
    return [(b, mc_nonuniform_probability(SamplingScenario(spec, b), trials, seed, workers))
            for b in bs]


def in_overlap(spec: MixtureSpec, x: np.ndarray, peak_fraction: float = DEFAULT_PEAK_FRACTION) -> np.ndarray:
    """Rows where at least two components exceed ``peak_fraction`` of their own peak."""
    d2 = ((x[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=-1)
    # phi_k(x) / phi_k(mu_k) = exp(-d^2 / (2 s^2))
    radius2 = -2.0 * spec.stds ** 2 * math.log(peak_fraction)
    return (d2 <= radius2[None, :]).sum(axis=1) >= 2


def with_component_std(spec: MixtureSpec, std: float) -> MixtureSpec:
    return MixtureSpec(tuple(replace(c, std=float(std)) for c in spec.components))


def overlap_sweep(base_spec: MixtureSpec, stds: Sequence[float], b: int, trials: int,
                  seed: int = 0, peak_fraction: float = DEFAULT_PEAK_FRACTION,
                  workers: int = 1) -> list[tuple[float, ProbabilityEstimate]]:
    """P(no sample of a size-``b`` batch lands in an overlap region) per std."""
    values = [float(s) for s in stds]
    if any(s <= 0 for s in values) or any(s2 <= s1 for s1, s2 in zip(values, values[1:])):
        raise ValueError("stds must be positive and strictly increasing")
    if trials < 1:
        raise ValueError("trials must be positive")
    out = []
    for j, std in enumerate(values):
        spec = with_component_std(base_spec, std)

        def count_hits(rng: np.random.Generator, n: int, spec=spec) -> int:
            hits = 0
            # bound memory: at most ~1e6 points per draw
            per = max(1, 1_000_000 // b)
            done = 0
            while done < n:
                m = min(per, n - done)
                x = sample(spec, m * b, rng).samples
                flags = in_overlap(spec, x, peak_fraction).reshape(m, b)
                hits += int(np.count_nonzero(~flags.any(axis=1)))
                done += m
            return hits
        hits = _run_chunks(count_hits, trials, (seed, 1, j), workers)
        out.append((std, ProbabilityEstimate.from_hits(hits, trials)))
    return out
