"""Mode coverage, mode-histogram KL and the optimal-discriminator diagnostic."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .mixture import MixtureSpec, sample

DEFAULT_QUALITY_SIGMA = 3.0
DEFAULT_SMOOTHING = 1e-6
KL_DIRECTION = "generated||real"


@dataclass(frozen=True)
class EvalReport:
    modes_covered: int
    per_mode_counts: list[int]
    # None when no sample passed the quality filter (KL undefined)
    kl_to_real: Optional[float]
    high_quality_fraction: float
    samples_evaluated: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kl_direction"] = KL_DIRECTION
        return d

    def minor_modes_covered(self, weights: np.ndarray) -> int:
        """Covered modes excluding the heaviest component."""
        major = int(np.argmax(weights))
        return sum(1 for k, c in enumerate(self.per_mode_counts) if k != major and c >= 1)


def assign_modes(samples: np.ndarray, spec: MixtureSpec,
                 quality_sigma: float = DEFAULT_QUALITY_SIGMA) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels and high-quality flags (distance <= quality_sigma * s_k).

    Ties go to the lowest component index.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if x.shape[0] < 1 or x.shape[1] != 2:
        raise ValueError("samples must be an (m, 2) array with m >= 1")
    dist = np.sqrt(((x[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=-1))
    labels = dist.argmin(axis=1)
    nearest = dist[np.arange(x.shape[0]), labels]
    quality = nearest <= quality_sigma * spec.stds[labels]
    return labels, quality


def kl_over_modes(per_mode_counts, weights, smoothing: float = DEFAULT_SMOOTHING) -> Optional[float]:
    """``sum_k q_k log(q_k / alpha_k)`` with q the smoothed mode histogram."""
    counts = np.asarray(per_mode_counts, dtype=np.float64)
    alpha = np.asarray(weights, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    if not smoothing > 0:
        raise ValueError("smoothing must be positive")
    total = counts.sum()
    if total == 0:
        return None
    q = counts / total + smoothing
    q /= q.sum()
    return float(max(0.0, np.sum(q * np.log(q / alpha))))


def mode_coverage(labels: np.ndarray, quality: np.ndarray, spec: MixtureSpec,
                  smoothing: float = DEFAULT_SMOOTHING) -> EvalReport:
    counts = np.bincount(labels[quality], minlength=spec.K)
    return EvalReport(
        modes_covered=int(np.count_nonzero(counts)),
        per_mode_counts=[int(c) for c in counts],
        kl_to_real=kl_over_modes(counts, spec.weights, smoothing),
        high_quality_fraction=float(quality.mean()),
        samples_evaluated=int(labels.shape[0]),
    )


def evaluate(samples: np.ndarray, spec: MixtureSpec, quality_sigma: float = DEFAULT_QUALITY_SIGMA,
             smoothing: float = DEFAULT_SMOOTHING) -> EvalReport:
    labels, quality = assign_modes(samples, spec, quality_sigma)
    return mode_coverage(labels, quality, spec, smoothing)


def silverman_bandwidth(x: np.ndarray) -> np.ndarray:
    """Kernel covariance from Silverman's rule: ``(n (d+2) / 4)^(-2/(d+4)) * Cov``."""
    n, d = x.shape
    factor = (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))
    return factor ** 2 * np.atleast_2d(np.cov(x, rowvar=False))


def _gauss_logpdf(x: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """log N(x_i; means_j, covs_j) for every (i, j); covs has shape (J, 2, 2)."""
    inv = np.linalg.inv(covs)
    _, logdet = np.linalg.slogdet(covs)
    diff = x[:, None, :] - means[None, :, :]
    maha = np.einsum("ijk,jkl,ijl->ij", diff, inv, diff)
    return -0.5 * (maha + logdet[None, :] + 2 * np.log(2 * np.pi))


def _logsumexp(a: np.ndarray, axis: int, log_w: Optional[np.ndarray] = None) -> np.ndarray:
    if log_w is not None:
        a = a + log_w
    top = a.max(axis=axis, keepdims=True)
    return (top + np.log(np.exp(a - top).sum(axis=axis, keepdims=True))).squeeze(axis)


@dataclass(frozen=True)
class DiscriminatorDiagnostic:
    values: np.ndarray
    mean: float
    histogram: list[int]
    bin_edges: list[float]

    def to_dict(self) -> dict:
        return {"mean": self.mean, "histogram": self.histogram, "bin_edges": self.bin_edges}


def optimal_d_diagnostic(spec: MixtureSpec, generated: np.ndarray, eval_points: np.ndarray,
                         bins: int = 10) -> DiscriminatorDiagnostic:
    """``D*(x) = p_data(x) / (p_data(x) + p_g(x))`` at each evaluation point.

    ``p_g`` is a Gaussian KDE of the generated dump with Silverman's
    bandwidth ``H``.  ``p_data`` is convolved with the same kernel (each
    component covariance becomes ``s_k^2 I + H``) so that both densities
    carry identical smoothing and the ratio is 1/2 when ``p_g = p_data``.
    """
    g = np.asarray(generated, dtype=np.float64)
    if g.ndim != 2 or g.shape[1] != 2 or g.shape[0] < 100:
        raise ValueError("need at least 100 generated 2D samples")
    if np.all(g == g[0]):
        raise ValueError("degenerate generated dump: all samples identical")
    H = silverman_bandwidth(g)
    if np.linalg.det(H) <= 1e-300:
        H = H + np.eye(2) * max(1e-12, np.trace(H) * 1e-6)
    x = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))

    log_pg = _logsumexp(_gauss_logpdf(x, g, np.broadcast_to(H, (g.shape[0], 2, 2))), axis=1) - np.log(g.shape[0])
    data_covs = spec.stds[:, None, None] ** 2 * np.eye(2)[None] + H[None]
    log_pd = _logsumexp(_gauss_logpdf(x, spec.centers, data_covs), axis=1, log_w=np.log(spec.weights))
    values = 1.0 / (1.0 + np.exp(log_pg - log_pd))
    hist, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return DiscriminatorDiagnostic(values, float(values.mean()), hist.tolist(), edges.tolist())


def d_star_on_real(spec: MixtureSpec, generated: np.ndarray, n_points: int = 1000,
                   seed: int = 0) -> DiscriminatorDiagnostic:
    pts = sample(spec, n_points, np.random.default_rng(seed)).samples
    return optimal_d_diagnostic(spec, generated, pts)
