"""Sample-quality metrics in raw data space: exact Frechet distance
between Gaussian summaries, k-NN precision/recall, and mode coverage."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        self.cov = 0.5 * (cov + cov.T)

    @classmethod
    def from_samples(cls, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] < 2:
            raise ContractError(f"need >= 2 samples for a Gaussian summary, got {x.shape[0]}")
        return cls(x.mean(axis=0), np.cov(x, rowvar=False, ddof=1), x.shape[0])


def _sqrtm_psd(mat):
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a, b):
    """Wasserstein-2 distance squared between two Gaussians:
    ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2))."""
    if a.mean.shape != b.mean.shape:
        raise ContractError(f"dim mismatch: {a.mean.shape} vs {b.mean.shape}")
    dmu = a.mean - b.mean
    sqrt_a = _sqrtm_psd(a.cov)
    inner = sqrt_a @ b.cov @ sqrt_a
    inner = 0.5 * (inner + inner.T)
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    tr_sqrt = np.sqrt(vals).sum()
    val = float(dmu @ dmu + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_sqrt)
    return max(val, 0.0)


@dataclass
class PrSummary:
    precision: float
    recall: float
    k: int


def _kth_nn_radius(points, k, chunk=512):
    """Distance to the k-th nearest other point, per point."""
    n = points.shape[0]
    radii = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d = np.sqrt(((points[lo:hi, None, :] - points[None, :, :]) ** 2).sum(axis=2))
        # row's own zero distance sorts first, so index k skips it
        radii[lo:hi] = np.partition(d, k, axis=1)[:, k]
    return radii


def _fraction_covered(queries, points, radii, chunk=512):
    n = queries.shape[0]
    hits = 0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d = np.sqrt(((queries[lo:hi, None, :] - points[None, :, :]) ** 2).sum(axis=2))
        hits += int((d <= radii[None, :]).any(axis=1).sum())
    return hits / n


def knn_precision_recall(real, fake, k=3):
    """Manifold precision/recall: the fraction of fake (real) points inside
    the union of k-NN balls around the real (fake) set."""
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.shape[0] <= k or fake.shape[0] <= k:
        raise ContractError(f"both sets must exceed k={k} points, got {real.shape[0]} and {fake.shape[0]}")
    real_radii = _kth_nn_radius(real, k)
    fake_radii = _kth_nn_radius(fake, k)
    precision = _fraction_covered(fake, real, real_radii)
    recall = _fraction_covered(real, fake, fake_radii)
    return PrSummary(precision, recall, k)


def mode_coverage(fake, spec, radius=None, min_fraction=0.01):
    """Count mixture modes receiving >= min_fraction of the fake samples
    within ``radius`` (default 3 sigma) of the mode mean."""
    fake = np.asarray(fake, dtype=np.float64)
    means = spec.means()
    if radius is None:
        radius = 3.0 * spec.sigma
    counts = []
    for mu in means:
        if fake.shape[0] == 0:
            counts.append(0)
            continue
        d = np.sqrt(((fake - mu[None, :]) ** 2).sum(axis=1))
        counts.append(int((d <= radius).sum()))
    threshold = min_fraction * fake.shape[0]
    covered = sum(1 for c in counts if fake.shape[0] and c >= max(threshold, 1))
    return covered, counts
