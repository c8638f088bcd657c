"""Labeled synthetic mixtures and augmentation views.

The default benchmark is a ring of 8 well-separated Gaussians with one
class per mode, so conditional generation quality and mode coverage are
the same question. Class supports must stay >= 6 sigma apart, keeping the
one-label-per-point assumption honest at this scale.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SEPARATION_FACTOR = 6.0


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "ring_mixture"  # ring_mixture | grid_mixture | file
    n_classes: int = 8
    radius: float = 2.0  # circle radius, or grid spacing
    sigma: float = 0.05
    sample_dim: int = 2
    seed: int = 0
    path: str = ""

    def __post_init__(self):
        if self.kind not in ("ring_mixture", "grid_mixture", "file"):
            raise ValidationError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "file":
            if not self.path:
                raise ValidationError("file dataset needs a path")
            return
        if self.n_classes < 1:
            raise ValidationError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.sample_dim != 2:
            raise ValidationError("mixture datasets are 2-dimensional")
        means = self.means()
        if self.n_classes > 1:
            d = _min_pairwise_distance(means)
            if d / self.sigma < SEPARATION_FACTOR:
                raise ValidationError(
                    f"class means too close: min distance {d:.4g} < "
                    f"{SEPARATION_FACTOR} * sigma ({SEPARATION_FACTOR * self.sigma:.4g})"
                )

    def means(self):
        """Per-class mean vectors, shape (n_classes, sample_dim)."""
        if self.kind == "ring_mixture":
            angles = 2.0 * np.pi * np.arange(self.n_classes) / self.n_classes
            return self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        if self.kind == "grid_mixture":
            side = int(np.ceil(np.sqrt(self.n_classes)))
            cells = [(i, j) for i in range(side) for j in range(side)][: self.n_classes]
            grid = np.array(cells, dtype=np.float64) * self.radius
            return grid - grid.mean(axis=0)
        raise ValidationError("file datasets have no analytic means")


@dataclass(frozen=True)
class AugmentSpec:
    jitter_std: float = 0.02
    rotation_max: float = 0.2  # radians
    scale_range: tuple = (0.9, 1.1)

    def __post_init__(self):
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise ValidationError(f"bad scale range {self.scale_range}")
        if self.jitter_std < 0 or self.rotation_max < 0:
            raise ValidationError("jitter and rotation must be non-negative")


def _min_pairwise_distance(means):
    diff = means[:, None, :] - means[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    d[np.diag_indices_from(d)] = np.inf
    return d.min()


def one_hot(labels, n_classes):
    labels = np.asarray(labels)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def sample_labeled(spec, n, rng):
    """Draw n samples: labels uniform over classes, x | c ~ N(mu_c, sigma^2 I).

    Returns (samples, one-hot labels).
    """
    if spec.kind == "file":
        x, labels, n_classes = load_dataset_file(spec.path)
        idx = rng.integers(0, x.shape[0], size=n)
        return x[idx], one_hot(labels[idx], n_classes)
    means = spec.means()
    labels = rng.integers(0, spec.n_classes, size=n)
    x = means[labels] + spec.sigma * rng.standard_normal((n, spec.sample_dim))
    return x, one_hot(labels, spec.n_classes)


def augment(x, spec, rng):
    """Per-sample view: rotate about the origin, scale, add Gaussian jitter."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = x.copy()
    theta = rng.uniform(-spec.rotation_max, spec.rotation_max, size=n)
    cos, sin = np.cos(theta), np.sin(theta)
    x0, x1 = out[:, 0].copy(), out[:, 1].copy()
    out[:, 0] = cos * x0 - sin * x1
    out[:, 1] = sin * x0 + cos * x1
    lo, hi = spec.scale_range
    out *= rng.uniform(lo, hi, size=n)[:, None]
    if spec.jitter_std > 0:
        out += spec.jitter_std * rng.standard_normal(out.shape)
    return out


def load_dataset_file(path):
    """Read a labeled CSV: header ``label,x_0,...,x_{d-1}``, one row per sample."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty dataset file")
    header = lines[0].split(",")
    if header[0] != "label" or len(header) < 2:
        raise ValidationError(f"{path}:1: bad header {lines[0]!r}")
    dim = len(header) - 1
    for j, name in enumerate(header[1:]):
        if name != f"x_{j}":
            raise ValidationError(f"{path}:1: expected column x_{j}, got {name!r}")
    xs, labels = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != dim + 1:
            raise ValidationError(f"{path}:{ln}: expected {dim + 1} fields, got {len(parts)}")
        try:
            label = int(parts[0])
            row = [float(v) for v in parts[1:]]
        except ValueError as e:
            raise ValidationError(f"{path}:{ln}: {e}")
        if label < 0:
            raise ValidationError(f"{path}:{ln}: negative label {label}")
        if not all(np.isfinite(row)):
            raise ValidationError(f"{path}:{ln}: non-finite value")
        labels.append(label)
        xs.append(row)
    if not xs:
        raise ValidationError(f"{path}: no data rows")
    labels = np.array(labels)
    n_classes = int(labels.max()) + 1
    return np.array(xs), labels, n_classes


def export_dataset_file(path, x, labels):
    x = np.asarray(x)
    labels = np.asarray(labels)
    with open(path, "w") as f:
        f.write("label," + ",".join(f"x_{j}" for j in range(x.shape[1])) + "\n")
        for label, row in zip(labels, x):
            f.write(f"{int(label)}," + ",".join(repr(float(v)) for v in row) + "\n")
