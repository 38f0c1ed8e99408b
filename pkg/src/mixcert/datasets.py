"""Synthetic dataset generation and CSV ingestion.

Toy stand-ins for image data: two interleaved half-circles and isotropic
Gaussian blobs, both deterministic per seed, plus a plain CSV format
(label, x_1, ..., x_d) for external data.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError
from .validation import check_labels, check_matrix


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # (n, d)
    y: np.ndarray  # (n,) integer labels in [0, class_count)
    class_count: int
    split: str = "train"
    seed: int = 0
    clip_box: tuple[float, float] | None = None  # optional valid-input box

    def __post_init__(self):
        X = check_matrix(self.X, name="dataset inputs")
        y = check_labels(self.y, self.class_count, name="dataset labels")
        if len(X) != len(y):
            raise ValueError(f"{len(X)} inputs but {len(y)} labels")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]


def make_two_moons(n: int, noise: float = 0.0, seed: int = 0, split: str = "train") -> Dataset:
    """Two interleaved half-circles in the plane, n/2 points per class.

    With noise=0 the points sit exactly on the canonical arcs; Gaussian
    jitter with standard deviation `noise` is added otherwise.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be an even number >= 2, got {n}")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    X = np.vstack([outer, inner])
    if noise > 0:
        rng = np.random.default_rng(seed)
        X = X + rng.normal(0.0, noise, size=X.shape)
    y = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    return Dataset(X, y, class_count=2, split=split, seed=seed)


def make_gaussian_blobs(
    class_count: int, n: int, means, noise: float = 1.0, seed: int = 0, split: str = "train"
) -> Dataset:
    """Isotropic Gaussian blob per class; n must divide evenly by class_count."""
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 2 or means.shape[0] != class_count:
        raise ValueError(f"means must have shape ({class_count}, d), got {means.shape}")
    if n < class_count or n % class_count != 0:
        raise ValueError(f"n={n} must be a positive multiple of class_count={class_count}")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    per = n // class_count
    rng = np.random.default_rng(seed)
    parts, labels = [], []
    for k in range(class_count):
        if noise > 0:
            offsets = noise * rng.normal(0.0, 1.0, size=(per, means.shape[1]))
        else:
            offsets = np.zeros((per, means.shape[1]))
        parts.append(means[k] + offsets)
        labels.append(np.full(per, k, dtype=np.int64))
    return Dataset(np.vstack(parts), np.concatenate(labels), class_count, split=split, seed=seed)


def save_csv_dataset(dataset: Dataset, path) -> None:
    """Rows are `label, x_1, ..., x_d` with round-trip-exact floats."""
    with open(path, "w", encoding="ascii") as fh:
        for label, row in zip(dataset.y.tolist(), dataset.X.tolist()):
            fh.write(",".join([str(label)] + [repr(v) for v in row]) + "\n")


def load_csv_dataset(
    path, class_count: int, split: str = "test", seed: int = 0
) -> Dataset:
    """Parse `label, x_1, ..., x_d` rows; malformed rows name their line."""
    rows, labels = [], []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
                if width < 2:
                    raise DatasetFormatError("rows need a label and at least one feature", lineno)
            elif len(fields) != width:
                raise DatasetFormatError(
                    f"row has {len(fields)} fields, expected {width}", lineno
                )
            try:
                label = int(fields[0])
                values = [float(v) for v in fields[1:]]
            except ValueError as exc:
                raise DatasetFormatError(f"could not parse row: {exc}", lineno) from None
            if label < 0 or label >= class_count:
                raise DatasetFormatError(
                    f"label {label} outside [0, {class_count})", lineno
                )
            labels.append(label)
            rows.append(values)
    if not rows:
        raise DatasetFormatError("file contains no data rows")
    return Dataset(
        np.array(rows), np.array(labels, dtype=np.int64), class_count, split=split, seed=seed
    )
