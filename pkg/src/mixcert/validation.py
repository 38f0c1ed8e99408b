"""Input validation helpers used by the estimator layer and the CLI."""

import numpy as np

PROBABILITY_SUM_TOL = 1e-9


def check_matrix(X, expected_dim: int | None = None, name: str = "X") -> np.ndarray:
    """Coerce X to a finite float64 2-D array, optionally checking its width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    if expected_dim is not None and X.shape[1] != expected_dim:
        raise ValueError(f"{name} has {X.shape[1]} features, expected {expected_dim}")
    return X


def check_vector(x, expected_dim: int | None = None, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    if expected_dim is not None and x.shape[0] != expected_dim:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {expected_dim}")
    return x


def check_labels(y, class_count: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        rounded = np.rint(np.asarray(y, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(y, dtype=np.float64)):
            raise ValueError(f"{name} must contain integer class labels")
        y = rounded.astype(np.int64)
    y = y.astype(np.int64)
    if y.size and y.min() < 0:
        raise ValueError(f"{name} contains negative labels")
    if class_count is not None and y.size and y.max() >= class_count:
        raise ValueError(f"{name} contains label {y.max()} >= class count {class_count}")
    return y


def check_probability_vector(p, name: str = "probabilities") -> np.ndarray:
    """Validate a single probability vector: entries in [0, 1], summing to 1."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {p.shape}")
    if p.size < 2:
        raise ValueError(f"{name} needs at least two classes")
    if np.any(p < -PROBABILITY_SUM_TOL) or np.any(p > 1.0 + PROBABILITY_SUM_TOL):
        raise ValueError(f"{name} has entries outside [0, 1]")
    if abs(float(p.sum()) - 1.0) > PROBABILITY_SUM_TOL:
        raise ValueError(f"{name} sums to {p.sum()!r}, expected 1 within {PROBABILITY_SUM_TOL}")
    return p


def check_norm(p) -> float:
    """Accept 2, "2", inf, "inf" and return the norm as a float (2.0 or inf)."""
    if isinstance(p, str):
        if p in ("inf", "Inf", "linf"):
            return float("inf")
        if p == "2" or p == "l2":
            return 2.0
        raise ValueError(f"unsupported norm {p!r}; use 2 or inf")
    p = float(p)
    if p == 2.0 or p == float("inf"):
        return p
    raise ValueError(f"unsupported norm {p!r}; use 2 or inf")
