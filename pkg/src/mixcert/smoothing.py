"""Gaussian smoothing of a base classifier's probabilities.

The smoothed classifier returns the Gaussian-noise expectation of the base
model's probability outputs, estimated either by seeded Monte Carlo or, in
dimension <= 2, by tensorized Gauss-Hermite quadrature for oracle-grade
values.  Noise draw j is a pure function of (seed, j) and is shared across
inputs, so estimates are deterministic, independent of evaluation order and
worker count, and stable under a fixed seed while an attack iterates.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import _rng
from .errors import UnsupportedDimensionError
from .network import FeedForwardModel
from .training import FeedForwardClassifier
from .validation import check_matrix

LOG_FLOOR = 1e-300
QUADRATURE_NODES = 64
QUADRATURE_MAX_DIM = 2


def gaussian_smoothing_lipschitz(sigma: float) -> float:
    """l2 Lipschitz constant sqrt(2 / (pi sigma^2)) of Gaussian-smoothed
    [0, 1]-valued functions with noise scale sigma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return math.sqrt(2.0 / (math.pi * sigma * sigma))


def _as_classifier(base):
    if isinstance(base, FeedForwardModel):
        return FeedForwardClassifier.from_model(base)
    return base


class BoundedProbabilityClassifier(BaseEstimator, ClassifierMixin):
    """Mixes a base classifier's probabilities with the uniform vector:

        p' = (1 - floor * c) p + floor

    so every output stays inside [floor, 1 - (c-1) floor].  Smoothing such a
    base keeps all class probabilities bounded away from 0 and 1, which the
    quantile-based certified radius needs to be numerically trustworthy.
    """

    def __init__(self, base=None, floor=1e-3):
        self.base = base
        self.floor = floor

    def _scale(self, c: int) -> float:
        if not 0.0 < self.floor < 1.0 / c:
            raise ValueError(f"floor must lie in (0, 1/{c})")
        return 1.0 - self.floor * c

    @property
    def classes_(self):
        return _as_classifier(self.base).classes_

    def fit(self, X=None, y=None):
        self._scale(len(self.classes_))
        return self

    def predict_proba(self, X) -> np.ndarray:
        base = _as_classifier(self.base)
        probs = np.asarray(base.predict_proba(X), dtype=np.float64)
        return self._scale(probs.shape[1]) * probs + self.floor

    def decision_function(self, X) -> np.ndarray:
        return np.log(self.predict_proba(X))

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def input_jacobian(self, X, domain: str = "probability") -> np.ndarray:
        base = _as_classifier(self.base)
        jac = self._scale(len(self.classes_)) * np.asarray(
            base.input_jacobian(X, domain="probability")
        )
        if domain == "probability":
            return jac
        if domain == "logit":
            return jac / self.predict_proba(X)[:, :, None]
        raise ValueError(f"unknown domain {domain!r}")


class SmoothedClassifier(BaseEstimator, ClassifierMixin):
    """Soft randomized smoothing: mean of base probabilities under noise.

    Parameters
    ----------
    base : fitted classifier or FeedForwardModel
        Must map inputs to probability vectors via predict_proba.
    sigma : float
        Noise standard deviation (> 0).
    n_samples : int
        Monte Carlo budget N (>= 1).
    seed : int
        Master seed; draw j is derived from (seed, j).
    method : {"mc", "quadrature"}
        Default estimator used by predict/predict_proba.
    """

    def __init__(self, base=None, sigma=0.5, n_samples=1000, seed=0, method="mc"):
        self.base = base
        self.sigma = sigma
        self.n_samples = n_samples
        self.seed = seed
        self.method = method

    def _validate(self):
        if self.base is None:
            raise ValueError("SmoothedClassifier needs a base classifier")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.method not in ("mc", "quadrature"):
            raise ValueError(f"unknown smoothing method {self.method!r}")
        return _as_classifier(self.base)

    def fit(self, X=None, y=None):
        """No-op; the base classifier is assumed pre-trained."""
        self._validate()
        return self

    @property
    def classes_(self):
        return _as_classifier(self.base).classes_

    def predict_proba(self, X, method: str | None = None) -> np.ndarray:
        method = self.method if method is None else method
        if method == "quadrature":
            return smoothed_probs_quadrature(self, X)
        return smoothed_probs_mc(self, X)

    def decision_function(self, X) -> np.ndarray:
        return np.log(np.maximum(self.predict_proba(X), LOG_FLOOR))

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def input_jacobian(self, X, domain: str = "probability") -> np.ndarray:
        """Exact jacobian of the configured estimate itself.

        Monte Carlo: mean of base jacobians over the fixed noise draws (the
        seed pins them, so attacks see a deterministic surface).
        Quadrature: the node-weighted mean, matching predict_proba.
        """
        base = self._validate()
        X = check_matrix(X)
        n, d = X.shape
        if self.method == "quadrature":
            if d > QUADRATURE_MAX_DIM:
                raise UnsupportedDimensionError(
                    f"quadrature smoothing supports d <= {QUADRATURE_MAX_DIM}, got {d}"
                )
            offsets, weights = _hermite_nodes(d)
            points = math.sqrt(2.0) * self.sigma * offsets
        else:
            points = self.sigma * _rng.gaussian_block(self.seed, self.n_samples, d)
            weights = None
        jac = np.empty((n, len(self.classes_), d))
        for i in range(n):
            per_draw = np.asarray(base.input_jacobian(X[i] + points, domain="probability"))
            if weights is None:
                jac[i] = per_draw.mean(axis=0)
            else:
                jac[i] = np.einsum("k,kcd->cd", weights, per_draw)
        if domain == "probability":
            return jac
        if domain == "logit":
            probs = self.predict_proba(X)
            return jac / np.maximum(probs, LOG_FLOOR)[:, :, None]
        raise ValueError(f"unknown domain {domain!r}")


_BATCH_ROWS = 500_000


def smoothed_probs_mc(sc: SmoothedClassifier, X) -> np.ndarray:
    """Seeded Monte Carlo estimate of the smoothed probabilities.

    Column means use exact (fsum) summation, so the result is bit-identical
    no matter how the per-draw evaluations were scheduled.
    """
    base = sc._validate()
    X = check_matrix(X)
    n, d = X.shape
    noise = sc.sigma * _rng.gaussian_block(sc.seed, sc.n_samples, d)
    c = len(sc.classes_)
    out = np.empty((n, c))
    step = max(1, _BATCH_ROWS // sc.n_samples)
    for start in range(0, n, step):
        block = X[start : start + step]
        shifted = (block[:, None, :] + noise[None, :, :]).reshape(-1, d)
        p = np.asarray(base.predict_proba(shifted), dtype=np.float64)
        p = p.reshape(len(block), sc.n_samples, c)
        for i in range(len(block)):
            for k in range(c):
                out[start + i, k] = math.fsum(p[i, :, k].tolist()) / sc.n_samples
    return out


def _hermite_nodes(dim: int):
    nodes, weights = np.polynomial.hermite.hermgauss(QUADRATURE_NODES)
    weights = weights / math.sqrt(math.pi)
    if dim == 1:
        return nodes.reshape(-1, 1), weights
    na, nb = np.meshgrid(nodes, nodes, indexing="ij")
    wa, wb = np.meshgrid(weights, weights, indexing="ij")
    return np.column_stack([na.ravel(), nb.ravel()]), (wa * wb).ravel()


def smoothed_probs_quadrature(sc: SmoothedClassifier, X) -> np.ndarray:
    """Tensorized Gauss-Hermite evaluation of the smoothing expectation.

    64 nodes per axis; only defined for input dimension <= 2.  Absolute
    error is below 1e-6 for smooth bases; hard-threshold bases converge
    slowly (errors up to a few percent near the jump), so oracle-grade use
    assumes a smooth base.
    """
    base = sc._validate()
    X = check_matrix(X)
    n, d = X.shape
    if d > QUADRATURE_MAX_DIM:
        raise UnsupportedDimensionError(
            f"quadrature smoothing supports d <= {QUADRATURE_MAX_DIM}, got {d}"
        )
    offsets, weights = _hermite_nodes(d)
    scaled = math.sqrt(2.0) * sc.sigma * offsets
    c = len(sc.classes_)
    nodes = len(weights)
    out = np.empty((n, c))
    step = max(1, _BATCH_ROWS // nodes)
    for start in range(0, n, step):
        block = X[start : start + step]
        shifted = (block[:, None, :] + scaled[None, :, :]).reshape(-1, d)
        p = np.asarray(base.predict_proba(shifted), dtype=np.float64)
        p = p.reshape(len(block), nodes, c)
        out[start : start + step] = np.einsum("k,ikc->ic", weights, p)
    return out


def degenerate_probability_flags(probs) -> np.ndarray:
    """Boolean (n,) mask of rows where some class probability is exactly 0 or 1.

    Such rows violate the smoothing non-degeneracy assumption the certified
    radius formula relies on.
    """
    probs = np.asarray(probs, dtype=np.float64)
    return np.any((probs == 0.0) | (probs == 1.0), axis=1)
