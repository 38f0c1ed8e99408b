"""Independent brute-force verifiers.

Exhaustive grid search over perturbation balls in dimension <= 3,
finite-difference gradient checks, and a certificate verdict built only
from function evaluations: nothing here reads Lipschitz metadata, so a
verified certificate really was checked against the classifier itself.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GridTooLargeError, UnsupportedDimensionError
from .validation import check_norm, check_vector

MAX_GRID_POINTS = 10_000_000
MAX_AXIS_RESOLUTION = 401
BOUNDARY_SLACK = 1e-12
RADIUS_SHRINK = 1e-9
CHUNK = 65536


@dataclass(frozen=True)
class BallGrid:
    """Deterministic grid covering {x : ||x - center||_p <= radius}.

    Odd per-axis resolutions keep the center and the axis-aligned extreme
    points on the grid; l2 balls reuse the l-inf lattice masked to the ball.
    """

    center: np.ndarray
    radius: float
    norm: float
    resolution: int

    def __post_init__(self):
        center = check_vector(self.center, name="grid center")
        if center.size > 3:
            raise UnsupportedDimensionError(f"grid search supports d <= 3, got {center.size}")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        if self.resolution < 1 or self.resolution > MAX_AXIS_RESOLUTION:
            raise ValueError(f"resolution must be in [1, {MAX_AXIS_RESOLUTION}]")
        if self.resolution > 1 and self.resolution % 2 == 0:
            raise ValueError("resolution must be odd so the center stays on the grid")
        if self.resolution ** center.size > MAX_GRID_POINTS:
            raise GridTooLargeError(
                f"{self.resolution}^{center.size} grid points exceed the "
                f"{MAX_GRID_POINTS} budget"
            )
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "norm", check_norm(self.norm))

    @property
    def dim(self) -> int:
        return self.center.size

    def offsets(self) -> np.ndarray:
        """All grid offsets, shape (P, d), every row within the ball."""
        if self.resolution == 1 or self.radius == 0.0:
            return np.zeros((1, self.dim))
        axis = np.linspace(-self.radius, self.radius, self.resolution)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        offsets = np.column_stack([g.ravel() for g in grids])
        if self.norm == 2.0:
            keep = np.linalg.norm(offsets, axis=1) <= self.radius + BOUNDARY_SLACK
            offsets = offsets[keep]
        return offsets

    def points(self) -> np.ndarray:
        return self.center + self.offsets()


def _score_matrix(clf, X: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(clf.predict_proba(X), dtype=np.float64)
    except (AttributeError, NotImplementedError):
        return np.asarray(clf.decision_function(X), dtype=np.float64)


def exhaustive_min_margin(clf, grid: BallGrid, y: int) -> float:
    """Minimum over the grid of score_y - max over other classes.

    Negative means an argmax change exists on the grid.  Scores are the
    classifier's probabilities when it has them, logits otherwise (the sign
    of the margin is the same either way).
    """
    points = grid.points()
    worst = np.inf
    for start in range(0, len(points), CHUNK):
        scores = _score_matrix(clf, points[start : start + CHUNK])
        others = scores.copy()
        others[:, y] = -np.inf
        margins = scores[:, y] - others.max(axis=1)
        worst = min(worst, float(margins.min()))
    return worst


@dataclass(frozen=True)
class Verdict:
    ok: bool
    min_margin: float
    points_checked: int
    counterexample: np.ndarray | None = None


def verify_certificate(mixed, x, cert, resolution: int = 201) -> Verdict:
    """Exhaustively check a certificate's ball for argmax changes.

    The certified radius is shrunk by 1e-9 to keep closed-ball statements
    clear of floating-point boundary effects.  Heuristic (local-estimate)
    certificates are excluded; radius-0 certificates hold trivially.
    """
    if cert.method == "lipschitz_local":
        raise ValueError("local-Lipschitz certificates are heuristic and not oracle-verifiable")
    if not np.isfinite(cert.radius):
        raise ValueError("cannot grid-verify a certificate with unbounded radius")
    if cert.radius <= 0.0:
        return Verdict(True, 0.0, 0)
    x = check_vector(x)
    grid = BallGrid(x, max(cert.radius - RADIUS_SHRINK, 0.0), cert.norm, resolution)
    points = grid.points()
    worst = np.inf
    witness = None
    for start in range(0, len(points), CHUNK):
        block = points[start : start + CHUNK]
        scores = _score_matrix(mixed, block)
        others = scores.copy()
        others[:, cert.y] = -np.inf
        margins = scores[:, cert.y] - others.max(axis=1)
        k = int(np.argmin(margins))
        if margins[k] < worst:
            worst = float(margins[k])
            if worst < 0.0:
                witness = block[k].copy()
    return Verdict(worst >= 0.0, worst, len(points), witness)


def finite_diff_gradient(fn, x, step: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = check_vector(x)
    grad = np.empty_like(x)
    for k in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[k] += step
        lo[k] -= step
        grad[k] = (fn(hi) - fn(lo)) / (2.0 * step)
    return grad
