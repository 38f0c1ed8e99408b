"""Certified-robustness computations for the mixed classifier.

Given the robust base h's probabilities at a point and a bound on how fast
they can change, these routines compute how large a perturbation provably
cannot change the mixture's prediction: a margin condition links the
mixing weight alpha to the confidence gap h must keep, a Lipschitz bound
turns that gap into a radius valid for any l-p norm, and for Gaussian-
smoothed h a tighter l2 radius follows from the normal quantile function.
Radii that come out non-positive are clamped to 0 and flagged.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .attacks import AttackSpec, pgd_trajectory
from .errors import DegenerateProbabilityError, NotCertifiableError
from .network import global_lipschitz_upper
from .smoothing import (
    SmoothedClassifier,
    gaussian_smoothing_lipschitz,
    smoothed_probs_mc,
    smoothed_probs_quadrature,
)
from .training import FeedForwardClassifier
from .validation import check_norm, check_probability_vector, check_vector

METHODS = ("lipschitz_global", "lipschitz_local", "rs")


def required_margin(alpha: float) -> float:
    """Confidence gap h must maintain for the mixture to track h's argmax.

    Returns (1 - alpha) / alpha, which lies in [0, 1] for alpha in [1/2, 1].
    Below 1/2 the accurate base can always overrule h, so no margin helps.
    """
    if alpha > 1.0:
        raise ValueError("alpha must lie in [1/2, 1]")
    if alpha < 0.5:
        raise NotCertifiableError(
            f"alpha={alpha} puts the majority weight on the non-robust base; "
            "no non-trivial certificate exists"
        )
    return (1.0 - alpha) / alpha


# --- inverse normal CDF -------------------------------------------------

# Acklam's rational approximation coefficients.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def standard_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def inverse_normal_cdf(q: float) -> float:
    """Standard normal quantile: |Phi(result) - q| <= 1e-9 on (0, 1).

    Acklam's rational approximation polished by one Newton step on Phi.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile argument must lie in (0, 1), got {q}")
    if q < _P_LOW:
        r = math.sqrt(-2.0 * math.log(q))
        z = (((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / (
            (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        )
    elif q <= 1.0 - _P_LOW:
        r = q - 0.5
        s = r * r
        z = (((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]) * r / (
            ((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1.0
        )
    else:
        r = math.sqrt(-2.0 * math.log(1.0 - q))
        z = -(((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]) / (
            (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        )
    density = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if density > 1e-200:
        z -= (standard_normal_cdf(z) - q) / density
    return z


# --- certificates -------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """Per-input certification record."""

    index: int
    y: int
    y_prime: int
    margin: float
    radius: float
    method: str
    norm: float
    alpha: float
    label: int | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.radius < 0:
            raise ValueError("certificate radius must be >= 0")
        if not 0.0 <= self.margin <= 1.0:
            raise ValueError("margin must lie in [0, 1]")
        if self.method == "rs" and self.norm != 2.0:
            raise ValueError("smoothing certificates are l2 only")

    @property
    def certifiable(self) -> bool:
        return "not_certifiable" not in self.flags and "mispredicted" not in self.flags


@dataclass(frozen=True)
class LipschitzProfile:
    """Per-class Lipschitz constants, either certified or locally estimated."""

    values: np.ndarray  # (c,)
    scope: str  # global_bound | local_estimate
    norm: float
    center: np.ndarray | None = None  # local estimates only
    ball_radius: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("Lipschitz constants must be a 1-D array of finite values >= 0")
        if self.scope not in ("global_bound", "local_estimate"):
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.scope == "local_estimate" and (self.center is None or self.ball_radius is None):
            raise ValueError("local estimates must record their center and ball radius")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "norm", check_norm(self.norm))


def _top_two(probs: np.ndarray) -> tuple[int, int]:
    y = int(np.argmax(probs))
    rest = probs.copy()
    rest[y] = -np.inf
    return y, int(np.argmax(rest))


def lipschitz_radius(
    h_probs_at_x,
    profile: LipschitzProfile,
    alpha: float,
    index: int = 0,
    label: int | None = None,
) -> Certificate:
    """Certified radius from per-class Lipschitz constants.

    radius = min over i != y of
        (alpha (h_y - h_i) + alpha - 1) / (alpha (L_y + L_i)),
    clamped at 0.  A zero denominator gives +inf when the numerator is
    positive and 0 otherwise (the limit of the expression).  Local-estimate
    profiles yield heuristic certificates valid only inside their ball.
    """
    required_margin(alpha)  # validates alpha
    probs = check_probability_vector(h_probs_at_x)
    y, y_prime = _top_two(probs)
    margin = float(probs[y] - probs[y_prime])

    best = math.inf
    for i in range(len(probs)):
        if i == y:
            continue
        num = alpha * (probs[y] - probs[i]) + alpha - 1.0
        den = alpha * (profile.values[y] + profile.values[i])
        if den == 0.0:
            ratio = math.inf if num > 0 else 0.0
        else:
            ratio = num / den
        best = min(best, ratio)

    flags: list[str] = []
    radius = max(0.0, best)
    if best <= 0.0:
        flags.append("not_certifiable")
    if profile.scope == "local_estimate":
        method = "lipschitz_local"
        flags.append("heuristic")
        flags.append(f"local_ball={profile.ball_radius:g}")
        radius = min(radius, profile.ball_radius)
    else:
        method = "lipschitz_global"
    return Certificate(
        index, y, y_prime, margin, radius, method, profile.norm, alpha, label, tuple(flags)
    )


def rs_radius(
    h_probs_at_x,
    sigma: float,
    alpha: float,
    index: int = 0,
    label: int | None = None,
    extra_flags: tuple[str, ...] = (),
    deviation: float = 0.0,
) -> Certificate:
    """l2 certified radius for a Gaussian-smoothed robust base:

        (sigma / 2) (Phi^-1(alpha h_y) - Phi^-1(alpha h_y' + 1 - alpha)).

    Both quantile arguments must be interior; a value of exactly 0 or 1
    means the smoothing non-degeneracy assumption failed.  A positive
    `deviation` is subtracted from h_y and added to h_y' first (the
    conservative mode the Monte Carlo estimator can ask for); certificates
    that lose all probability mass that way come back with radius 0 rather
    than an error.
    """
    required_margin(alpha)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if deviation < 0:
        raise ValueError("deviation must be >= 0")
    probs = check_probability_vector(h_probs_at_x)
    y, y_prime = _top_two(probs)
    margin = float(probs[y] - probs[y_prime])
    q_top = alpha * (probs[y] - deviation)
    q_second = alpha * (probs[y_prime] + deviation) + 1.0 - alpha
    flags = list(extra_flags)
    if deviation > 0.0:
        flags.append(f"conservative_dev={deviation:.3g}")
        q_top = min(max(q_top, 1e-12), 1.0 - 1e-12)
        q_second = min(max(q_second, 1e-12), 1.0 - 1e-12)
    elif not (0.0 < q_top < 1.0 and 0.0 < q_second < 1.0):
        raise DegenerateProbabilityError(
            f"alpha-scaled probabilities ({q_top}, {q_second}) are not interior; "
            "the smoothed base violates the non-degeneracy assumption"
        )
    value = 0.5 * sigma * (inverse_normal_cdf(q_top) - inverse_normal_cdf(q_second))
    if value <= 0.0:
        flags.append("not_certifiable")
    return Certificate(
        index, y, y_prime, margin, max(0.0, value), "rs", 2.0, alpha, label, tuple(flags)
    )


def estimate_robust_margin(h, x, spec: AttackSpec) -> tuple[int, float]:
    """Empirical lower-bound witness for h's margin under attack.

    Runs PGD against h's clean prediction and reports the smallest
    top-minus-runner-up probability gap seen along the trajectory, floored
    at 0.  This is evidence, not a certificate.
    """
    x = check_vector(x)
    probs = np.asarray(h.predict_proba(x.reshape(1, -1)))[0]
    y = int(np.argmax(probs))
    worst = math.inf
    for point in pgd_trajectory(h, x.reshape(1, -1), np.array([y]), spec):
        p = np.asarray(h.predict_proba(point))[0]
        rest = np.delete(p, y)
        worst = min(worst, float(p[y] - rest.max()))
    return y, max(0.0, worst)


def local_lipschitz_estimate(h, x, eps: float, p, spec: AttackSpec) -> LipschitzProfile:
    """PGD-style per-class estimate of |h_i(x+d) - h_i(x)| / eps over the ball.

    An empirical under-estimate of the true local constant; certificates
    built from it are labeled heuristic.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = check_norm(p)
    x = check_vector(x)
    base = np.asarray(h.predict_proba(x.reshape(1, -1)))[0]
    c = len(base)
    eta = spec.resolved_step_size() if spec.step_size is not None else eps / 4.0
    values = np.zeros(c)
    for i in range(c):
        for sign in (1.0, -1.0):
            delta = np.zeros_like(x)
            best = 0.0
            for _ in range(max(spec.steps, 1)):
                probe = (x + delta).reshape(1, -1)
                grad = sign * np.asarray(h.input_jacobian(probe, domain="probability"))[0, i]
                gnorm = np.linalg.norm(grad)
                if gnorm == 0.0:
                    break
                step = eta * np.sign(grad) if p == float("inf") else eta * grad / gnorm
                delta = delta + step
                if p == float("inf"):
                    delta = np.clip(delta, -eps, eps)
                else:
                    norm = np.linalg.norm(delta)
                    if norm > eps:
                        delta *= eps / norm
                moved = float(
                    sign * (np.asarray(h.predict_proba((x + delta).reshape(1, -1)))[0, i] - base[i])
                )
                best = max(best, moved)
            values[i] = max(values[i], best / eps)
    return LipschitzProfile(values, "local_estimate", p, center=x, ball_radius=eps)


def smoothing_profile(sc: SmoothedClassifier, class_count: int) -> LipschitzProfile:
    """Certified l2 profile for a Gaussian-smoothed base."""
    value = gaussian_smoothing_lipschitz(sc.sigma)
    return LipschitzProfile(np.full(class_count, value), "global_bound", 2.0)


def _h_probabilities(h, X, estimator: str) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(h, SmoothedClassifier):
        if estimator == "quadrature":
            return smoothed_probs_quadrature(h, X), ("estimator=quadrature",)
        return smoothed_probs_mc(h, X), ("estimator=mc",)
    return np.asarray(h.predict_proba(X), dtype=np.float64), ()


def hoeffding_deviation(beta: float, n_samples: int) -> float:
    """Two-sided Hoeffding deviation sqrt(ln(2/beta) / (2 N)) for a mean of
    N bounded samples."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / beta) / (2.0 * n_samples))


def certify_dataset(
    mixed,
    dataset,
    method: str,
    norm=None,
    estimator: str = "mc",
    local_eps: float = 0.25,
    local_spec: AttackSpec | None = None,
    conservative_beta: float | None = None,
    workers: int = 1,
) -> list[Certificate]:
    """Certificates for every input of a dataset.

    Inputs where h mispredicts get radius 0 and a "mispredicted" flag; the
    rest are certified by the requested method.  `norm` applies to the
    Lipschitz methods (smoothing certificates are l2 by definition).  With
    `conservative_beta` set, Monte-Carlo-fed smoothing certificates deflate
    the estimated probabilities by a Hoeffding deviation first.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; use one of {METHODS}")
    mixed._validate()
    if mixed.formulation != "alpha":
        raise ValueError("certification is defined for the alpha formulation")
    alpha = mixed.alpha_view
    h = mixed.h
    smoothed = isinstance(h, SmoothedClassifier)
    if method == "rs" and not smoothed:
        raise ValueError("method 'rs' needs h to be a SmoothedClassifier")
    p = 2.0 if norm is None else check_norm(norm)

    probs, estimator_flags = _h_probabilities(h, dataset.X, estimator)

    profile = None
    if method == "lipschitz_global":
        if smoothed:
            if p != 2.0:
                raise ValueError("smoothing only certifies the l2 norm")
            profile = smoothing_profile(h, dataset.class_count)
        else:
            bound = global_lipschitz_upper(_model_of(h), p, domain="probability")
            profile = LipschitzProfile(bound.values, "global_bound", p)

    def one(i: int) -> Certificate:
        row = probs[i]
        y, y_prime = _top_two(row)
        label = int(dataset.y[i])
        if y != label:
            return Certificate(
                i, y, y_prime, float(row[y] - row[y_prime]), 0.0,
                method, 2.0 if method == "rs" else p, alpha, label,
                ("mispredicted",) + estimator_flags,
            )
        if method == "rs":
            deviation = 0.0
            if conservative_beta is not None and estimator == "mc":
                deviation = hoeffding_deviation(conservative_beta, h.n_samples)
            return rs_radius(row, h.sigma, alpha, i, label, estimator_flags, deviation)
        if method == "lipschitz_global":
            cert = lipschitz_radius(row, profile, alpha, i, label)
        else:
            spec = local_spec or AttackSpec(norm=p, eps=local_eps, steps=20)
            local = local_lipschitz_estimate(h, dataset.X[i], local_eps, p, spec)
            cert = lipschitz_radius(row, local, alpha, i, label)
        if estimator_flags:
            cert = Certificate(
                cert.index, cert.y, cert.y_prime, cert.margin, cert.radius,
                cert.method, cert.norm, cert.alpha, cert.label,
                cert.flags + estimator_flags,
            )
        return cert

    return parallel_map(one, range(len(dataset)), workers)


def _model_of(clf):
    if isinstance(clf, FeedForwardClassifier):
        return clf._check_fitted()
    raise ValueError(
        "global Lipschitz certification needs a FeedForwardClassifier or a "
        "SmoothedClassifier as the robust base"
    )
