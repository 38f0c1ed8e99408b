"""Accuracy-robustness mixing of two base classifiers.

Four formulations combine an accurate base g and a robust base h:

* smo1  -- per-class score  g_i + gamma * h_i * ||grad g_i||_dual
* smo2  -- the same, normalized so scores stay in the base output range
* smo3  -- normalized with a configurable trust factor R_i
* alpha -- log of the convex combination (1 - alpha) g + alpha h of base
           probabilities; the log keeps the output a drop-in logit vector
           so gradient-based attacks see a well-behaved surface.

Scores mix either raw logits or probabilities; probability-domain scores
are mapped back to logits through a natural log with a floor at 1e-300.
For smo1..smo3 the backward pass treats the gradient-norm factors as
locally constant (the engine is first-order); the alpha formulation is
differentiated exactly.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import check_matrix, check_norm

FORMULATIONS = ("smo1", "smo2", "smo3", "alpha")
R_MODES = ("one", "grad_gi", "grad_max_gj", "grad_ratio")
DOMAINS = ("logit", "probability")

LOG_FLOOR = 1e-300
GRAD_RATIO_EPS = 1e-12
GRAD_RATIO_CAP = 1e12


def dual_norm(p) -> float:
    """Dual exponent used on gradients: l1 for l-inf attacks, l2 for l2."""
    p = check_norm(p)
    return 1.0 if p == float("inf") else 2.0


def _outputs(clf, X, domain: str) -> np.ndarray:
    if domain == "logit":
        return np.asarray(clf.decision_function(X), dtype=np.float64)
    if domain == "probability":
        return np.asarray(clf.predict_proba(X), dtype=np.float64)
    raise ValueError(f"unknown domain {domain!r}")


def _grad_norms(jac: np.ndarray, q: float) -> np.ndarray:
    if q == 1.0:
        return np.abs(jac).sum(axis=-1)
    return np.sqrt((jac * jac).sum(axis=-1))


def mix_smo1(g, h, gamma: float, p, X, domain: str = "probability") -> np.ndarray:
    """Unnormalized gradient-magnitude mixing, shape (n, c)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    X = check_matrix(X)
    q = dual_norm(p)
    G = _outputs(g, X, domain)
    H = _outputs(h, X, domain)
    ng = _grad_norms(np.asarray(g.input_jacobian(X, domain=domain)), q)
    return G + gamma * H * ng


def mix_smo2(g, h, gamma: float, p, X, domain: str = "probability") -> np.ndarray:
    """Normalized gradient-magnitude mixing; equals g at gamma=0 and tends
    to h as gamma grows wherever the gradient norm is positive."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    X = check_matrix(X)
    q = dual_norm(p)
    G = _outputs(g, X, domain)
    H = _outputs(h, X, domain)
    ng = _grad_norms(np.asarray(g.input_jacobian(X, domain=domain)), q)
    # same association as the general trust-factor path, so the two agree bitwise
    return (G + gamma * ng * H) / (1.0 + gamma * ng)


def _trust_factor(g, h, r_mode: str, q: float, X, domain: str, diagnostics=None) -> np.ndarray:
    n = X.shape[0]
    if r_mode == "one":
        c = len(np.asarray(g.classes_))
        return np.ones((n, c))
    jac_g = np.asarray(g.input_jacobian(X, domain=domain))
    ng = _grad_norms(jac_g, q)
    if r_mode == "grad_gi":
        return ng
    if r_mode == "grad_max_gj":
        top = np.argmax(_outputs(g, X, domain), axis=1)
        return np.repeat(ng[np.arange(n), top][:, None], ng.shape[1], axis=1)
    if r_mode == "grad_ratio":
        nh = _grad_norms(np.asarray(h.input_jacobian(X, domain=domain)), q)
        tiny = nh < GRAD_RATIO_EPS
        if diagnostics is not None:
            diagnostics["grad_ratio_fallbacks"] = diagnostics.get(
                "grad_ratio_fallbacks", 0
            ) + int(tiny.sum())
        ratio = np.where(tiny, GRAD_RATIO_CAP, ng / np.where(tiny, 1.0, nh))
        return np.minimum(ratio, GRAD_RATIO_CAP)
    raise ValueError(f"unknown r_mode {r_mode!r}; use one of {R_MODES}")


def mix_smo3(
    g,
    h,
    gamma: float,
    r_mode: str,
    p,
    X,
    domain: str = "probability",
    diagnostics: dict | None = None,
) -> np.ndarray:
    """Normalized mixing with a per-class trust factor R selected by r_mode.

    r_mode="grad_gi" reproduces mix_smo2 exactly; a vanishing robust-model
    gradient norm under "grad_ratio" falls back to a large cap (recorded in
    diagnostics) instead of dividing by zero.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    X = check_matrix(X)
    q = dual_norm(p)
    G = _outputs(g, X, domain)
    H = _outputs(h, X, domain)
    R = _trust_factor(g, h, r_mode, q, X, domain, diagnostics)
    return (G + gamma * R * H) / (1.0 + gamma * R)


@dataclass(frozen=True)
class MixOutput:
    logits: np.ndarray  # (n, c) log of the convex combination
    probabilities: np.ndarray  # (n, c) the combination itself
    argmax: np.ndarray  # (n,)


def mix_alpha(g, h, alpha: float, X) -> MixOutput:
    """Convex combination of base probabilities, reported in log domain.

    Removing the log recovers the combined probabilities without changing
    the predicted class; zero entries are floored at 1e-300 so the logits
    stay finite for differentiation.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    X = check_matrix(X)
    G = np.asarray(g.predict_proba(X), dtype=np.float64)
    H = np.asarray(h.predict_proba(X), dtype=np.float64)
    probs = (1.0 - alpha) * G + alpha * H
    logits = np.log(np.maximum(probs, LOG_FLOOR))
    return MixOutput(logits, probs, np.argmax(logits, axis=1))


class MixedClassifier(BaseEstimator, ClassifierMixin):
    """Drop-in classifier mixing an accurate base g with a robust base h.

    Exactly one of alpha / gamma applies: the alpha formulation takes
    alpha in [0, 1]; smo1..smo3 take gamma >= 0.  The two trade-off views
    are linked by alpha = gamma / (1 + gamma).

    h may be a plain classifier or a SmoothedClassifier; in the latter case
    its fixed seed keeps the mixture deterministic while attacks iterate.
    """

    def __init__(
        self,
        g=None,
        h=None,
        formulation="alpha",
        alpha=None,
        gamma=None,
        r_mode="one",
        domain="probability",
        norm=float("inf"),
    ):
        self.g = g
        self.h = h
        self.formulation = formulation
        self.alpha = alpha
        self.gamma = gamma
        self.r_mode = r_mode
        self.domain = domain
        self.norm = norm

    def _validate(self):
        if self.g is None or self.h is None:
            raise ValueError("MixedClassifier needs both base classifiers")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.r_mode not in R_MODES:
            raise ValueError(f"unknown r_mode {self.r_mode!r}")
        check_norm(self.norm)
        if self.formulation == "alpha":
            if self.alpha is None or self.gamma is not None:
                raise ValueError("formulation 'alpha' takes alpha (and no gamma)")
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError("alpha must lie in [0, 1]")
        else:
            if self.gamma is None or self.alpha is not None:
                raise ValueError(f"formulation {self.formulation!r} takes gamma (and no alpha)")
            if self.gamma < 0:
                raise ValueError("gamma must be >= 0")

    @property
    def alpha_view(self) -> float:
        """The mixing weight as alpha, whichever parameter was given."""
        self._validate()
        if self.formulation == "alpha":
            return float(self.alpha)
        return float(self.gamma / (1.0 + self.gamma))

    @property
    def gamma_view(self) -> float:
        self._validate()
        if self.formulation != "alpha":
            return float(self.gamma)
        if self.alpha >= 1.0:
            return float("inf")
        return float(self.alpha / (1.0 - self.alpha))

    @property
    def classes_(self):
        return np.asarray(self.g.classes_)

    def fit(self, X=None, y=None):
        """No-op; both bases are assumed pre-trained."""
        self._validate()
        return self

    def _scores(self, X, diagnostics=None) -> np.ndarray:
        self._validate()
        if self.formulation == "alpha":
            return mix_alpha(self.g, self.h, self.alpha, X).probabilities
        if self.formulation == "smo1":
            return mix_smo1(self.g, self.h, self.gamma, self.norm, X, self.domain)
        if self.formulation == "smo2":
            return mix_smo2(self.g, self.h, self.gamma, self.norm, X, self.domain)
        return mix_smo3(
            self.g, self.h, self.gamma, self.r_mode, self.norm, X, self.domain, diagnostics
        )

    def decision_function(self, X) -> np.ndarray:
        """Mixed logits: raw scores in the logit domain, log-scores otherwise."""
        scores = self._scores(X)
        if self.formulation != "alpha" and self.domain == "logit":
            return scores
        return np.log(np.maximum(scores, LOG_FLOOR))

    def predict_proba(self, X) -> np.ndarray:
        self._validate()
        if self.formulation != "alpha":
            raise NotImplementedError(
                "predict_proba is only defined for the alpha formulation; "
                "smo scores are not a probability vector"
            )
        return mix_alpha(self.g, self.h, self.alpha, X).probabilities

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def input_jacobian(self, X, domain: str = "logit") -> np.ndarray:
        """Jacobian of the mixed logits (or probabilities) w.r.t. the input.

        Exact for the alpha formulation.  For smo1..smo3 the gradient-norm
        factors are held constant in the backward pass, matching common
        practice when the engine is first-order.
        """
        self._validate()
        X = check_matrix(X)
        if self.formulation == "alpha":
            Jg = np.asarray(self.g.input_jacobian(X, domain="probability"))
            Jh = np.asarray(self.h.input_jacobian(X, domain="probability"))
            dprobs = (1.0 - self.alpha) * Jg + self.alpha * Jh
            if domain == "probability":
                return dprobs
            probs = mix_alpha(self.g, self.h, self.alpha, X).probabilities
            return dprobs / np.maximum(probs, LOG_FLOOR)[:, :, None]

        if domain != "logit":
            raise ValueError("smo formulations only expose logit-domain jacobians")
        q = dual_norm(self.norm)
        Jg = np.asarray(self.g.input_jacobian(X, domain=self.domain))
        Jh = np.asarray(self.h.input_jacobian(X, domain=self.domain))
        gamma = self.gamma
        if self.formulation == "smo1":
            ng = _grad_norms(Jg, q)
            dscores = Jg + gamma * ng[:, :, None] * Jh
        elif self.formulation == "smo2":
            ng = _grad_norms(Jg, q)
            dscores = (Jg + gamma * ng[:, :, None] * Jh) / (1.0 + gamma * ng)[:, :, None]
        else:
            R = _trust_factor(self.g, self.h, self.r_mode, q, X, self.domain)
            dscores = (Jg + gamma * R[:, :, None] * Jh) / (1.0 + gamma * R)[:, :, None]
        if self.domain == "logit":
            return dscores
        scores = self._scores(X)
        return dscores / np.maximum(scores, LOG_FLOOR)[:, :, None]
