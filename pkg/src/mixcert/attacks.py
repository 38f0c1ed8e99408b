"""FGSM and PGD attacks under l2 / l-inf budgets.

A loss model is anything with `decision_function(X) -> (n, c)` logits and
`input_jacobian(X, domain="logit") -> (n, c, d)`; the attack maximizes
cross-entropy of softmax(logits) against the given labels.  Targets follow
the STD / ROB / MIX taxonomy: the target field names which model's
gradients craft the perturbation (the standard base, the robust base, or
the end-to-end mixture), while scoring is always done on whatever
classifiers the caller passes to `evaluate_under_attack`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .validation import check_labels, check_matrix, check_norm

TARGETS = ("STD", "ROB", "MIX")


@dataclass(frozen=True)
class AttackSpec:
    norm: float = float("inf")
    eps: float = 0.1
    steps: int = 20
    step_size: float | None = None  # default: eps/4 for l-inf, 2.5*eps/steps for l2
    loss: str = "cross_entropy"
    target: str = "MIX"
    random_start: bool = False
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "norm", check_norm(self.norm))
        if self.eps < 0:
            raise ValueError("attack budget eps must be >= 0")
        if self.steps < 0:
            raise ValueError("step count must be >= 0")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.loss != "cross_entropy":
            raise ValueError(f"unsupported loss {self.loss!r}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; use one of {TARGETS}")
        if self.random_start and self.seed is None:
            raise ValueError("random_start requires a seed")

    def resolved_step_size(self) -> float:
        if self.step_size is not None:
            return self.step_size
        if self.norm == float("inf"):
            return self.eps / 4.0
        return 2.5 * self.eps / max(self.steps, 1)


@dataclass
class AttackDiagnostics:
    """Mutable counters an attack run fills in."""

    zero_gradient_skips: int = 0
    extra: dict = field(default_factory=dict)


def _ce_loss_rows(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return np.log(np.exp(shifted).sum(axis=1)) - shifted[np.arange(len(y)), y]


def _ce_input_grad(clf, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    logits = np.asarray(clf.decision_function(X), dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    q = e / e.sum(axis=1, keepdims=True)
    q[np.arange(len(y)), y] -= 1.0
    jac = np.asarray(clf.input_jacobian(X, domain="logit"), dtype=np.float64)
    return np.einsum("nc,ncd->nd", q, jac)


def _project(delta: np.ndarray, norm: float, eps: float) -> np.ndarray:
    if norm == float("inf"):
        return np.clip(delta, -eps, eps)
    norms = np.linalg.norm(delta, axis=1, keepdims=True)
    scale = np.ones_like(norms)
    np.divide(eps, norms, out=scale, where=norms > eps)
    return delta * scale


def _random_start(spec: AttackSpec, n: int, d: int, start_index: int) -> np.ndarray:
    if spec.norm == float("inf"):
        u = _rng.uniform_block(spec.seed, start_index * d, n * d).reshape(n, d)
        return spec.eps * (2.0 * u - 1.0)
    g = _rng.gaussian_rows(spec.seed, start_index, n, d)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = _rng.uniform_block(spec.seed + 0x5EED, start_index, n) ** (1.0 / d)
    return spec.eps * radii[:, None] * g / norms


def pgd_trajectory(
    clf,
    X,
    y,
    spec: AttackSpec,
    clip_box: tuple[float, float] | None = None,
    start_index: int = 0,
    diagnostics: AttackDiagnostics | None = None,
) -> list[np.ndarray]:
    """All projected iterates [x_0, ..., x_k]; x_0 may include a random start."""
    X = check_matrix(X)
    y = check_labels(y)
    n, d = X.shape
    eta = spec.resolved_step_size()

    def box(Z):
        if clip_box is None:
            return Z
        return np.clip(Z, clip_box[0], clip_box[1])

    if spec.random_start and spec.eps > 0:
        current = box(X + _project(_random_start(spec, n, d, start_index), spec.norm, spec.eps))
    else:
        current = X.copy()
    iterates = [current]
    if spec.eps == 0 or spec.steps == 0:
        return iterates
    for _ in range(spec.steps):
        grad = _ce_input_grad(clf, current, y)
        gnorm = np.linalg.norm(grad, axis=1)
        alive = gnorm > 0.0
        if diagnostics is not None:
            diagnostics.zero_gradient_skips += int(np.sum(~alive))
        if spec.norm == float("inf"):
            step = eta * np.sign(grad)
        else:
            safe = np.where(alive, gnorm, 1.0)
            step = eta * grad / safe[:, None]
        step[~alive] = 0.0
        current = box(X + _project(current + step - X, spec.norm, spec.eps))
        iterates.append(current)
    return iterates


def pgd_attack(
    clf,
    X,
    y,
    spec: AttackSpec,
    clip_box: tuple[float, float] | None = None,
    start_index: int = 0,
    diagnostics: AttackDiagnostics | None = None,
) -> np.ndarray:
    """Per-row best-loss iterate of a PGD run; ||x_adv - x||_p <= eps."""
    X = check_matrix(X)
    y = check_labels(y)
    iterates = pgd_trajectory(clf, X, y, spec, clip_box, start_index, diagnostics)
    best = iterates[0]
    best_loss = _ce_loss_rows(np.asarray(clf.decision_function(best)), y)
    for point in iterates[1:]:
        loss = _ce_loss_rows(np.asarray(clf.decision_function(point)), y)
        better = loss > best_loss
        best = np.where(better[:, None], point, best)
        best_loss = np.where(better, loss, best_loss)
    return best


@dataclass(frozen=True)
class AttackReport:
    spec: AttackSpec
    clean_accuracy: dict
    attacked_accuracy: dict
    rows: list  # per-input tuples for the CSV export

    CSV_HEADER = ("index", "target", "eps", "clean_pred", "adv_pred", "label", "margin_at_adv")


def _accuracy(clf, X, y) -> float:
    return float(np.mean(np.asarray(clf.predict(X)) == y))


def _mix_probabilities(clf, X) -> np.ndarray:
    try:
        return np.asarray(clf.predict_proba(X), dtype=np.float64)
    except (AttributeError, NotImplementedError):
        z = np.asarray(clf.decision_function(X), dtype=np.float64)
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)


def evaluate_under_attack(g, h, mixed, dataset, spec: AttackSpec) -> AttackReport:
    """Craft the perturbation on the target model, score every classifier.

    spec.target selects whose gradients build the attack (STD -> g,
    ROB -> h, MIX -> mixed); the perturbed inputs are then scored by the
    mixed classifier and both bases.
    """
    X, y = dataset.X, dataset.y
    target_clf = {"STD": g, "ROB": h, "MIX": mixed}[spec.target]
    X_adv = pgd_attack(target_clf, X, y, spec, clip_box=dataset.clip_box)

    clean = {"std": _accuracy(g, X, y), "rob": _accuracy(h, X, y), "mix": _accuracy(mixed, X, y)}
    attacked = {
        "std": _accuracy(g, X_adv, y),
        "rob": _accuracy(h, X_adv, y),
        "mix": _accuracy(mixed, X_adv, y),
    }

    clean_pred = np.asarray(mixed.predict(X))
    adv_pred = np.asarray(mixed.predict(X_adv))
    probs_adv = _mix_probabilities(mixed, X_adv)
    order = np.sort(probs_adv, axis=1)
    margins = order[:, -1] - order[:, -2]
    rows = [
        (i, spec.target, spec.eps, int(clean_pred[i]), int(adv_pred[i]), int(y[i]), float(margins[i]))
        for i in range(len(y))
    ]
    return AttackReport(spec, clean, attacked, rows)
