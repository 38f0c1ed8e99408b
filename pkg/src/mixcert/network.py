"""Minimal differentiable feedforward networks on numpy.

Dense layers with relu/tanh/identity activations, reverse-mode gradients
with respect to inputs and parameters, certified upper bounds on per-class
Lipschitz constants, and a versioned text format for persistence.  Models
are immutable after construction; every function here is pure, so
concurrent read-only use is safe.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ModelFormatError
from .validation import check_matrix, check_norm, check_vector

ACTIVATIONS = ("relu", "tanh", "identity")

SOFTMAX_COMPONENT_FACTOR = 0.5  # sup over the simplex of ||p_i (e_i - p)||_2
SPECTRAL_NORM_INFLATION = 1.001
POWER_ITERATIONS = 200
POWER_TOL = 1e-10


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError(f"layer weight must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match weight rows {w.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; use one of {ACTIVATIONS}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class FeedForwardModel:
    """A chain of dense layers; the last layer's outputs are the logits."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("model needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        if layers[-1].out_dim < 2:
            raise ValueError("final layer must emit at least 2 classes")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def class_count(self) -> int:
        return self.layers[-1].out_dim


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def _forward_cached(model: FeedForwardModel, X: np.ndarray):
    """Forward pass keeping pre-activations for the backward passes."""
    pre = []
    a = X
    acts = [a]
    for layer in model.layers:
        z = a @ layer.weight.T + layer.bias
        pre.append(z)
        a = _activate(z, layer.activation)
        acts.append(a)
    return pre, acts


def forward_logits_batch(model: FeedForwardModel, X) -> np.ndarray:
    X = check_matrix(X, model.input_dim)
    a = X
    for layer in model.layers:
        a = _activate(a @ layer.weight.T + layer.bias, layer.activation)
    return a


def forward_logits(model: FeedForwardModel, x) -> np.ndarray:
    x = check_vector(x, model.input_dim)
    return forward_logits_batch(model, x.reshape(1, -1))[0]


def softmax(Z: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax along the last axis.

    Reductions run column by column: class counts are small here, and
    whole-column elementwise passes are much faster than per-row reduces.
    """
    Z = np.asarray(Z, dtype=np.float64)
    c = Z.shape[-1]
    if c == 2:
        # stable two-class sigmoid: one exp per row
        delta = Z[..., 1] - Z[..., 0]
        t = np.exp(-np.abs(delta))
        big = 1.0 / (1.0 + t)
        small = t / (1.0 + t)
        out = np.empty_like(Z)
        pos = delta >= 0.0
        out[..., 1] = np.where(pos, big, small)
        out[..., 0] = np.where(pos, small, big)
        return out
    peak = Z[..., 0]
    for k in range(1, c):
        peak = np.maximum(peak, Z[..., k])
    e = np.exp(Z - peak[..., None])
    total = e[..., 0].copy()
    for k in range(1, c):
        total += e[..., k]
    return e / total[..., None]


def forward_probs_batch(model: FeedForwardModel, X) -> np.ndarray:
    return softmax(forward_logits_batch(model, X))


def forward_probs(model: FeedForwardModel, x) -> np.ndarray:
    return softmax(forward_logits(model, x))


def _backward_input(model: FeedForwardModel, pre, seed: np.ndarray) -> np.ndarray:
    """Propagate d(out)/d(logits) seeds of shape (n, c) back to inputs."""
    grad = seed
    for layer, z in zip(reversed(model.layers), reversed(pre)):
        grad = grad * _activate_grad(z, layer.activation)
        grad = grad @ layer.weight
    return grad


def input_jacobian_batch(
    model: FeedForwardModel, X, domain: str = "logit"
) -> np.ndarray:
    """Per-class input gradients, shape (n, c, d).

    domain="logit" differentiates the raw logits; domain="probability"
    differentiates the softmax outputs.
    """
    X = check_matrix(X, model.input_dim)
    pre, acts = _forward_cached(model, X)
    n = X.shape[0]
    c = model.class_count
    jac = np.empty((n, c, model.input_dim))
    if domain == "logit":
        for i in range(c):
            seed = np.zeros((n, c))
            seed[:, i] = 1.0
            jac[:, i, :] = _backward_input(model, pre, seed)
    elif domain == "probability":
        probs = softmax(acts[-1])
        for i in range(c):
            # dp_i/dz_k = p_i (1[i=k] - p_k)
            seed = -probs[:, i : i + 1] * probs
            seed[:, i] += probs[:, i]
            jac[:, i, :] = _backward_input(model, pre, seed)
    else:
        raise ValueError(f"unknown domain {domain!r}; use 'logit' or 'probability'")
    return jac


def input_gradient(model: FeedForwardModel, x, class_index: int, domain: str = "logit") -> np.ndarray:
    """Exact reverse-mode gradient of one output with respect to the input."""
    x = check_vector(x, model.input_dim)
    if not 0 <= class_index < model.class_count:
        raise ValueError(
            f"class index {class_index} out of range for {model.class_count} classes"
        )
    return input_jacobian_batch(model, x.reshape(1, -1), domain)[0, class_index]


def cross_entropy_loss(model: FeedForwardModel, X, y) -> float:
    """Mean cross-entropy of softmax(logits) against integer labels."""
    X = check_matrix(X, model.input_dim)
    logits = forward_logits_batch(model, X)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(X)), np.asarray(y, dtype=np.int64)]
    return float(np.mean(log_z - picked))


def loss_and_param_grads(model: FeedForwardModel, X, y):
    """Mean cross-entropy and its gradients w.r.t. every weight and bias."""
    X = check_matrix(X, model.input_dim)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    pre, acts = _forward_cached(model, X)
    logits = acts[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    loss = float(np.mean(np.log(expz.sum(axis=1)) - shifted[np.arange(n), y]))

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = []
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        delta = delta * _activate_grad(pre[k], layer.activation)
        grads.append((delta.T @ acts[k], delta.sum(axis=0)))
        if k > 0:
            delta = delta @ layer.weight
    grads.reverse()
    return loss, grads


def gradient_step(model: FeedForwardModel, grads, learning_rate: float) -> FeedForwardModel:
    """Return a new model after one plain gradient-descent step."""
    layers = tuple(
        Layer(
            layer.weight - learning_rate * gw,
            layer.bias - learning_rate * gb,
            layer.activation,
        )
        for layer, (gw, gb) in zip(model.layers, grads)
    )
    return FeedForwardModel(layers)


def spectral_norm_upper(W: np.ndarray) -> float:
    """Certified upper bound on the largest singular value.

    Power iteration (fixed start, 200 iterations or relative change below
    1e-10) inflated by 0.1% so the returned value stays a sound upper bound
    without an exact SVD.
    """
    W = np.asarray(W, dtype=np.float64)
    if min(W.shape) == 1:
        # a single row or column has spectral norm equal to its l2 norm
        return float(np.linalg.norm(W))
    n = W.shape[1]
    v = 1.0 + np.arange(n) / (10.0 * max(n, 1))
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(POWER_ITERATIONS):
        u = W @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = W.T @ (u / nu)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        v /= nv
        prev, sigma = sigma, nv
        if prev > 0.0 and abs(sigma - prev) <= POWER_TOL * prev:
            break
    return sigma * SPECTRAL_NORM_INFLATION


def operator_norm(W: np.ndarray, p: float) -> float:
    """Induced p -> p operator norm; exact for p=inf, bounded for p=2."""
    W = np.asarray(W, dtype=np.float64)
    if p == 2.0:
        return spectral_norm_upper(W)
    if p == float("inf"):
        return float(np.abs(W).sum(axis=1).max())
    raise ValueError(f"unsupported norm {p!r}")


class LipschitzBound(NamedTuple):
    """Per-class global Lipschitz upper bounds plus how they were obtained.

    path is "product" when the bound is the product of induced p->p norms in
    the requested norm itself, and "l2_times_sqrt_d" when the l-inf bound was
    obtained from the l2 product via ||delta||_2 <= sqrt(d) ||delta||_inf.
    """

    values: np.ndarray  # (c,)
    norm: float
    domain: str
    path: str


def global_lipschitz_upper(
    model: FeedForwardModel, p, domain: str = "probability"
) -> LipschitzBound:
    """Sound per-class Lipschitz upper bounds for logits or probabilities.

    The bound is the product of induced operator norms of the weight
    matrices (relu/tanh/identity are 1-Lipschitz), times 1/2 for the
    probability domain (per-component softmax gradient bound).  For the
    l-inf norm both the direct inf->inf product and the sqrt(d)-scaled l2
    product are computed and the smaller one is returned, labeled by path.
    """
    p = check_norm(p)
    if domain not in ("logit", "probability"):
        raise ValueError(f"unknown domain {domain!r}")
    factor = SOFTMAX_COMPONENT_FACTOR if domain == "probability" else 1.0

    def product(q: float) -> float:
        out = 1.0
        for layer in model.layers:
            out *= operator_norm(layer.weight, q)
        return out

    if p == 2.0:
        bound = factor * product(2.0)
        path = "product"
    else:
        direct = product(float("inf"))
        converted = math.sqrt(model.input_dim) * product(2.0)
        if converted < direct:
            bound, path = factor * converted, "l2_times_sqrt_d"
        else:
            bound, path = factor * direct, "product"
    values = np.full(model.class_count, bound)
    values.setflags(write=False)
    return LipschitzBound(values, p, domain, path)


MODEL_FORMAT_VERSION = 1


def save_model(model: FeedForwardModel, path) -> None:
    """Write the versioned text format: dims, activations, row-major weights."""
    lines = [
        f"format_version: {MODEL_FORMAT_VERSION}",
        f"input_dim: {model.input_dim}",
        f"class_count: {model.class_count}",
        f"layer_count: {len(model.layers)}",
    ]
    for layer in model.layers:
        lines.append(f"layer: {layer.out_dim} {layer.in_dim} {layer.activation}")
        lines.append("bias: " + " ".join(repr(v) for v in layer.bias.tolist()))
        for row in layer.weight.tolist():
            lines.append("row: " + " ".join(repr(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _expect(line: str, key: str) -> str:
    if not line.startswith(key + ":"):
        raise ModelFormatError(f"expected {key!r}, got {line[:40]!r}")
    return line[len(key) + 1 :].strip()


def load_model(path) -> FeedForwardModel:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ModelFormatError("empty model file")
    version = _expect(lines[0], "format_version")
    if version != str(MODEL_FORMAT_VERSION):
        raise ModelFormatError(f"unknown format_version {version!r}")
    input_dim = int(_expect(lines[1], "input_dim"))
    class_count = int(_expect(lines[2], "class_count"))
    layer_count = int(_expect(lines[3], "layer_count"))
    pos = 4
    layers = []
    for _ in range(layer_count):
        head = _expect(lines[pos], "layer").split()
        if len(head) != 3:
            raise ModelFormatError(f"malformed layer header {lines[pos]!r}")
        out_dim, in_dim, activation = int(head[0]), int(head[1]), head[2]
        bias = np.array([float(v) for v in _expect(lines[pos + 1], "bias").split()])
        if bias.shape != (out_dim,):
            raise ModelFormatError(f"bias length {bias.shape[0]} != out dim {out_dim}")
        rows = []
        for r in range(out_dim):
            row = [float(v) for v in _expect(lines[pos + 2 + r], "row").split()]
            if len(row) != in_dim:
                raise ModelFormatError(f"weight row length {len(row)} != in dim {in_dim}")
            rows.append(row)
        layers.append(Layer(np.array(rows), bias, activation))
        pos += 2 + out_dim
    model = FeedForwardModel(tuple(layers))
    if model.input_dim != input_dim or model.class_count != class_count:
        raise ModelFormatError("header dims do not match layer dims")
    return model
