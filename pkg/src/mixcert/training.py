"""Mini-batch gradient-descent training, standard or PGD-adversarial.

Deterministic by construction: weights are initialized from the config
seed, batch order is reshuffled with seed+epoch, and the optimizer is
plain constant-step gradient descent, so a fixed (seed, config, dataset)
always reproduces bit-identical weights.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import network
from .attacks import AttackSpec, pgd_attack
from .datasets import Dataset
from .errors import TrainingDivergenceError
from .network import FeedForwardModel, Layer
from .validation import check_matrix


@dataclass(frozen=True)
class ModelSpec:
    hidden: tuple[int, ...] = (16, 16)
    activation: str = "tanh"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    learning_rate: float = 0.5
    batch_size: int = 32
    seed: int = 0
    adversarial: AttackSpec | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


def initialize_model(
    input_dim: int, class_count: int, spec: ModelSpec, seed: int
) -> FeedForwardModel:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    dims = [input_dim, *spec.hidden, class_count]
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        activation = spec.activation if k < len(dims) - 2 else "identity"
        layers.append(Layer(weight, np.zeros(fan_out), activation))
    return FeedForwardModel(tuple(layers))


def train(model_spec: ModelSpec, dataset: Dataset, config: TrainConfig) -> FeedForwardModel:
    """Minimize mean cross-entropy by mini-batch gradient descent.

    With config.adversarial set, every batch is replaced by PGD-perturbed
    inputs crafted against the current model before the step (labels kept).
    """
    if dataset.split == "test":
        raise ValueError("refusing to train on a dataset tagged as the test split")
    model = initialize_model(dataset.input_dim, dataset.class_count, model_spec, config.seed)
    n = len(dataset)
    for epoch in range(config.epochs):
        order = np.random.default_rng(config.seed + epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            Xb, yb = dataset.X[idx], dataset.y[idx]
            if config.adversarial is not None:
                Xb = pgd_attack(
                    FeedForwardClassifier.from_model(model),
                    Xb,
                    yb,
                    config.adversarial,
                    clip_box=dataset.clip_box,
                )
            loss, grads = network.loss_and_param_grads(model, Xb, yb)
            if not np.isfinite(loss):
                raise TrainingDivergenceError(epoch)
            try:
                with np.errstate(over="ignore"):
                    model = network.gradient_step(model, grads, config.learning_rate)
            except ValueError:
                # a step that overflows the weights is a divergence, not a bad model
                raise TrainingDivergenceError(epoch) from None
    final_loss = network.cross_entropy_loss(model, dataset.X, dataset.y)
    if not np.isfinite(final_loss):
        raise TrainingDivergenceError(config.epochs - 1)
    return model


class FeedForwardClassifier(BaseEstimator, ClassifierMixin):
    """Dense-network classifier with the usual fit/predict estimator surface.

    `decision_function` returns per-class logits of shape (n, c) and
    `input_jacobian` exposes the exact per-class input gradients the attack
    and mixing code differentiate through.
    """

    def __init__(
        self,
        hidden_layer_sizes=(16, 16),
        activation="tanh",
        epochs=60,
        learning_rate=0.5,
        batch_size=32,
        seed=0,
        adversarial=None,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.adversarial = adversarial

    @classmethod
    def from_model(cls, model: FeedForwardModel) -> "FeedForwardClassifier":
        """Wrap an already-built network as a fitted classifier."""
        clf = cls()
        clf.model_ = model
        clf.classes_ = np.arange(model.class_count)
        clf.n_features_in_ = model.input_dim
        return clf

    def fit(self, X, y):
        X = check_matrix(X, name="X")
        y = np.asarray(y)
        classes, encoded = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise ValueError("need at least two classes")
        dataset = Dataset(
            X, encoded.astype(np.int64), class_count=len(classes), split="train", seed=self.seed
        )
        config = TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=self.seed,
            adversarial=self.adversarial,
        )
        spec = ModelSpec(tuple(self.hidden_layer_sizes), self.activation)
        self.model_ = train(spec, dataset, config)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self) -> FeedForwardModel:
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError("this FeedForwardClassifier instance is not fitted yet")
        return model

    def decision_function(self, X) -> np.ndarray:
        return network.forward_logits_batch(self._check_fitted(), X)

    def predict_proba(self, X) -> np.ndarray:
        return network.forward_probs_batch(self._check_fitted(), X)

    def predict(self, X) -> np.ndarray:
        # ties resolve to the lowest class index (argmax picks the first max)
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

    def input_jacobian(self, X, domain: str = "logit") -> np.ndarray:
        return network.input_jacobian_batch(self._check_fitted(), X, domain)

    def save(self, path) -> None:
        network.save_model(self._check_fitted(), path)

    @classmethod
    def load(cls, path) -> "FeedForwardClassifier":
        return cls.from_model(network.load_model(path))
