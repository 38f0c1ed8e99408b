import numpy as np
import pytest

import mixcert as mc


def train_classifier(dataset, hidden=(8, 8), epochs=80, lr=0.5, batch=32, seed=11, adversarial=None):
    spec = mc.ModelSpec(hidden, "tanh")
    config = mc.TrainConfig(
        epochs=epochs, learning_rate=lr, batch_size=batch, seed=seed, adversarial=adversarial
    )
    return mc.FeedForwardClassifier.from_model(mc.train(spec, dataset, config))


@pytest.fixture(scope="session")
def moons_train():
    return mc.make_two_moons(256, 0.12, 101, "train")


@pytest.fixture(scope="session")
def moons_test():
    return mc.make_two_moons(256, 0.12, 202, "test")


@pytest.fixture(scope="session")
def moons_g(moons_train):
    """Accurate standard base: sharp decision boundary."""
    return train_classifier(moons_train, epochs=80, lr=0.5, seed=11)


@pytest.fixture(scope="session")
def moons_h(moons_train):
    """Adversarially trained robust base."""
    at = mc.AttackSpec(norm="inf", eps=0.25, steps=20, target="STD")
    return train_classifier(moons_train, epochs=80, lr=0.5, seed=12, adversarial=at)


@pytest.fixture(scope="session")
def moons_h_small(moons_train):
    """Lightly trained base with a small global Lipschitz bound."""
    return train_classifier(moons_train, epochs=25, lr=0.2, seed=12)


def random_model(rng, d=3, c=3, hidden=(6, 5), activation="tanh", scale=1.0):
    dims = [d, *hidden, c]
    layers = []
    for k in range(len(dims) - 1):
        w = scale * rng.normal(0, 1.0 / np.sqrt(dims[k]), size=(dims[k + 1], dims[k]))
        b = scale * rng.normal(0, 0.3, size=dims[k + 1])
        act = activation if k < len(dims) - 2 else "identity"
        layers.append(mc.Layer(w, b, act))
    return mc.FeedForwardModel(tuple(layers))
