import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mixcert as mc
from mixcert import network
from mixcert.errors import ModelFormatError

from conftest import random_model


def linear_model(W, b):
    return mc.FeedForwardModel((mc.Layer(W, b, "identity"),))


class TestForward:
    def test_identity_layer_passes_input_through(self):
        m = linear_model(np.eye(2), np.zeros(2))
        np.testing.assert_array_equal(mc.forward_logits(m, [1.0, 2.0]), [1.0, 2.0])

    def test_hand_computed_affine(self):
        m = linear_model([[2.0, 0.0], [0.0, 3.0]], [1.0, -1.0])
        np.testing.assert_allclose(mc.forward_logits(m, [1.0, 1.0]), [3.0, 2.0])

    def test_zero_weights_give_bias(self):
        m = linear_model(np.zeros((3, 2)), [0.3, -0.1, 2.0])
        np.testing.assert_array_equal(mc.forward_logits(m, [5.0, -7.0]), [0.3, -0.1, 2.0])

    def test_dimension_mismatch_rejected(self):
        m = linear_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            mc.forward_logits(m, [1.0, 2.0, 3.0])

    def test_bit_identical_across_calls(self):
        rng = np.random.default_rng(0)
        m = random_model(rng)
        x = rng.normal(size=3)
        a = mc.forward_probs(m, x)
        b = mc.forward_probs(m, x)
        np.testing.assert_array_equal(a, b)


class TestSoftmax:
    def test_symmetric_logits(self):
        m = linear_model(np.zeros((2, 1)), np.zeros(2))
        np.testing.assert_allclose(mc.forward_probs(m, [0.0]), [0.5, 0.5])

    def test_closed_form_ratio(self):
        m = linear_model([[1.0], [0.0]], [0.0, 0.0])
        np.testing.assert_allclose(mc.forward_probs(m, [math.log(3.0)]), [0.75, 0.25], atol=1e-12)

    def test_extreme_logits_do_not_overflow(self):
        m = linear_model([[1.0], [0.0]], [0.0, 0.0])
        p = mc.forward_probs(m, [1000.0])
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p, [1.0, 0.0], atol=1e-12)

    @given(
        st.lists(st.floats(-700, 700), min_size=2, max_size=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_probability_simplex(self, logits):
        p = network.softmax(np.array(logits))
        assert np.all(p >= 0.0) and np.all(p <= 1.0)
        assert abs(p.sum() - 1.0) <= 1e-9


class TestInputGradients:
    def test_linear_logit_gradient_is_weight_row(self):
        W = np.array([[2.0, -1.0], [0.5, 3.0]])
        m = linear_model(W, np.zeros(2))
        np.testing.assert_allclose(mc.input_gradient(m, [0.2, 0.4], 1, "logit"), W[1])

    def test_probability_gradients_sum_to_zero(self):
        rng = np.random.default_rng(1)
        m = random_model(rng, d=4, c=3)
        x = rng.normal(size=4)
        total = sum(mc.input_gradient(m, x, i, "probability") for i in range(3))
        np.testing.assert_allclose(total, np.zeros(4), atol=1e-12)

    def test_invalid_class_index(self):
        m = linear_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            mc.input_gradient(m, [0.0, 0.0], 5)

    @pytest.mark.parametrize("domain", ["logit", "probability"])
    def test_matches_finite_differences(self, domain):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            d = int(rng.integers(1, 9))
            c = int(rng.integers(2, 5))
            m = random_model(rng, d=d, c=c, hidden=(6, 5), activation=rng.choice(["tanh", "relu"]))
            x = rng.normal(size=d)
            i = int(rng.integers(c))
            grad = mc.input_gradient(m, x, i, domain)

            def f(z, m=m, i=i):
                out = mc.forward_logits(m, z) if domain == "logit" else mc.forward_probs(m, z)
                return float(out[i])

            fd = mc.finite_diff_gradient(f, x, 1e-4)
            rel = np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-6)
            worst = max(worst, rel)
        assert worst <= 1e-4


class TestLossGradients:
    def test_parameter_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        m = random_model(rng, d=3, c=3, hidden=(5,))
        X = rng.normal(size=(12, 3))
        y = rng.integers(0, 3, size=12)
        _, grads = network.loss_and_param_grads(m, X, y)
        eps = 1e-6
        for k, layer in enumerate(m.layers):
            for idx in [(0, 0), (layer.out_dim - 1, layer.in_dim - 1)]:
                Wp = layer.weight.copy()
                Wp[idx] += eps
                Wm = layer.weight.copy()
                Wm[idx] -= eps
                up = list(m.layers)
                up[k] = mc.Layer(Wp, layer.bias, layer.activation)
                down = list(m.layers)
                down[k] = mc.Layer(Wm, layer.bias, layer.activation)
                fd = (
                    network.cross_entropy_loss(mc.FeedForwardModel(tuple(up)), X, y)
                    - network.cross_entropy_loss(mc.FeedForwardModel(tuple(down)), X, y)
                ) / (2 * eps)
                assert abs(grads[k][0][idx] - fd) < 1e-6


class TestLipschitzBounds:
    def test_scalar_layer_exact(self):
        m = linear_model([[3.0], [0.0]], [0.0, 0.0])
        b = mc.global_lipschitz_upper(m, 2, "logit")
        np.testing.assert_allclose(b.values, [3.0, 3.0])

    def test_norm_product_two_layers(self):
        m = mc.FeedForwardModel(
            (
                mc.Layer(2.0 * np.eye(2), np.zeros(2), "relu"),
                mc.Layer(3.0 * np.eye(2), np.zeros(2), "identity"),
            )
        )
        b = mc.global_lipschitz_upper(m, 2, "logit")
        # power iteration inflates certified bounds by at most 0.1% per layer
        np.testing.assert_allclose(b.values, [6.0, 6.0], rtol=3e-3)
        assert np.all(b.values >= 6.0 - 1e-12)

    def test_probability_domain_halves(self):
        m = mc.FeedForwardModel(
            (
                mc.Layer(2.0 * np.eye(2), np.zeros(2), "relu"),
                mc.Layer(3.0 * np.eye(2), np.zeros(2), "identity"),
            )
        )
        logit = mc.global_lipschitz_upper(m, 2, "logit")
        prob = mc.global_lipschitz_upper(m, 2, "probability")
        np.testing.assert_allclose(prob.values, 0.5 * logit.values)

    def test_inf_norm_reports_cheaper_path(self):
        rng = np.random.default_rng(5)
        m = random_model(rng, d=3, c=2)
        b = mc.global_lipschitz_upper(m, "inf", "logit")
        direct = 1.0
        for layer in m.layers:
            direct *= np.abs(layer.weight).sum(axis=1).max()
        converted = math.sqrt(3) * math.prod(
            network.spectral_norm_upper(layer.weight) for layer in m.layers
        )
        np.testing.assert_allclose(b.values[0], min(direct, converted), rtol=1e-12)
        assert b.path in ("product", "l2_times_sqrt_d")

    @pytest.mark.parametrize("p", [2.0, float("inf")])
    @pytest.mark.parametrize("domain", ["logit", "probability"])
    def test_bound_soundness_random_pairs(self, p, domain):
        rng = np.random.default_rng(17)
        for _ in range(20):
            d = int(rng.integers(1, 5))
            m = random_model(rng, d=d, c=3, hidden=(5, 4), activation=rng.choice(["tanh", "relu"]))
            bound = mc.global_lipschitz_upper(m, p, domain).values
            X = rng.normal(scale=2.0, size=(50, d))
            Z = rng.normal(scale=2.0, size=(50, d))
            fX = network.forward_logits_batch(m, X) if domain == "logit" else network.forward_probs_batch(m, X)
            fZ = network.forward_logits_batch(m, Z) if domain == "logit" else network.forward_probs_batch(m, Z)
            dist = (
                np.linalg.norm(X - Z, axis=1)
                if p == 2.0
                else np.max(np.abs(X - Z), axis=1)
            )
            for i in range(3):
                assert np.all(np.abs(fX[:, i] - fZ[:, i]) <= bound[i] * dist + 1e-12)

    def test_unsupported_norm(self):
        m = linear_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            mc.global_lipschitz_upper(m, 1, "logit")


class TestPersistence:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        m = random_model(rng, d=4, c=3)
        path = tmp_path / "model.txt"
        mc.save_model(m, path)
        loaded = mc.load_model(path)
        assert len(loaded.layers) == len(m.layers)
        for a, b in zip(m.layers, loaded.layers):
            np.testing.assert_array_equal(a.weight, b.weight)
            np.testing.assert_array_equal(a.bias, b.bias)
            assert a.activation == b.activation

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        rng = np.random.default_rng(9)
        mc.save_model(random_model(rng), path)
        text = path.read_text().replace("format_version: 1", "format_version: 2")
        path.write_text(text)
        with pytest.raises(ModelFormatError):
            mc.load_model(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("format_version: 1\ninput_dim: 2\n")
        with pytest.raises((ModelFormatError, IndexError, ValueError)):
            mc.load_model(path)


class TestModelInvariants:
    def test_dims_must_chain(self):
        with pytest.raises(ValueError):
            mc.FeedForwardModel(
                (
                    mc.Layer(np.ones((3, 2)), np.zeros(3), "relu"),
                    mc.Layer(np.ones((2, 4)), np.zeros(2), "identity"),
                )
            )

    def test_weights_must_be_finite(self):
        with pytest.raises(ValueError):
            mc.Layer(np.array([[np.inf]]), np.zeros(1), "identity")

    def test_weights_frozen(self):
        m = linear_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            m.layers[0].weight[0, 0] = 5.0
