import numpy as np
import pytest

import mixcert as mc
from mixcert.datasets import Dataset
from mixcert.errors import GridTooLargeError, UnsupportedDimensionError


def binary_linear_clf(w, bias=0.0):
    """Softmax model with logits (w . x + b, -(w . x + b))."""
    W = np.vstack([np.asarray(w, float), -np.asarray(w, float)])
    b = np.array([bias, -bias])
    return mc.FeedForwardClassifier.from_model(
        mc.FeedForwardModel((mc.Layer(W, b, "identity"),))
    )


class TestBallGrid:
    def test_points_respect_ball(self):
        for norm in (2, "inf"):
            grid = mc.BallGrid(np.zeros(2), 0.5, norm, 41)
            offsets = grid.offsets()
            d = (
                np.linalg.norm(offsets, axis=1)
                if norm == 2
                else np.abs(offsets).max(axis=1)
            )
            assert np.all(d <= 0.5 + 1e-12)

    def test_center_and_extremes_present(self):
        grid = mc.BallGrid(np.array([1.0, -2.0]), 0.3, 2, 21)
        pts = grid.points()
        assert any(np.array_equal(p, [1.0, -2.0]) for p in pts)
        for extreme in ([1.3, -2.0], [0.7, -2.0], [1.0, -1.7], [1.0, -2.3]):
            assert any(np.allclose(p, extreme, atol=1e-12) for p in pts)

    def test_single_point_resolution(self):
        grid = mc.BallGrid(np.array([0.5]), 1.0, 2, 1)
        np.testing.assert_array_equal(grid.points(), [[0.5]])

    def test_even_resolution_rejected(self):
        with pytest.raises(ValueError):
            mc.BallGrid(np.zeros(2), 0.5, 2, 40)

    def test_dimension_cap(self):
        with pytest.raises(UnsupportedDimensionError):
            mc.BallGrid(np.zeros(4), 0.5, 2, 11)

    def test_point_budget(self):
        with pytest.raises(GridTooLargeError):
            mc.BallGrid(np.zeros(3), 0.5, 2, 401)


class TestExhaustiveMinMargin:
    def test_constant_classifier(self):
        class Const:
            def predict_proba(self, X):
                return np.tile([0.9, 0.1], (len(X), 1))

        grid = mc.BallGrid(np.zeros(2), 1.0, "inf", 11)
        assert mc.exhaustive_min_margin(Const(), grid, 0) == pytest.approx(0.8)

    def test_linear_model_minimum_at_boundary(self):
        clf = binary_linear_clf([1.0], bias=0.6)
        grid = mc.BallGrid(np.zeros(1), 0.25, 2, 201)
        # margin p0 - p1 decreases along -x; worst point is x = -0.25
        worst = mc.exhaustive_min_margin(clf, grid, 0)
        z = 2 * (0.6 - 0.25)
        expected = np.tanh(z / 2.0)
        assert worst == pytest.approx(expected, abs=1e-9)

    def test_resolution_one_gives_clean_margin(self):
        clf = binary_linear_clf([1.0], bias=0.6)
        grid = mc.BallGrid(np.zeros(1), 0.25, 2, 1)
        clean = mc.exhaustive_min_margin(clf, grid, 0)
        p = clf.predict_proba(np.zeros((1, 1)))[0]
        assert clean == pytest.approx(p[0] - p[1])

    def test_refinement_only_lowers_minimum(self):
        clf = binary_linear_clf([0.8, -0.5], bias=0.3)
        coarse = mc.exhaustive_min_margin(clf, mc.BallGrid(np.zeros(2), 0.4, 2, 51), 0)
        fine = mc.exhaustive_min_margin(clf, mc.BallGrid(np.zeros(2), 0.4, 2, 101), 0)
        assert fine <= coarse + 1e-12


class TestVerifyCertificate:
    def test_radius_zero_trivially_verified(self, moons_g, moons_h_small):
        mix = mc.MixedClassifier(g=moons_g, h=moons_h_small, alpha=0.75)
        cert = mc.Certificate(0, 0, 1, 0.2, 0.0, "lipschitz_global", 2.0, 0.75)
        verdict = mc.verify_certificate(mix, np.zeros(2), cert)
        assert verdict.ok and verdict.points_checked == 0

    def test_full_weight_certificate_on_linear_model_verifies(self):
        h = binary_linear_clf([0.7, -0.4], bias=0.5)
        g = binary_linear_clf([-1.0, 2.0])
        x = np.array([0.3, -0.2])
        probs = h.predict_proba(x.reshape(1, -1))[0]
        bound = mc.global_lipschitz_upper(h.model_, 2, "probability")
        profile = mc.LipschitzProfile(bound.values, "global_bound", 2)
        cert = mc.lipschitz_radius(probs, profile, 1.0)
        assert cert.radius > 0
        mix = mc.MixedClassifier(g=g, h=h, alpha=1.0)
        verdict = mc.verify_certificate(mix, x, cert, 201)
        assert verdict.ok

    def test_inflated_radius_is_falsified(self):
        h = binary_linear_clf([1.0, 0.0])
        g = binary_linear_clf([1.0, 0.0])
        x = np.array([0.1, 0.0])
        probs = h.predict_proba(x.reshape(1, -1))[0]
        bound = mc.global_lipschitz_upper(h.model_, 2, "probability")
        profile = mc.LipschitzProfile(bound.values, "global_bound", 2)
        cert = mc.lipschitz_radius(probs, profile, 1.0)
        flip_distance = 0.1  # the logit w.x crosses zero at exactly x_1 = 0
        inflated = mc.Certificate(
            cert.index, cert.y, cert.y_prime, cert.margin, 1.5 * cert.radius,
            cert.method, cert.norm, cert.alpha,
        )
        assert 1.5 * cert.radius > flip_distance  # the probe really crosses
        mix = mc.MixedClassifier(g=g, h=h, alpha=1.0)
        verdict = mc.verify_certificate(mix, x, inflated, 201)
        assert not verdict.ok
        assert verdict.counterexample is not None
        # the counterexample exhibits a genuine argmax change
        flipped = mix.predict(verdict.counterexample.reshape(1, -1))[0]
        assert flipped != cert.y

    def test_unbounded_radius_rejected(self, moons_g, moons_h_small):
        mix = mc.MixedClassifier(g=moons_g, h=moons_h_small, alpha=1.0)
        cert = mc.Certificate(0, 0, 1, 0.5, float("inf"), "lipschitz_global", 2.0, 1.0)
        with pytest.raises(ValueError):
            mc.verify_certificate(mix, np.zeros(2), cert)

    def test_heuristic_certificates_rejected(self, moons_g, moons_h_small):
        mix = mc.MixedClassifier(g=moons_g, h=moons_h_small, alpha=0.75)
        cert = mc.Certificate(
            0, 0, 1, 0.2, 0.1, "lipschitz_local", 2.0, 0.75, flags=("heuristic",)
        )
        with pytest.raises(ValueError):
            mc.verify_certificate(mix, np.zeros(2), cert)

    def test_no_false_alarms_on_full_weight_suite(self, moons_g, moons_h_small, moons_test):
        mix = mc.MixedClassifier(g=moons_g, h=moons_h_small, alpha=1.0)
        ds = Dataset(moons_test.X[:25], moons_test.y[:25], 2, "test", 0)
        for cert in mc.certify_dataset(mix, ds, "lipschitz_global", norm=2):
            assert mc.verify_certificate(mix, ds.X[cert.index], cert, 101).ok


class TestFiniteDifferences:
    def test_quadratic_gradient(self):
        grad = mc.finite_diff_gradient(lambda z: float(z @ z), np.array([1.0, 2.0]), 1e-4)
        np.testing.assert_allclose(grad, [2.0, 4.0], atol=1e-6)

    def test_constant_function(self):
        grad = mc.finite_diff_gradient(lambda z: 3.5, np.array([0.3, -0.4, 1.0]))
        np.testing.assert_array_equal(grad, np.zeros(3))

    def test_linear_function_exact(self):
        w = np.array([0.5, -2.0])
        grad = mc.finite_diff_gradient(lambda z: float(w @ z), np.zeros(2), 1e-3)
        np.testing.assert_allclose(grad, w, atol=1e-12)

    def test_step_must_be_positive(self):
        with pytest.raises(ValueError):
            mc.finite_diff_gradient(lambda z: 0.0, np.zeros(1), 0.0)
