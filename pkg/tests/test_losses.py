import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wtal.errors import ConfigurationError, DataError
from wtal.losses import (
    LossConfig,
    corn_loss,
    corn_predict,
    err,
    pseudo_labels,
    ranking_hinge,
    reconstruction_loss,
    self_rectifying_loss,
)
from wtal.numerics import seeded_rng

SIG10 = math.log1p(math.exp(-10.0))  # -ln(1 - sigmoid(-10)) ~ 4.54e-5


def val(t):
    return float(np.asarray(t.data))


class TestReconstruction:
    def test_zero_residual(self):
        x = np.ones((1, 3, 2))
        assert val(reconstruction_loss(x, x)) == 0.0

    def test_frobenius_example(self):
        assert val(reconstruction_loss(np.array([[1.0, 2.0]]), np.zeros((1, 2)))) == 5.0

    def test_random_vs_oracle(self):
        rng = seeded_rng(10)
        for _ in range(100):
            B, T, D = (int(v) for v in rng.integers(1, 4, size=3))
            x, r = rng.normal((B, T, D)), rng.normal((B, T, D))
            assert abs(val(reconstruction_loss(x, r)) - oracles.reconstruction_loss(
                x.tolist(), r.tolist())) <= 1e-10


class TestHinge:
    @pytest.mark.parametrize("s_a,s_t,want", [
        ([1, 1], [0, 0], 0.0),
        ([0, 0], [0, 0], 1.0),
        ([0.5, 0.25], [0.5, 0.5], 1.25),
    ])
    def test_examples(self, s_a, s_t, want):
        assert val(ranking_hinge(np.array(s_a, float), np.array(s_t, float))) == pytest.approx(
            want, abs=1e-15)

    def test_random_vs_oracle(self):
        rng = seeded_rng(11)
        for _ in range(100):
            T = rng.integers(1, 6)
            a, t = rng.uniform(T) * 0.4, rng.uniform(T) * 0.4
            assert abs(val(ranking_hinge(a, t)) - oracles.hinge(a.tolist(), t.tolist())) <= 1e-10

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.data())
    def test_range_and_monotone(self, s_a, data):
        s_t = data.draw(st.lists(st.floats(0, 1), min_size=len(s_a), max_size=len(s_a)))
        a, t = np.array(s_a), np.array(s_t)
        h = val(ranking_hinge(a, t))
        assert 0.0 <= h <= 1 + len(s_a)
        bumped = a.copy()
        bumped[0] = min(1.0, bumped[0] + 0.1)
        assert val(ranking_hinge(bumped, t)) <= h + 1e-12


class TestErr:
    def test_examples(self):
        assert val(err(np.zeros(3), "typical")) == 0.0
        assert val(err(np.array([1.0, 0.0]), "typical")) == 0.5
        assert val(err(np.array([0.2, 0.9]), "autistic")) == pytest.approx(0.025, abs=1e-15)

    def test_pseudo_label_tie_is_typical(self):
        np.testing.assert_array_equal(pseudo_labels(np.array([0.5, 0.51, 0.49])), [0, 1, 0])

    def test_mean_threshold(self):
        cfg = LossConfig(sref="mean")
        s = np.array([0.1, 0.2, 0.6])
        np.testing.assert_array_equal(pseudo_labels(s, "mean"), [0, 0, 1])
        assert val(err(s, "autistic", cfg)) == pytest.approx(
            oracles.err_autistic(s.tolist(), "mean"), abs=1e-15)

    def test_random_vs_oracle(self):
        rng = seeded_rng(12)
        for i in range(100):
            s = rng.uniform(int(rng.integers(1, 8)))
            sref = "mean" if i % 2 else 0.5
            cfg = LossConfig(sref=sref)
            assert abs(val(err(s, "typical", cfg)) - oracles.err_typical(s.tolist())) <= 1e-10
            assert abs(val(err(s, "autistic", cfg))
                       - oracles.err_autistic(s.tolist(), sref)) <= 1e-10

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            err(np.zeros(2), "other")


class TestSelfRectifying:
    def test_all_zero_example(self):
        assert val(self_rectifying_loss(np.ones(2), np.zeros(2))) == 0.0

    def test_worked_example(self):
        got = val(self_rectifying_loss(np.array([0.2, 0.9]), np.array([0.1, 0.1])))
        assert got == pytest.approx(0.115, abs=1e-15)

    def test_lambda2_zero_is_hinge(self):
        rng = seeded_rng(13)
        a, t = rng.uniform(4) * 0.3, rng.uniform(4) * 0.3
        cfg = LossConfig(lambda1=0.7, lambda2=0.0)
        assert val(self_rectifying_loss(a, t, cfg)) == 0.7 * val(ranking_hinge(a, t))

    def test_both_lambdas_zero(self):
        cfg = LossConfig(lambda1=0.0, lambda2=0.0)
        assert val(self_rectifying_loss(np.array([0.2, 0.9]), np.array([0.1, 0.4]), cfg)) == 0.0

    def test_random_vs_oracle(self):
        rng = seeded_rng(14)
        for i in range(100):
            P, T = int(rng.integers(1, 4)), int(rng.integers(1, 6))
            a, t = rng.uniform((P, T)), rng.uniform((P, T))
            cfg = LossConfig(lambda1=float(rng.uniform()) * 2, lambda2=float(rng.uniform()) * 2,
                             sref="mean" if i % 3 == 0 else 0.5,
                             mode="sum" if i % 2 else "diff")
            want = oracles.self_rectifying(list(zip(a.tolist(), t.tolist())), cfg.lambda1,
                                           cfg.lambda2, cfg.sref, cfg.mode)
            assert abs(val(self_rectifying_loss(a, t, cfg)) - want) <= 1e-10

    @pytest.mark.parametrize("kwargs", [{"lambda1": -1}, {"sref": 1.5}, {"sref": "median"},
                                        {"mode": "max"}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigurationError):
            LossConfig(**kwargs)


class TestCorn:
    def test_label_zero(self):
        got = val(corn_loss(np.array([[-10.0, -10.0, -10.0]]), [0], 4))
        assert got == pytest.approx(SIG10, rel=1e-12)

    def test_top_label(self):
        got = val(corn_loss(np.array([[10.0, 10.0, 10.0]]), [3], 4))
        assert got == pytest.approx(SIG10, rel=1e-12)

    def test_limit_case(self):
        z = np.array([[60.0, 60.0, -60.0]])
        assert val(corn_loss(z, [2], 4)) < 1e-25

    def test_label_out_of_range(self):
        with pytest.raises(DataError):
            corn_loss(np.zeros((1, 3)), [4], 4)
        with pytest.raises(DataError):
            corn_loss(np.zeros((1, 3)), [-1], 4)

    def test_empty_tasks_contribute_zero(self):
        # only label 0: tasks 2 and 3 include nobody
        z = np.array([[0.3, 5.0, -7.0], [-1.2, 100.0, 100.0]])
        got = val(corn_loss(z, [0, 0], 4))
        want = (oracles.softplus(0.3) + oracles.softplus(-1.2)) / 2
        assert got == pytest.approx(want, abs=1e-12)

    def test_random_vs_oracle(self):
        rng = seeded_rng(15)
        for _ in range(100):
            K = int(rng.integers(2, 6))
            B = int(rng.integers(1, 6))
            z = rng.normal((B, K - 1)) * 3
            y = rng.integers(0, K - 1, size=B)
            assert abs(val(corn_loss(z, y, K)) - oracles.corn(z.tolist(), y.tolist())) <= 1e-10


class TestCornPredict:
    @pytest.mark.parametrize("z,label", [((-10, -10, -10), 0), ((10, 10, -10), 2),
                                         ((10, 10, 10), 3)])
    def test_examples(self, z, label):
        cls, probs = corn_predict(np.array(z, float))
        assert cls == label
        np.testing.assert_allclose(probs, oracles.corn_probs(list(map(float, z))), rtol=1e-12)

    def test_batch(self):
        cls, probs = corn_predict(np.array([[10.0, 10.0, -10.0], [-10.0, 0.0, 0.0]]))
        np.testing.assert_array_equal(cls, [2, 0])
        assert probs.shape == (2, 3)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
    def test_non_increasing(self, z):
        _, probs = corn_predict(np.array(z))
        assert np.all(np.diff(probs) <= 0)
