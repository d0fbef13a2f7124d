import numpy as np
import pytest

import oracles
from wtal.ctst import (
    CTST,
    AttentionBlock,
    CtstConfig,
    level_lengths,
    temporal_downsample,
    temporal_self_attention,
    temporal_upsample,
    upsample_index,
)
from wtal.data import Batch
from wtal.detector import DetectorConfig, DetectorHead, WeakDetector
from wtal.errors import ConfigurationError, ContractError
from wtal.numerics import AdamState, ParamSet, Tensor, no_grad, seeded_rng
from wtal.oe import (
    OutlierEmbedder,
    oe_forward,
    oe_train_step,
    outlier_position_embedding,
    sinusoidal_encoding,
)
from wtal.regressor import (
    RegressorConfig,
    SeverityRegressor,
    TcnLayer,
    predict_severity,
    regressor_forward,
)


def rng(seed=0):
    return seeded_rng(seed, 77)


class TestOutlierEmbedder:
    def test_full_size_shapes(self):
        model = OutlierEmbedder(1408, rng=rng())
        recon, e = oe_forward(np.zeros((32, 1408)), model)
        assert recon.shape == (32, 1408) and e.shape == (32,)

    def test_zero_decoder(self):
        model = OutlierEmbedder(8, 4, rng())
        model.decoder.weight.data[...] = 0.0
        recon, e = oe_forward(np.zeros((3, 8)), model)
        assert np.all(recon.data == 0) and np.all(e == 0)

    def test_errors_vs_oracle(self):
        r = rng(1)
        model = OutlierEmbedder(8, 3, r)
        x = r.normal((4, 8))
        recon, e = oe_forward(x, model)
        np.testing.assert_allclose(e, oracles.row_mse(x.tolist(), recon.data.tolist()), atol=1e-10)
        assert np.all(e >= 0)

    def test_hidden_must_bottleneck(self):
        with pytest.raises(ConfigurationError):
            OutlierEmbedder(4, 4, rng())

    def test_train_step_rejects_atypical(self):
        model = OutlierEmbedder(4, 2, rng())
        batch = Batch(["a", "b"], np.zeros((2, 3, 4)), np.array([True, False]))
        with pytest.raises(ContractError):
            oe_train_step(batch, model, AdamState.for_params(model.params))

    def test_overfits_fixed_batch(self):
        r = rng(2)
        model = OutlierEmbedder(6, 3, r)
        batch = Batch(["a", "b"], r.normal((2, 5, 6)), np.array([True, True]))
        state = AdamState.for_params(model.params, lr=0.01)
        losses = [oe_train_step(batch, model, state) for _ in range(50)]
        assert losses[-1] < losses[0]


class TestPositionEmbedding:
    def test_equal_errors_double(self):
        pe = sinusoidal_encoding(5, 8)
        np.testing.assert_allclose(outlier_position_embedding(np.full(5, 0.3), 8), 2 * pe,
                                   rtol=1e-7)

    def test_zero_errors_plain(self):
        np.testing.assert_array_equal(outlier_position_embedding(np.zeros(4), 6),
                                      sinusoidal_encoding(4, 6))

    def test_example_scaling(self):
        out = outlier_position_embedding(np.array([0.0, 3.0]), 4)
        pe = sinusoidal_encoding(2, 4)
        np.testing.assert_allclose(out[1], 3 * pe[1], rtol=1e-8)
        np.testing.assert_array_equal(out[0], pe[0])

    def test_sinusoid_values(self):
        pe = sinusoidal_encoding(3, 4)
        np.testing.assert_allclose(pe[2], [np.sin(2), np.cos(2), np.sin(0.02), np.cos(0.02)])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            outlier_position_embedding(np.array([-1.0, 1.0]), 4)


def block(m=8, heads=2, seed=0):
    p = ParamSet()
    return AttentionBlock(p, "b", m, heads, 2 * m, rng(seed)), p


class TestAttention:
    def test_singleton(self):
        b, _ = block()
        _, w = temporal_self_attention(rng().normal((1, 8)), b)
        assert np.all(w.data == 1.0)

    def test_zero_qk_uniform(self):
        b, _ = block()
        b.q.weight.data[...] = 0
        b.q.bias.data[...] = 0
        b.k.weight.data[...] = 0
        _, w = temporal_self_attention(rng().normal((5, 8)), b)
        np.testing.assert_allclose(w.data, 0.2, atol=1e-15)

    def test_vs_oracle(self):
        b, _ = block(seed=3)
        x = rng(4).normal((4, 8))
        _, w = temporal_self_attention(x, b)
        np.testing.assert_allclose(w.data.sum(-1), 1.0, atol=1e-12)
        # the block applies LayerNorm first, and q carries a bias: fold both in
        with no_grad():
            h = b.ln1(Tensor(x)).data
        hq = np.hstack([h, np.ones((4, 1))])
        Wq = np.vstack([b.q.weight.data, b.q.bias.data])
        Wk = np.vstack([b.k.weight.data, np.zeros(8)])
        Wv = np.vstack([b.v.weight.data, b.v.bias.data])
        want_w, want_ctx = oracles.attention(hq.tolist(), Wq.tolist(), Wk.tolist(),
                                             Wv.tolist(), 2)
        np.testing.assert_allclose(w.data[0], want_w, atol=1e-10)
        out = b(Tensor(x[None])).data[0]
        mid = x + np.array(want_ctx) @ b.o.weight.data + b.o.bias.data
        with no_grad():
            silu_in = b.ff1(b.ln2(Tensor(mid))).data
        ff = (silu_in / (1 + np.exp(-silu_in))) @ b.ff2.weight.data + b.ff2.bias.data
        np.testing.assert_allclose(out, mid + ff, atol=1e-10)


class TestPyramidOps:
    def test_downsample_examples(self):
        np.testing.assert_array_equal(temporal_downsample(np.array([[1.0], [3.0]])).data, [[2]])
        np.testing.assert_array_equal(temporal_downsample(np.array([[4.0]])).data, [[4]])
        np.testing.assert_array_equal(
            temporal_downsample(np.array([[1.0], [3.0], [5.0]])).data, [[2], [5]])

    def test_upsample_examples(self):
        np.testing.assert_array_equal(upsample_index(2, 4), [0, 0, 1, 1])
        x = np.arange(4.0).reshape(4, 1)
        np.testing.assert_array_equal(temporal_upsample(x, 4).data, x)
        np.testing.assert_array_equal(temporal_upsample(np.array([[7.0]]), 3).data, [[7]] * 3)
        with pytest.raises(ValueError):
            temporal_upsample(np.zeros((5, 1)), 4)

    def test_level_lengths(self):
        assert level_lengths(5, 3) == [5, 3, 2]
        assert level_lengths(1, 3) == [1, 1, 1]


class TestCTST:
    def test_full_size_shape(self):
        model = CTST(16, CtstConfig(128, 3, 4), rng())
        out = model(rng().normal((32, 16)), np.ones(32))
        assert out.shape == (32, 384)

    def test_odd_length(self):
        model = CTST(4, CtstConfig(8, 3, 2), rng())
        assert model(rng().normal((5, 4)), np.ones(5)).shape == (5, 24)

    def test_single_level_is_first_block(self):
        r = rng(5)
        model = CTST(4, CtstConfig(8, 1, 2), r)
        x, e = r.normal((6, 4)), np.abs(r.normal(6))
        out = model(x, e).data
        h = model.proj(Tensor(x)).data + outlier_position_embedding(e, 8)
        np.testing.assert_allclose(out, model.blocks[0](Tensor(h[None])).data[0], atol=1e-13)

    def test_T_equals_one(self):
        model = CTST(4, CtstConfig(8, 3, 2), rng())
        assert model(rng().normal((1, 4)), np.zeros(1)).shape == (1, 24)

    @pytest.mark.parametrize("kw", [{"levels": 0}, {"model_dim": 10, "heads": 4},
                                    {"model_dim": 3, "heads": 1}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            CtstConfig(**kw)


class TestDetector:
    def test_head_shapes(self):
        head = DetectorHead(384, rng())
        out = head(rng().normal((32, 384)))
        assert out.scores.shape == (32,) and out.embedding.shape == (32, 128)

    def test_zero_weights_half(self):
        head = DetectorHead(6, rng())
        for name in head.params:
            head.params[name].data[...] = 0
        np.testing.assert_array_equal(head(rng().normal((4, 6))).scores.data, 0.5)

    def test_per_token_purity(self):
        head = DetectorHead(6, rng())
        head.fc3.weight.data[...] = rng(1).normal((128, 1))
        x = rng(2).normal((5, 6))
        x[3] = x[1]
        out = head(x)
        assert out.scores.data[1] == out.scores.data[3]
        assert np.array_equal(out.embedding.data[1], out.embedding.data[3])
        perm = np.array([4, 2, 0, 1, 3])
        # equal up to BLAS summation order
        np.testing.assert_allclose(head(x[perm]).scores.data, out.scores.data[perm],
                                   rtol=0, atol=1e-15)

    def test_untrained_detector_is_half(self):
        model = WeakDetector(DetectorConfig(D=8, T=6, model_dim=8, levels=2, heads=2), rng())
        scores = model(rng().normal((6, 8))).scores.data
        np.testing.assert_array_equal(scores, 0.5)

    def test_config_round_trip(self):
        cfg = DetectorConfig(D=20, model_dim=16, heads=2)
        again = DetectorConfig.from_json(cfg.to_json())
        assert again.to_json() == cfg.to_json() and cfg.oe_hidden == 10

    def test_trainable_excludes_buffers(self):
        model = WeakDetector(DetectorConfig(D=8, T=4, model_dim=8, heads=2), rng())
        assert "input.mean" not in model.trainable() and "input.mean" in model.params


def tcn(c_in, c_out, seed=0):
    return TcnLayer(ParamSet(), "t", c_in, c_out, rng(seed))


class TestTcn:
    def test_identity_kernel(self):
        layer = tcn(3, 3)
        layer.kernel.data[...] = 0
        layer.kernel.data[1] = np.eye(3)
        x = rng().normal((5, 3))
        np.testing.assert_allclose(layer(x).data, x / (1 + np.exp(-x)), atol=1e-15)

    def test_single_token_is_linear(self):
        layer = tcn(2, 4)
        x = rng().normal((1, 2))
        z = x @ layer.kernel.data[1] + layer.bias.data
        np.testing.assert_allclose(layer(x).data, z / (1 + np.exp(-z)), atol=1e-15)

    def test_vs_sliding_window(self):
        layer = tcn(2, 3, seed=4)
        layer.bias.data[...] = rng(5).normal(3)
        x = rng(6).normal((5, 2))
        z = np.array(oracles.conv1d_same(x.tolist(), layer.kernel.data.tolist(),
                                         layer.bias.data.tolist()))
        np.testing.assert_allclose(layer(x).data, z / (1 + np.exp(-z)), atol=1e-10)


def regressor(D=6, T=5, seed=0):
    cfg = RegressorConfig(D=D, K=4, T=T, tcn_channels=[8, 6, 4], mlp_hidden=[8, 6])
    return SeverityRegressor(cfg, rng(seed))


class TestRegressor:
    def test_full_size_shape(self):
        model = SeverityRegressor(RegressorConfig(D=1408), rng())
        logits = model(np.zeros((32, 1408)), np.zeros((32, 128)))
        assert logits.shape == (3,)

    def test_duplicate_tokens(self):
        model = regressor()
        for layer in model.tcn:  # no boundary effects
            layer.kernel.data[0] = 0
            layer.kernel.data[2] = 0
        x = np.tile(rng(1).normal((1, 6)), (5, 1))
        e = np.tile(rng(2).normal((1, 128)), (5, 1))
        z = model.token_logits(x, e).data[0]
        assert np.all(z == z[0])
        np.testing.assert_array_equal(model(x, e).data, z[2])

    def test_center_tap_permutation_invariant(self):
        model = regressor(seed=3)
        for layer in model.tcn:
            layer.kernel.data[0] = 0
            layer.kernel.data[2] = 0
        x, e = rng(4).normal((5, 6)), rng(5).normal((5, 128))
        perm = np.array([3, 0, 4, 1, 2])
        np.testing.assert_allclose(model(x[perm], e[perm]).data, model(x, e).data, atol=1e-14)

    def test_max_pool_monotone(self):
        model = regressor(seed=6)
        x, e = rng(7).normal((5, 6)), rng(8).normal((5, 128))
        z = model.token_logits(x, e).data[0]
        np.testing.assert_array_equal(regressor_forward(x, e, model).data, z.max(axis=0))

    def test_prediction_json(self):
        pred = predict_severity(np.array([10.0, 10.0, -10.0]))
        obj = pred.to_json()
        assert obj["class"] == 2 and len(obj["rank_probabilities"]) == 3

    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            regressor()(np.zeros((5, 6)), np.zeros((4, 128)))
