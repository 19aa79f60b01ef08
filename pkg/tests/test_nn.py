import io
import math

import numpy as np
import pytest

from p3speller import nn
from p3speller.errors import DimensionError, DivergenceError, FormatError

TINY = nn.Architecture(n_samples=12, n_channels=5, spatial_filters=4,
                       temporal_kernel=3, temporal_stride=3,
                       temporal_filters=3, dense_units=8)


def tiny_model(seed=0, dropout=0.8, dtype=np.float64, **kw):
    cfg = nn.TrainConfig(dropout=dropout, **kw)
    return nn.SpatioSequentialCNN(config=cfg, arch=TINY, seed=seed,
                                  dtype=dtype)


class TestArchitecture:
    def test_per_layer_parameter_counts(self):
        model = nn.build_model(seed=0)
        counts = [c for _, c in model.parameter_counts()]
        assert counts == [256, 0, 2080, 0, 10256, 64, 0, 16512, 16512, 129]

    def test_total_parameters(self):
        assert nn.build_model(seed=0).total_parameters() == 45809

    def test_conv_layer_counts(self):
        counts = dict(nn.build_model(seed=0).parameter_counts())
        assert counts["conv_2d"] == 1 * 64 * 1 * 32 + 32 == 2080
        assert counts["conv_1d"] == 20 * 32 * 16 + 16 == 10256
        assert counts["batch_norm_1"] == 4 * 64 == 256
        assert counts["dense_out"] == 129

    @pytest.mark.parametrize("batch", [1, 4])
    def test_activation_shape_trace(self, batch):
        model = nn.build_model(seed=1)
        assert model.activation_shapes(batch) == [
            (160, 64), (160, 64, 1), (160, 1, 32), (160, 32), (8, 16),
            (8, 16), (8, 16), (128,), (128,), (1,)]

    def test_shape_mismatch_rejected(self):
        model = nn.build_model(seed=1)
        with pytest.raises(DimensionError):
            model.forward(np.zeros((2, 100, 64)), training=False)


class TestForward:
    def test_inference_deterministic(self):
        model = tiny_model(seed=3)
        x = np.random.default_rng(0).standard_normal((5, 12, 5))
        a = model.forward(x, training=False)
        b = model.forward(x, training=False)
        assert np.array_equal(a, b)

    def test_zeroed_output_head_gives_half(self):
        model = tiny_model(seed=4)
        head = model.layers[-1][1]
        head.params["w"][:] = 0.0
        head.params["b"][:] = 0.0
        x = np.random.default_rng(1).standard_normal((3, 12, 5))
        assert np.all(model.forward(x, training=False) == 0.5)

    def test_outputs_are_probabilities(self):
        model = tiny_model(seed=5)
        x = np.random.default_rng(2).standard_normal((16, 12, 5))
        p = model.forward(x, training=False)
        assert np.all((p > 0) & (p < 1))

    def test_dropout_ignored_at_inference(self):
        model = tiny_model(seed=6)
        x = np.random.default_rng(3).standard_normal((4, 12, 5))
        a = model.forward(x, training=False, dropout_seed=1)
        b = model.forward(x, training=False, dropout_seed=999)
        assert np.array_equal(a, b)

    def test_training_mode_dropout_varies_with_seed(self):
        model = tiny_model(seed=6)
        x = np.random.default_rng(3).standard_normal((4, 12, 5))
        a = model.forward(x, training=True, dropout_seed=1)
        b = model.forward(x, training=True, dropout_seed=2)
        assert not np.array_equal(a, b)


class TestLoss:
    def test_perfect_prediction_loss_near_zero(self):
        y = np.array([1.0, 0.0, 1.0])
        assert nn.bce_loss(y, y) <= 1e-6

    def test_uniform_prediction_is_ln2(self):
        p = np.full(8, 0.5)
        y = np.array([0, 1] * 4, dtype=float)
        assert nn.bce_loss(p, y) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_clamp_prevents_infinity(self):
        assert np.isfinite(nn.bce_loss(np.array([0.0, 1.0]),
                                       np.array([1.0, 0.0])))


class TestTrainStep:
    def test_step_decreases_loss_on_refed_batch(self):
        model = tiny_model(seed=7, dropout=0.0, learning_rate=1e-3,
                           dtype=np.float32)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((8, 12, 5)).astype(np.float32)
        y = rng.integers(0, 2, 8).astype(np.float32)
        opt = nn.Adam(model)
        before = nn.bce_loss(model.forward(x, training=True), y)
        nn.train_step(model, opt, x, y)
        after = nn.bce_loss(model.forward(x, training=True), y)
        assert after < before

    def test_adam_state_shape_and_counter(self):
        model = tiny_model(seed=8, dropout=0.0)
        opt = nn.Adam(model)
        x = np.random.default_rng(5).standard_normal((4, 12, 5))
        y = np.zeros(4)
        nn.train_step(model, opt, x, y)
        nn.train_step(model, opt, x, y)
        assert opt.t == 2
        for name, p, _ in model.parameters():
            assert opt.v[name].shape == p.shape
            assert np.all(opt.v[name] >= 0.0)

    def test_misaligned_labels_rejected(self):
        model = tiny_model(seed=8)
        with pytest.raises(ValueError, match="align"):
            nn.train_step(model, nn.Adam(model),
                          np.zeros((4, 12, 5)), np.zeros(3))


class TestTrain:
    def _separable(self, n=160, seed=0):
        rng = np.random.default_rng(seed)
        y = np.arange(n) % 2 == 0
        x = rng.standard_normal((n, 12, 5)).astype(np.float32) * 0.3
        x[y] += 2.5
        return x, y

    def test_separable_set_reaches_high_accuracy(self):
        x, y = self._separable()
        cfg = nn.TrainConfig(epochs=30, batch_size=16, seed=1)
        model = nn.SpatioSequentialCNN(config=cfg, arch=TINY, seed=2,
                                       dtype=np.float32)
        nn.train(model, x, y, cfg)
        acc = np.mean((model.predict_proba(x) >= 0.5) == y)
        assert acc >= 0.99

    def test_training_is_deterministic(self):
        x, y = self._separable(n=64, seed=1)
        cfg = nn.TrainConfig(epochs=5, batch_size=16, seed=3)
        runs = []
        for _ in range(2):
            model = nn.SpatioSequentialCNN(config=cfg, arch=TINY, seed=4,
                                           dtype=np.float32)
            nn.train(model, x, y, cfg)
            runs.append([p.copy() for _, p, _ in model.parameters()])
        for a, b in zip(*runs):
            assert np.array_equal(a, b)

    def test_history_length_and_final_mode(self):
        x, y = self._separable(n=32, seed=2)
        cfg = nn.TrainConfig(epochs=7, batch_size=8, seed=0)
        model = nn.SpatioSequentialCNN(config=cfg, arch=TINY, seed=5,
                                       dtype=np.float32)
        history = nn.train(model, x, y, cfg)
        assert len(history) == 7
        assert {"epoch", "loss", "accuracy"} <= set(history[0])
        assert model.mode == "inference"

    def test_divergence_carries_history(self):
        x, y = self._separable(n=32, seed=3)
        cfg = nn.TrainConfig(epochs=3, batch_size=8, seed=0)
        model = nn.SpatioSequentialCNN(config=cfg, arch=TINY, seed=6,
                                       dtype=np.float32)
        model.layers[-1][1].params["b"][:] = np.nan
        with pytest.raises(DivergenceError) as err:
            nn.train(model, x, y, cfg)
        assert err.value.history == []


class TestGradientCheck:
    def test_tiny_model_ten_seeds(self):
        rng = np.random.default_rng(100)
        for seed in range(10):
            model = tiny_model(seed=seed)
            x = rng.standard_normal((3, 12, 5))
            y = rng.integers(0, 2, 3)
            assert nn.gradient_check(model, x, y) < 1e-4

    def test_zero_input_zero_label_closed_form(self):
        # all-zero input flows to logit 0 through zero biases: p = 0.5,
        # so d(loss)/d(output bias) = p - y = 0.5
        model = tiny_model(seed=11)
        probs = model.forward(np.zeros((1, 12, 5)), training=False)
        assert probs[0] == 0.5
        model.backward(np.array([[probs[0] - 0.0]]))
        assert model.layers[-1][1].grads["b"][0] == pytest.approx(0.5)

    def test_each_layer_type_individually(self):
        rng = np.random.default_rng(7)
        h = 1e-6

        def fd_check(layer, x, training):
            out = layer.forward(x, training=training)
            w = rng.standard_normal(out.shape)
            dx = layer.backward(w)
            for _ in range(10):
                idx = tuple(rng.integers(0, s) for s in x.shape)
                xp, xm = x.copy(), x.copy()
                xp[idx] += h
                xm[idx] -= h
                num = (np.sum(layer.forward(xp, training=training) * w)
                       - np.sum(layer.forward(xm, training=training) * w)) \
                    / (2 * h)
                assert abs(dx[idx] - num) < 1e-5 * max(1.0, abs(num))

        x = rng.standard_normal((4, 6, 3))
        bn = nn.BatchNorm(3, dtype=np.float64)
        bn.params["gamma"] = rng.standard_normal(3)
        fd_check(bn, x, training=True)     # gradient through batch stats
        fd_check(bn, x, training=False)
        fd_check(nn.SpatialConv(3, 4, rng, np.float64),
                 rng.standard_normal((4, 6, 3, 1)), False)
        fd_check(nn.TemporalConv(2, 2, 3, 4, rng, np.float64),
                 rng.standard_normal((4, 6, 3)), False)
        fd_check(nn.LeakyReLU(0.3), rng.standard_normal((4, 6)), False)
        fd_check(nn.Dense(6, 4, rng, "tanh", 0.0, np.float64),
                 rng.standard_normal((4, 6)), False)

    def test_overlapping_temporal_conv_gradient(self):
        # stride < kernel exercises the scatter-add backward path
        rng = np.random.default_rng(8)
        layer = nn.TemporalConv(4, 2, 2, 3, rng, np.float64)
        x = rng.standard_normal((2, 10, 2))
        out = layer.forward(x)
        w = rng.standard_normal(out.shape)
        dx = layer.backward(w)
        h = 1e-6
        for idx in [(0, 0, 0), (0, 4, 1), (1, 9, 0)]:
            xp, xm = x.copy(), x.copy()
            xp[idx] += h
            xm[idx] -= h
            num = (np.sum(layer.forward(xp) * w)
                   - np.sum(layer.forward(xm) * w)) / (2 * h)
            assert abs(dx[idx] - num) < 1e-6


class TestBatchNormBehavior:
    def test_running_stats_converge_on_stationary_stream(self):
        rng = np.random.default_rng(9)
        bn = nn.BatchNorm(4, momentum=0.99, dtype=np.float64)
        x = rng.standard_normal((64, 4)) * 2.0 + 3.0
        target_mean = x.mean(axis=0)
        gaps = []
        for _ in range(100):
            bn.forward(x, training=True)
            gaps.append(np.abs(bn.buffers["running_mean"] - target_mean).max())
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < gaps[0] * 0.75

    def test_running_variance_nonnegative(self):
        rng = np.random.default_rng(10)
        bn = nn.BatchNorm(3, dtype=np.float64)
        for _ in range(20):
            bn.forward(rng.standard_normal((8, 3)), training=True)
            assert np.all(bn.buffers["running_var"] >= 0.0)


class TestDropout:
    def test_inverted_dropout_preserves_mean(self):
        rng = np.random.default_rng(11)
        n = 200000
        mask = nn.dropout_mask((n,), 0.8, rng)
        x = np.full(n, 3.0)
        mean = np.mean(x * mask)
        sigma = np.std(x * mask) / math.sqrt(n)
        assert abs(mean - 3.0) <= 3.0 * sigma

    def test_drop_fraction_matches_rate(self):
        rng = np.random.default_rng(12)
        mask = nn.dropout_mask((100000,), 0.8, rng)
        assert np.mean(mask == 0.0) == pytest.approx(0.8, abs=0.01)


class TestWeightsFile:
    def test_round_trip_bitwise_forward(self):
        model = tiny_model(seed=13, dtype=np.float32)
        nn.train(model, np.random.default_rng(0)
                 .standard_normal((8, 12, 5)).astype(np.float32),
                 np.zeros(8, dtype=bool),
                 nn.TrainConfig(epochs=1, batch_size=4, dropout=0.8))
        buf = io.BytesIO()
        model.save_weights(buf)
        buf.seek(0)
        back = nn.SpatioSequentialCNN.load_weights(buf)
        x = np.random.default_rng(1).standard_normal((4, 12, 5))
        assert np.array_equal(model.forward(x, training=False),
                              back.forward(x, training=False))

    def test_magic_bytes(self):
        model = tiny_model(seed=14)
        buf = io.BytesIO()
        model.save_weights(buf)
        assert buf.getvalue()[:4] == b"SPSQ"

    def test_wrong_shape_rejected(self):
        model = tiny_model(seed=15)
        buf = io.BytesIO()
        model.save_weights(buf)
        blob = buf.getvalue()
        # keep the header but swap in a mismatched architecture
        other = nn.SpatioSequentialCNN(
            config=model.config,
            arch=nn.Architecture(n_samples=12, n_channels=5,
                                 spatial_filters=4, temporal_kernel=3,
                                 temporal_stride=3, temporal_filters=3,
                                 dense_units=16),
            seed=15, dtype=np.float64)
        buf2 = io.BytesIO()
        other.save_weights(buf2)
        import json, struct
        hlen = struct.unpack("<I", blob[5:9])[0]
        header = json.loads(blob[9:9 + hlen])
        other_blob = buf2.getvalue()
        hlen2 = struct.unpack("<I", other_blob[5:9])[0]
        header2 = json.loads(other_blob[9:9 + hlen2])
        header2["arch"] = header["arch"]  # shapes now disagree with blocks
        hb = json.dumps(header2, sort_keys=True,
                        separators=(",", ":")).encode()
        forged = (other_blob[:5] + struct.pack("<I", len(hb)) + hb
                  + other_blob[9 + hlen2:])
        with pytest.raises((DimensionError, FormatError)):
            nn.SpatioSequentialCNN.load_weights(io.BytesIO(forged))

    def test_unsupported_version_byte(self):
        model = tiny_model(seed=16)
        buf = io.BytesIO()
        model.save_weights(buf)
        blob = buf.getvalue()
        with pytest.raises(FormatError, match="version"):
            nn.SpatioSequentialCNN.load_weights(
                io.BytesIO(blob[:4] + b"\x02" + blob[5:]))
