"""Classifier forward/backward against independent oracles."""

import numpy as np
import pytest

import shiftscope as ss
from shiftscope.net import load_net, save_net


def relative_gap(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


class TestInit:
    def test_shapes(self):
        net = ss.init_net([2, 16, 16, 3], seed=7)
        assert [w.shape for w in net.weights] == [(2, 16), (16, 16), (16, 3)]
        assert [b.shape for b in net.biases] == [(16,), (16,), (3,)]

    def test_determinism(self):
        a = ss.init_net([2, 16, 16, 3], seed=7)
        b = ss.init_net([2, 16, 16, 3], seed=7)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_seed_changes_weights(self):
        a = ss.init_net([2, 16, 3], seed=7)
        b = ss.init_net([2, 16, 3], seed=8)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_narrow_penultimate_rejected(self):
        with pytest.raises(ValueError):
            ss.init_net([2, 1, 3], seed=0)

    def test_bad_sizes_rejected(self):
        with pytest.raises(ValueError):
            ss.init_net([], seed=0)
        with pytest.raises(ValueError):
            ss.init_net([2, 0, 3], seed=0)

    def test_fan_in_scale(self):
        net = ss.init_net([100, 50, 4], seed=3)
        assert np.abs(net.weights[0]).max() <= 1 / np.sqrt(100)
        assert all(np.all(b == 0) for b in net.biases)


class TestForward:
    def test_zero_net_gives_zero_logits(self):
        net = ss.init_net([2, 4, 3], seed=0)
        for w in net.weights:
            w[:] = 0.0
        trace = ss.forward(net, np.random.default_rng(0).normal(size=(5, 2)))
        assert np.array_equal(trace.logits, np.zeros((5, 3)))

    def test_single_layer_identity(self):
        net = ss.init_net([2, 2], seed=0)
        net.weights[0][:] = np.eye(2)
        net.biases[0][:] = 0.0
        x = np.random.default_rng(1).normal(size=(4, 2))
        trace = ss.forward(net, x)
        np.testing.assert_array_equal(trace.logits, x)
        # with no hidden layers the penultimate features are the inputs
        np.testing.assert_array_equal(trace.penultimate, x)

    def test_matches_manual_matmul_oracle(self):
        rng = np.random.default_rng(42)
        net = ss.init_net([2, 6, 5, 4], seed=9)
        x = rng.normal(size=(5, 2))
        trace = ss.forward(net, x)
        # independent loop-based oracle
        h = x
        for w, b in zip(net.weights[:-1], net.biases[:-1]):
            z = np.array([[sum(h[i, k] * w[k, j] for k in range(w.shape[0]))
                           + b[j] for j in range(w.shape[1])]
                          for i in range(h.shape[0])])
            h = np.where(z > 0, z, 0.0)
        w, b = net.weights[-1], net.biases[-1]
        logits = np.array([[sum(h[i, k] * w[k, j] for k in range(w.shape[0]))
                            + b[j] for j in range(w.shape[1])]
                           for i in range(h.shape[0])])
        np.testing.assert_allclose(trace.logits, logits, rtol=1e-12)
        assert trace.penultimate.shape == (5, 5)

    def test_dimension_mismatch(self):
        net = ss.init_net([2, 4, 3], seed=0)
        with pytest.raises(ValueError):
            ss.forward(net, np.zeros((5, 3)))


def finite_difference_check(net, x, labels, cfg, h=1e-5, tol=1e-4):
    """Every analytic parameter gradient vs central differences."""
    def value():
        return ss.total_loss(ss.forward(net, x), labels, cfg).total

    trace = ss.forward(net, x)
    bd = ss.total_loss(trace, labels, cfg)
    grads = ss.backward(net, trace, bd.d_logits, bd.d_penultimate,
                        want_input_grad=True)
    worst = 0.0
    for params, anal in ((net.weights, grads.d_weights),
                         (net.biases, grads.d_biases)):
        for li, arr in enumerate(params):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                fp = value()
                arr[idx] = orig - h
                fm = value()
                arr[idx] = orig
                fd = (fp - fm) / (2 * h)
                an = anal[li][idx]
                if abs(an - fd) > max(tol * max(abs(an), abs(fd)), 1e-7):
                    worst = max(worst, relative_gap(an, fd))
    return worst


class TestBackward:
    def test_zero_partials_give_zero_gradients(self):
        net = ss.init_net([3, 5, 4], seed=1)
        x = np.random.default_rng(0).normal(size=(6, 3))
        trace = ss.forward(net, x)
        g = ss.backward(net, trace, np.zeros((6, 4)), np.zeros((6, 5)))
        assert all(np.all(dw == 0) for dw in g.d_weights)
        assert all(np.all(db == 0) for db in g.d_biases)

    @pytest.mark.parametrize("activation", ["relu", "tanh"])
    @pytest.mark.parametrize("residual", [False, True])
    def test_gradients_match_finite_differences(self, activation, residual):
        rng = np.random.default_rng(5)
        net = ss.init_net([3, 6, 6, 4], seed=11, activation=activation,
                          residual=residual)
        x = rng.normal(size=(8, 3))
        labels = np.concatenate([np.arange(1, 5),
                                 rng.integers(1, 5, size=4)])
        cfg = ss.LossConfig(w_dist=0.2, w_var=0.3, w_corr=0.05)
        assert finite_difference_check(net, x, labels, cfg) == 0.0

    def test_input_gradient_linear_net(self):
        net = ss.init_net([3, 2], seed=2)
        x = np.random.default_rng(3).normal(size=(4, 3))
        trace = ss.forward(net, x)
        d_logits = np.random.default_rng(4).normal(size=(4, 2))
        g = ss.backward(net, trace, d_logits, want_input_grad=True)
        np.testing.assert_allclose(g.d_input, d_logits @ net.weights[0].T,
                                   rtol=1e-12)

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        net = ss.init_net([2, 5, 5, 3], seed=13)
        x = rng.normal(size=(4, 2))
        labels = np.array([1, 2, 3, 1])
        cfg = ss.LossConfig.ce_only()

        trace = ss.forward(net, x)
        bd = ss.total_loss(trace, labels, cfg)
        g = ss.backward(net, trace, bd.d_logits, bd.d_penultimate,
                        want_input_grad=True)
        h = 1e-6
        for idx in np.ndindex(x.shape):
            orig = x[idx]
            x[idx] = orig + h
            fp = ss.total_loss(ss.forward(net, x), labels, cfg).total
            x[idx] = orig - h
            fm = ss.total_loss(ss.forward(net, x), labels, cfg).total
            x[idx] = orig
            fd = (fp - fm) / (2 * h)
            assert relative_gap(g.d_input[idx], fd, floor=1e-6) < 1e-4

    def test_shape_mismatch_rejected(self):
        net = ss.init_net([3, 5, 4], seed=1)
        trace = ss.forward(net, np.zeros((6, 3)))
        with pytest.raises(ValueError):
            ss.backward(net, trace, np.zeros((6, 5)))
        with pytest.raises(ValueError):
            ss.backward(net, trace, np.zeros((6, 4)), np.zeros((6, 4)))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        net = ss.init_net([2, 8, 8, 3], seed=21, activation="tanh",
                          residual=True)
        path = tmp_path / "model.ssp"
        save_net(net, path)
        loaded = load_net(path)
        assert loaded.layer_sizes == net.layer_sizes
        assert loaded.activation == "tanh"
        assert loaded.residual is True
        for a, b in zip(net.weights, loaded.weights):
            assert np.array_equal(a, b)
        for a, b in zip(net.biases, loaded.biases):
            assert np.array_equal(a, b)

    def test_byte_identical_rewrites(self, tmp_path):
        net = ss.init_net([2, 4, 3], seed=5)
        p1, p2 = tmp_path / "a.ssp", tmp_path / "b.ssp"
        save_net(net, p1)
        save_net(net, p2)
        assert p1.read_bytes() == p2.read_bytes()
