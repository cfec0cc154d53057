"""From-scratch network building blocks against hand and finite-difference oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hockeydda import nets
from hockeydda.errors import ConfigurationError, ShapeError

REL_TOL = 1e-4


def rel_err(analytic, numeric):
    denom = max(np.linalg.norm(numeric), 1e-12)
    return np.linalg.norm(analytic - numeric) / denom


class TestLayout:
    def test_policy_parameter_count(self):
        layout = nets.mlp_layout((8, 80, 80, 80, 2))
        assert nets.layout_size(layout) == 13842

    def test_layout_size_matches_vector_length(self):
        for dims in [(3, 4), (5, 7, 2), (8, 80, 80, 80, 2)]:
            layout = nets.mlp_layout(dims)
            p = nets.init_params(layout, seed=0)
            assert len(p.values) == nets.layout_size(layout)
        lstm = nets.lstm_layout(10, 10, 2)
        p = nets.init_params(lstm, seed=0)
        assert len(p.values) == nets.layout_size(lstm)

    def test_empty_layout_rejected(self):
        with pytest.raises(ConfigurationError):
            nets.init_params((), seed=0)


class TestInit:
    def test_deterministic(self):
        layout = nets.mlp_layout((4, 6, 2))
        a = nets.init_params(layout, seed=3)
        b = nets.init_params(layout, seed=3)
        assert np.array_equal(a.values, b.values)

    def test_fc_biases_zero_and_weights_bounded(self):
        layout = nets.mlp_layout((4, 6, 2))
        p = nets.init_params(layout, seed=1)
        for spec, (w, b) in zip(layout, nets.fc_views(p.values, layout)):
            bound = np.sqrt(6.0 / (spec.input_dim + spec.output_dim))
            assert np.all(b == 0.0)
            assert np.all(np.abs(w) <= bound)

    def test_lstm_forget_bias_one(self):
        layout = nets.lstm_layout(3, 4, 2)
        p = nets.init_params(layout, seed=1)
        for spec, views in zip(layout, nets.lstm_views(p.values, layout)):
            bias = views[-1]
            h = spec.output_dim
            assert np.all(bias[h:2 * h] == 1.0)  # forget gate slice
            assert np.all(bias[:h] == 0.0)


class TestMlpForward:
    def test_zero_params_tanh_outputs_zero(self):
        layout = nets.mlp_layout((3, 4, 2), output_activation=nets.TANH)
        p = nets.ParamVector(np.zeros(nets.layout_size(layout)), layout)
        out, _ = nets.mlp_forward(p, np.ones(3))
        assert np.all(out == 0.0)

    def test_single_affine_layer_hand_value(self):
        layout = nets.mlp_layout((1, 1), output_activation=nets.IDENTITY)
        p = nets.ParamVector(np.array([2.0, 0.5]), layout)
        out, _ = nets.mlp_forward(p, np.array([3.0]))
        assert out[0] == pytest.approx(6.5, abs=1e-14)

    def test_policy_output_in_unit_box(self):
        layout = nets.mlp_layout((8, 80, 80, 80, 2), output_activation=nets.TANH)
        p = nets.init_params(layout, seed=0)
        rng = np.random.default_rng(0)
        out, _ = nets.mlp_forward(p, rng.uniform(-1, 1, 8))
        assert out.shape == (2,)
        assert np.all(np.abs(out) <= 1.0)

    def test_shape_mismatch_rejected(self):
        layout = nets.mlp_layout((3, 2))
        p = nets.init_params(layout, seed=0)
        with pytest.raises(ShapeError):
            nets.mlp_forward(p, np.ones(5))


class TestMlpBackward:
    def test_zero_upstream_gives_zero_grads(self):
        layout = nets.mlp_layout((3, 4, 2))
        p = nets.init_params(layout, seed=2)
        x = np.ones(3)
        _, cache = nets.mlp_forward(p, x)
        grads, din = nets.mlp_backward(p, cache, np.zeros(2))
        assert np.all(grads == 0.0)
        assert np.all(din == 0.0)

    def test_single_layer_hand_gradients(self):
        layout = nets.mlp_layout((1, 1), output_activation=nets.IDENTITY)
        p = nets.ParamVector(np.array([2.0, 0.0]), layout)
        _, cache = nets.mlp_forward(p, np.array([3.0]))
        grads, din = nets.mlp_backward(p, cache, np.array([1.0]))
        assert grads[0] == pytest.approx(3.0)   # dW
        assert grads[1] == pytest.approx(1.0)   # db
        assert din[0] == pytest.approx(2.0)

    @pytest.mark.parametrize("dims", [(3, 5, 2), (4, 8, 8, 3)])
    def test_matches_finite_differences(self, dims):
        rng = np.random.default_rng(hash(dims) % 2**31)
        layout = nets.mlp_layout(dims)
        for trial in range(5):
            p = nets.init_params(layout, seed=trial)
            x = rng.uniform(-1, 1, dims[0])
            target = rng.uniform(-1, 1, dims[-1])

            def loss(values):
                out, _ = nets.mlp_forward(p.with_values(values), x)
                return 0.5 * float(np.sum((out - target) ** 2))

            out, cache = nets.mlp_forward(p, x)
            grads, _ = nets.mlp_backward(p, cache, out - target)
            fd = nets.finite_diff_grad(loss, p.values)
            assert rel_err(grads, fd) < REL_TOL


class TestLstm:
    def test_zero_params_zero_hidden(self):
        layout = nets.lstm_layout(3, 4, 2)
        p = nets.ParamVector(np.zeros(nets.layout_size(layout)), layout)
        h, _ = nets.lstm_forward(p, np.ones((5, 3)))
        assert np.all(h == 0.0)

    def test_single_step_matches_manual_recurrence(self):
        layout = nets.lstm_layout(2, 3, 1)
        p = nets.init_params(layout, seed=4)
        x = np.array([[0.3, -0.7]])
        h, _ = nets.lstm_forward(p, x)
        (w_x, w_h, b), = nets.lstm_views(p.values, layout)
        gates = x[0] @ w_x.T + np.zeros(3) @ w_h.T + b
        sig = lambda z: 1.0 / (1.0 + np.exp(-z))
        i, f, g, o = (sig(gates[0:3]), sig(gates[3:6]),
                      np.tanh(gates[6:9]), sig(gates[9:12]))
        c = i * g
        expected = o * np.tanh(c)
        assert np.allclose(h, expected, atol=1e-12)

    def test_empty_sequence_rejected(self):
        layout = nets.lstm_layout(2, 3, 1)
        p = nets.init_params(layout, seed=0)
        with pytest.raises(Exception):
            nets.lstm_forward(p, np.zeros((0, 2)))

    def test_zero_upstream_zero_grads(self):
        layout = nets.lstm_layout(2, 3, 2)
        p = nets.init_params(layout, seed=0)
        _, cache = nets.lstm_forward(p, np.ones((4, 2)))
        grads, _ = nets.lstm_backward(p, cache, np.zeros(3))
        assert np.all(grads == 0.0)

    @pytest.mark.parametrize("seq_len", [1, 6])
    def test_matches_finite_differences(self, seq_len):
        rng = np.random.default_rng(seq_len)
        layout = nets.lstm_layout(3, 4, 2)
        for trial in range(4):
            p = nets.init_params(layout, seed=trial + 10)
            x = rng.uniform(-1, 1, (seq_len, 3))
            target = rng.uniform(-1, 1, 4)

            def loss(values):
                h, _ = nets.lstm_forward(p.with_values(values), x)
                return 0.5 * float(np.sum((h - target) ** 2))

            h, cache = nets.lstm_forward(p, x)
            grads, _ = nets.lstm_backward(p, cache, h - target)
            fd = nets.finite_diff_grad(loss, p.values)
            assert rel_err(grads, fd) < REL_TOL


class TestFiniteDiffGrad:
    def test_quadratic_is_exact(self):
        theta = np.array([0.3, -1.2, 2.0])
        fd = nets.finite_diff_grad(lambda v: 0.5 * float(v @ v), theta)
        assert np.allclose(fd, theta, atol=1e-9)

    def test_product_loss(self):
        fd = nets.finite_diff_grad(lambda v: float(v[0] * v[1]),
                                   np.array([2.0, 3.0]))
        assert np.allclose(fd, [3.0, 2.0], atol=1e-8)

    def test_constant_loss(self):
        fd = nets.finite_diff_grad(lambda v: 1.0, np.zeros(4))
        assert np.all(fd == 0.0)


class TestOptimizers:
    def test_sgd_zero_grad_no_change(self):
        layout = nets.mlp_layout((2, 2))
        p = nets.init_params(layout, seed=0)
        opt = nets.make_optimizer(nets.SGD, lr=0.1)
        p2, _ = nets.optimizer_step(opt, p, np.zeros(len(p.values)))
        assert np.array_equal(p2.values, p.values)

    def test_sgd_arithmetic(self):
        layout = nets.mlp_layout((1, 1), output_activation=nets.IDENTITY)
        p = nets.ParamVector(np.array([1.0, 1.0]), layout)
        opt = nets.make_optimizer(nets.SGD, lr=0.1)
        p2, _ = nets.optimizer_step(opt, p, np.array([2.0, 2.0]))
        assert np.allclose(p2.values, [0.8, 0.8], atol=1e-14)

    def test_adaptive_moments_first_step_magnitude(self):
        layout = nets.mlp_layout((1, 1), output_activation=nets.IDENTITY)
        p = nets.ParamVector(np.array([1.0, 1.0]), layout)
        opt = nets.make_optimizer(nets.ADAPTIVE_MOMENTS, lr=0.001)
        p2, _ = nets.optimizer_step(opt, p, np.array([1.0, 1.0]))
        delta = p.values - p2.values
        assert np.allclose(delta, 0.001, atol=1e-6)

    def test_shape_mismatch_rejected(self):
        layout = nets.mlp_layout((2, 2))
        p = nets.init_params(layout, seed=0)
        opt = nets.make_optimizer(nets.SGD, lr=0.1)
        with pytest.raises(ShapeError):
            nets.optimizer_step(opt, p, np.zeros(3))


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        layout = nets.mlp_layout((4, 6, 2))
        p = nets.init_params(layout, seed=9)
        path = tmp_path / "net.ckpt"
        nets.save_checkpoint(path, p, meta={"seed": 9})
        loaded, meta = nets.load_checkpoint(path)
        assert np.array_equal(loaded.values, p.values)
        assert loaded.layout == p.layout
        assert meta["seed"] == 9

    def test_version_mismatch_rejected(self, tmp_path):
        import json
        layout = nets.mlp_layout((2, 2))
        p = nets.init_params(layout, seed=0)
        path = tmp_path / "net.ckpt"
        nets.save_checkpoint(path, p)
        doc = json.loads(path.read_text())
        doc["format_version"] = 2
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigurationError):
            nets.load_checkpoint(path)

    def test_length_mismatch_rejected(self, tmp_path):
        import json
        layout = nets.mlp_layout((2, 2))
        p = nets.init_params(layout, seed=0)
        path = tmp_path / "net.ckpt"
        nets.save_checkpoint(path, p)
        doc = json.loads(path.read_text())
        doc["values"] = doc["values"][:-1]
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigurationError):
            nets.load_checkpoint(path)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_forward_purity_property(in_dim, out_dim, seed):
    layout = nets.mlp_layout((in_dim, out_dim))
    p = nets.init_params(layout, seed=seed)
    x = np.random.default_rng(seed).uniform(-1, 1, in_dim)
    a, _ = nets.mlp_forward(p, x)
    b, _ = nets.mlp_forward(p, x)
    assert np.array_equal(a, b)
