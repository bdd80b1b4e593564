import numpy as np
import pytest

from leakdet import nn


def quadratic_loss(net, x, target):
    def loss():
        out = net.forward(x)
        return 0.5 * float(((out - target) ** 2).sum())
    return loss


def run_backward(net, x, target):
    out = net.forward(x)
    for layer in net.layers:
        layer.zero_grads()
    net.backward(out - target)


class TestForward:
    def test_dense_identity(self):
        layer = nn.Dense(3, 3, zero_init=True)
        layer.weight[...] = np.eye(3)
        x = np.array([[1.0, -2.0, 0.5]])
        assert np.array_equal(layer.forward(x), x)

    def test_relu_examples(self):
        out = nn.ReLU().forward(np.array([[-1.0, 0.0, 2.0]]))
        assert out.tolist() == [[0.0, 0.0, 2.0]]

    def test_maxpool_2x2(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        out = nn.MaxPool2x2().forward(x)
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == 4.0

    def test_maxpool_floor_semantics(self):
        x = np.arange(15.0).reshape(1, 1, 3, 5)
        out = nn.MaxPool2x2().forward(x)
        assert out.shape == (1, 1, 1, 2)

    def test_conv_identity_kernel(self):
        layer = nn.Conv2d(1, 1, 3)
        layer.kernels[...] = 0.0
        layer.kernels[0, 0, 1, 1] = 1.0
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 1, 5, 6))
        np.testing.assert_allclose(layer.forward(x), x, atol=1e-12)

    def test_conv_even_kernel_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            nn.Conv2d(1, 1, 2)

    def test_upsample_then_pad(self):
        x = np.arange(4.0).reshape(1, 1, 2, 2)
        up = nn.NearestUpsample2x().forward(x)
        assert up.shape == (1, 1, 4, 4)
        padded = nn.PadToSize((5, 4)).forward(up)
        assert padded.shape == (1, 1, 5, 4)
        assert np.array_equal(padded[0, 0, 4], padded[0, 0, 3])  # edge replication

    def test_dense_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.Dense(3, 2, zero_init=True).forward(np.zeros((1, 4)))

    def test_backward_before_forward_raises(self):
        with pytest.raises(RuntimeError, match="before forward"):
            nn.Dense(2, 2, zero_init=True).backward(np.zeros((1, 2)))
        with pytest.raises(RuntimeError, match="before forward"):
            nn.MaxPool2x2().backward(np.zeros((1, 1, 1, 1)))


class TestBackward:
    def test_dense_weight_gradient_outer_product(self):
        # loss = v . (W x + b) has dL/dW = v x^T
        rng = np.random.default_rng(1)
        layer = nn.Dense(4, 3, rng)
        x = rng.normal(size=(1, 4))
        v = rng.normal(size=(1, 3))
        layer.forward(x)
        layer.zero_grads()
        layer.backward(v)
        np.testing.assert_allclose(layer.grad_weight, v.T @ x, atol=1e-12)
        np.testing.assert_allclose(layer.grad_bias, v[0], atol=1e-12)

    def test_relu_zero_gradient_at_negatives(self):
        layer = nn.ReLU()
        layer.forward(np.array([[-1.0, 2.0]]))
        grad = layer.backward(np.array([[5.0, 5.0]]))
        assert grad.tolist() == [[0.0, 5.0]]

    def test_linear_network_quadratic_loss_gradcheck(self):
        rng = np.random.default_rng(2)
        net = nn.Sequential([nn.Dense(5, 4, rng), nn.Dense(4, 3, rng)])
        x = rng.normal(size=(6, 5))
        target = rng.normal(size=(6, 3))
        run_backward(net, x, target)
        err = nn.grad_check(quadratic_loss(net, x, target), net.params(), net.grads(),
                            np.random.default_rng(3))
        assert err < 1e-8

    def test_two_layer_relu_gradcheck(self):
        rng = np.random.default_rng(4)
        net = nn.Sequential([nn.Dense(6, 8, rng), nn.ReLU(), nn.Dense(8, 2, rng)])
        x = rng.normal(size=(10, 6)) + 0.1
        target = rng.normal(size=(10, 2))
        run_backward(net, x, target)
        err = nn.grad_check(quadratic_loss(net, x, target), net.params(), net.grads(),
                            np.random.default_rng(5))
        assert err < 1e-4

    def test_conv_pool_stack_gradcheck(self):
        rng = np.random.default_rng(6)
        net = nn.Sequential([
            nn.Conv2d(1, 3, 3, rng), nn.ReLU(), nn.MaxPool2x2(),
            nn.Conv2d(3, 2, 3, rng), nn.Flatten(), nn.Dense(2 * 2 * 3, 4, rng),
        ])
        x = rng.normal(size=(3, 1, 5, 7))
        target = rng.normal(size=(3, 4))
        run_backward(net, x, target)
        err = nn.grad_check(quadratic_loss(net, x, target), net.params(), net.grads(),
                            np.random.default_rng(7), num_checks=150)
        assert err < 1e-4

    def test_upsample_pad_stack_gradcheck(self):
        rng = np.random.default_rng(8)
        net = nn.Sequential([
            nn.Dense(3, 2 * 2 * 2, rng), nn.Reshape((2, 2, 2)),
            nn.NearestUpsample2x(), nn.PadToSize((5, 5)), nn.Conv2d(2, 1, 3, rng),
        ])
        x = rng.normal(size=(4, 3))
        target = rng.normal(size=(4, 1, 5, 5))
        run_backward(net, x, target)
        err = nn.grad_check(quadratic_loss(net, x, target), net.params(), net.grads(),
                            np.random.default_rng(9), num_checks=150)
        assert err < 1e-4

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        net = nn.Sequential([nn.Conv2d(2, 3, 3, rng), nn.ReLU(), nn.MaxPool2x2()])
        x = rng.normal(size=(1, 2, 4, 4))
        target = rng.normal(size=(1, 3, 2, 2))
        out = net.forward(x)
        for layer in net.layers:
            layer.zero_grads()
        grad_in = net.backward(out - target)
        h = 1e-6
        for flat in [0, 7, 19, 31]:
            xp = x.copy(); xp.flat[flat] += h
            xm = x.copy(); xm.flat[flat] -= h
            lp = 0.5 * ((net.forward(xp) - target) ** 2).sum()
            lm = 0.5 * ((net.forward(xm) - target) ** 2).sum()
            numeric = (lp - lm) / (2 * h)
            assert abs(numeric - grad_in.flat[flat]) < 1e-4 * max(1.0, abs(numeric))


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        params = {"w": np.array([1.0, -2.0])}
        grads = {"w": np.zeros(2)}
        state = nn.AdamState(lr=0.1)
        nn.adam_step(state, params, grads)
        assert params["w"].tolist() == [1.0, -2.0]

    def test_lr_zero_is_identity(self):
        rng = np.random.default_rng(11)
        params = {"w": rng.normal(size=5)}
        before = params["w"].copy()
        nn.adam_step(nn.AdamState(lr=0.0), params, {"w": rng.normal(size=5)})
        assert np.array_equal(params["w"], before)

    def test_first_step_magnitude_is_lr(self):
        params = {"w": np.zeros(3)}
        grads = {"w": np.array([0.5, -2.0, 10.0])}
        nn.adam_step(nn.AdamState(lr=0.01), params, grads)
        np.testing.assert_allclose(np.abs(params["w"]), 0.01, rtol=1e-4)
        assert np.all(np.sign(params["w"]) == -np.sign(grads["w"]))

    def test_deterministic_across_identical_runs(self):
        def run():
            rng = np.random.default_rng(12)
            params = {"w": rng.normal(size=4)}
            state = nn.AdamState(lr=0.05, weight_decay=1e-4)
            for _ in range(5):
                nn.adam_step(state, params, {"w": rng.normal(size=4)})
            return params["w"]
        assert np.array_equal(run(), run())

    def test_weight_decay_shrinks_parameters(self):
        params = {"w": np.array([10.0])}
        nn.adam_step(nn.AdamState(lr=0.1, weight_decay=1.0), params, {"w": np.zeros(1)})
        assert params["w"][0] < 10.0

    def test_nan_gradient_raises_naming_parameter(self):
        params = {"encoder.w": np.zeros(2)}
        grads = {"encoder.w": np.array([np.nan, 0.0])}
        with pytest.raises(nn.TrainingError, match="encoder.w"):
            nn.adam_step(nn.AdamState(lr=0.1), params, grads)


def test_he_uniform_without_rng_is_zero():
    assert np.all(nn.he_uniform((3, 3), 9, None) == 0.0)


def test_grad_check_detects_wrong_gradient():
    rng = np.random.default_rng(13)
    layer = nn.Dense(3, 2, rng)
    x = rng.normal(size=(4, 3))
    layer.forward(x)
    layer.zero_grads()
    layer.backward(np.ones((4, 2)))
    corrupted = {name: g * 2.0 for name, g in layer.grads().items()}

    def loss():
        return float(layer.forward(x).sum())

    assert nn.grad_check(loss, layer.params(), corrupted, np.random.default_rng(14)) > 0.3
