import math

import numpy as np
import pytest

from conftest import sampled_fd_check
from dfr.errors import ConfigurationError, DataError
from dfr.network import (
    TRAINABLE,
    backward,
    cross_entropy,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    softmax,
)


def zero_weights(params):
    for name in ("W1", "W2", "W3"):
        getattr(params, name)[...] = 0.0
    return params


def relu_margin(params, X):
    _, cache = forward(params, X, "train", update_running=False)
    return min(np.abs(cache.z1).min(), np.abs(cache.z2).min())


class TestInit:
    def test_deterministic(self):
        assert init_params(8, 3, seed=4).equals(init_params(8, 3, seed=4))

    def test_shapes(self):
        p = init_params(8, 3)
        assert p.W1.shape == (8, 512) and p.W2.shape == (512, 256) and p.W3.shape == (256, 3)
        assert p.running_var1.shape == (512,) and np.all(p.running_var1 == 1.0)

    def test_seeds_differ(self):
        assert not init_params(8, 3, seed=0).equals(init_params(8, 3, seed=1))

    def test_rejects_degenerate(self):
        with pytest.raises(ConfigurationError):
            init_params(4, 1)


class TestForward:
    def test_zero_network(self):
        p = zero_weights(init_params(5, 4))
        X = np.random.default_rng(0).normal(size=(6, 5))
        for mode in ("train", "eval"):
            logits, _ = forward(p, X, mode)
            np.testing.assert_array_equal(logits, 0.0)

    def test_eval_is_pure(self):
        p = init_params(5, 3, seed=1)
        before = p.copy()
        X = np.random.default_rng(1).normal(size=(7, 5))
        a, _ = forward(p, X, "eval")
        b, _ = forward(p, X, "eval")
        assert a.tobytes() == b.tobytes()
        assert p.equals(before)

    def test_train_updates_running_stats(self):
        p = init_params(5, 3, seed=1)
        before = p.running_mean1.copy()
        forward(p, np.random.default_rng(1).normal(size=(7, 5)) + 3.0, "train")
        assert not np.array_equal(p.running_mean1, before)
        assert np.all(p.running_var1 > 0) and np.all(p.running_var2 > 0)

    def test_batchnorm_normalizes(self):
        p = init_params(4, 3, seed=2)
        X = np.random.default_rng(2).normal(size=(64, 4)) * 100.0
        _, cache = forward(p, X, "train")
        for xhat, z in ((cache.xhat1, cache.z1), (cache.xhat2, cache.z2)):
            a = np.maximum(z, 0.0)
            live = a.var(axis=0) > 1.0  # dead or near-constant units normalize to 0
            np.testing.assert_allclose(xhat[:, live].mean(axis=0), 0.0, atol=1e-6)
            np.testing.assert_allclose(xhat[:, live].var(axis=0), 1.0, atol=1e-5)
        # the second block sees unit-scale inputs, so check it against the exact eps-shrunk variance
        a2 = np.maximum(cache.z2, 0.0)
        v = a2.var(axis=0)
        np.testing.assert_allclose(cache.xhat2.var(axis=0), v / (v + 1e-5), atol=1e-6)

    def test_train_batch_of_one(self):
        with pytest.raises(ConfigurationError):
            forward(init_params(3, 2), np.ones((1, 3)), "train")

    def test_width_mismatch(self):
        with pytest.raises(ConfigurationError):
            forward(init_params(3, 2), np.ones((4, 5)), "eval")

    def test_relu_nonnegative(self):
        p = init_params(6, 3, seed=5)
        _, cache = forward(p, np.random.default_rng(5).normal(size=(8, 6)), "train")
        assert np.all(np.maximum(cache.z1, 0) >= 0)


class TestSoftmaxCrossEntropy:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros((1, 4))), [[0.25] * 4])

    def test_two_class_ratio(self):
        e3 = math.exp(3.0)
        np.testing.assert_allclose(softmax([[3.0, 0.0]]), [[e3 / (e3 + 1), 1 / (e3 + 1)]], rtol=1e-15)
        assert softmax([[3.0, 0.0]])[0, 0] == pytest.approx(0.9526, abs=5e-5)

    def test_shift_invariance(self):
        z = np.random.default_rng(0).normal(size=(5, 4))
        np.testing.assert_allclose(softmax(z), softmax(z + 123.4), atol=1e-12)
        np.testing.assert_allclose(softmax(z).sum(axis=1), 1.0, atol=1e-9)

    def test_confident_correct(self):
        z = np.zeros((3, 4))
        z[np.arange(3), [0, 2, 3]] = 30.0
        loss, _ = cross_entropy(z, [0, 2, 3])
        assert 0 <= loss < 1e-9

    def test_uniform_entropy(self):
        loss, _ = cross_entropy(np.zeros((5, 4)), [0, 1, 2, 3, 0])
        assert loss == pytest.approx(math.log(4), abs=1e-12)

    def test_closed_form(self):
        loss, _ = cross_entropy([[1.0, 2.0]], [1])
        assert loss == pytest.approx(math.log1p(math.exp(-1.0)), abs=1e-12)
        assert loss == pytest.approx(0.31326, abs=1e-5)

    def test_gradient_formula(self):
        z = np.random.default_rng(1).normal(size=(4, 3))
        y = np.array([0, 2, 1, 1])
        _, g = cross_entropy(z, y)
        expect = softmax(z)
        expect[np.arange(4), y] -= 1
        np.testing.assert_allclose(g, expect / 4, atol=1e-15)

    def test_bad_label(self):
        with pytest.raises(DataError, match="row 1"):
            cross_entropy(np.zeros((2, 3)), [0, 3])


class TestBackward:
    def test_zero_upstream(self):
        p = init_params(6, 3, seed=0)
        X = np.random.default_rng(0).normal(size=(4, 6))
        logits, cache = forward(p, X, "train")
        grads, dx = backward(p, cache, np.zeros_like(logits))
        assert all(np.all(g == 0) for g in grads.values())
        assert np.all(dx == 0)

    def test_zero_network_input_gradient(self):
        p = zero_weights(init_params(6, 3, seed=0))
        X = np.random.default_rng(0).normal(size=(4, 6))
        logits, cache = forward(p, X, "train")
        _, dx = backward(p, cache, np.ones_like(logits))
        assert np.all(dx == 0)

    def test_eval_cache_rejected(self):
        p = init_params(6, 3)
        logits, cache = forward(p, np.ones((3, 6)), "eval")
        with pytest.raises(ConfigurationError):
            backward(p, cache, logits)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        p = init_params(6, 3, seed=seed)
        for name in ("gamma1", "beta1", "gamma2", "beta2"):
            getattr(p, name)[...] += rng.normal(scale=0.3, size=getattr(p, name).shape)
        X = rng.normal(size=(4, 6))
        y = np.array([0, 1, 2, 1])
        assert relu_margin(p, X) > 1e-4
        logits, cache = forward(p, X, "train", update_running=False)
        _, dlog = cross_entropy(logits, y)
        grads, dx = backward(p, cache, dlog)

        def loss_with(name, value):
            q = p.copy()
            getattr(q, name)[...] = value
            z, _ = forward(q, X, "train", update_running=False)
            return cross_entropy(z, y)[0]

        for name in TRAINABLE:
            err = sampled_fd_check(lambda v, n=name: loss_with(n, v), getattr(p, name), grads[name],
                                   n_coords=12, rng=rng, floor=1e-6)
            assert err < 1e-4, name
        err = sampled_fd_check(lambda v: cross_entropy(forward(p, v, "train", update_running=False)[0], y)[0], X, dx,
                               floor=1e-6)
        assert err < 1e-4

    def test_relu_blocks_gradient(self):
        p = init_params(6, 3, seed=1)
        X = np.random.default_rng(1).normal(size=(5, 6))
        logits, cache = forward(p, X, "train")
        grads, _ = backward(p, cache, np.ones_like(logits))
        dead = np.all(cache.z1 < 0, axis=0)
        assert dead.any()
        assert np.all(grads["b1"][dead] == 0)


def test_checkpoint_round_trip(tmp_path):
    p = init_params(7, 4, seed=3)
    forward(p, np.random.default_rng(3).normal(size=(9, 7)), "train")
    path = tmp_path / "net.ckpt"
    save_checkpoint(p, path)
    q = load_checkpoint(path)
    for (k, a), b in zip(p.arrays().items(), q.arrays().values()):
        assert a.tobytes() == b.tobytes(), k


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint at all, definitely")
    with pytest.raises(DataError):
        load_checkpoint(path)
    p = init_params(3, 2)
    save_checkpoint(p, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DataError):
        load_checkpoint(path)
