import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dfr.errors import ConfigurationError, NumericError
from dfr.numerics import Adam, AdamState, adam_step, as_matrix, finite_diff_gradient, relative_error

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def hand_adam(param, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam recurrence written out longhand."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        param = param - lr * mhat / (math.sqrt(vhat) + eps)
    return param


class TestAdamStep:
    def test_zero_gradient_is_fixed_point(self):
        p = np.array([[1.5, -2.0], [0.0, 3.0]])
        new, state = adam_step(p, np.zeros_like(p), AdamState.zeros_like(p), lr=0.1)
        np.testing.assert_array_equal(new, p)
        assert state.step_count == 1

    def test_first_step_is_minus_lr(self):
        new, _ = adam_step(np.array([[0.0]]), np.array([[1.0]]), AdamState.zeros_like(np.zeros((1, 1))), lr=0.001)
        assert new[0, 0] == pytest.approx(hand_adam(0.0, [1.0], 0.001), abs=1e-15)
        assert new[0, 0] == pytest.approx(-0.001, rel=1e-7)

    def test_persistent_state_differs_from_reset(self):
        p0 = np.array([[0.0]])
        g1, g2 = np.array([[1.0]]), np.array([[3.0]])
        p1, s1 = adam_step(p0, g1, AdamState.zeros_like(p0), 0.001)
        persistent, s2 = adam_step(p1, g2, s1, 0.001)
        reset, _ = adam_step(p1, g2, AdamState.zeros_like(p0), 0.001)
        assert s2.step_count == 2
        assert persistent[0, 0] == pytest.approx(hand_adam(0.0, [1.0, 3.0], 0.001), abs=1e-15)
        assert reset[0, 0] == pytest.approx(hand_adam(0.0, [1.0], 0.001) + hand_adam(0.0, [3.0], 0.001), abs=1e-15)
        assert abs(persistent[0, 0] - reset[0, 0]) > 1e-5

    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            adam_step(np.zeros((2, 2)), np.zeros((2, 3)), AdamState.zeros_like(np.zeros((2, 2))), 0.1)

    def test_non_finite_gradient_names_parameter(self):
        p = np.zeros((1, 2))
        with pytest.raises(NumericError, match="W7"):
            adam_step(p, np.array([[np.nan, 0.0]]), AdamState.zeros_like(p), 0.1, name="W7")

    def test_nonpositive_lr(self):
        p = np.zeros((1, 1))
        with pytest.raises(ConfigurationError):
            adam_step(p, p, AdamState.zeros_like(p), 0.0)

    def test_inplace_optimizer_matches_functional(self):
        rng = np.random.default_rng(3)
        p = rng.normal(size=(4, 3))
        params = {"w": p.copy()}
        opt = Adam(lr=0.01)
        ref, state = p.copy(), AdamState.zeros_like(p)
        for _ in range(5):
            g = rng.normal(size=p.shape)
            opt.step(params, {"w": g})
            ref, state = adam_step(ref, g, state, 0.01)
        np.testing.assert_array_equal(params["w"], ref)
        assert opt.states["w"].step_count == 5

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3, 2), elements=finite), arrays(np.float64, (3, 2), elements=finite))
    def test_second_moment_nonnegative(self, p, g):
        _, state = adam_step(p, g, AdamState.zeros_like(p), 0.01)
        _, state = adam_step(p, -g, state, 0.01)
        assert np.all(state.second_moment >= 0)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (2, 3), elements=finite))
    def test_deterministic(self, p):
        g = np.cos(p)
        a, _ = adam_step(p, g, AdamState.zeros_like(p), 0.01)
        b, _ = adam_step(p, g, AdamState.zeros_like(p), 0.01)
        assert a.tobytes() == b.tobytes()


class TestFiniteDiff:
    def test_linear(self):
        x = np.random.default_rng(0).normal(size=(3, 4))
        np.testing.assert_allclose(finite_diff_gradient(np.sum, x, 1e-5), np.ones_like(x), atol=1e-9)

    def test_square(self):
        g = finite_diff_gradient(lambda x: float(np.sum(x * x)), np.array([[1.0, 2.0]]), 1e-5)
        np.testing.assert_allclose(g, [[2.0, 4.0]], atol=1e-6)

    def test_non_finite_function(self):
        with pytest.raises(NumericError):
            finite_diff_gradient(lambda x: float(np.log(x[0, 0])), np.array([[0.0]]), 1e-5)

    def test_bad_step(self):
        with pytest.raises(ConfigurationError):
            finite_diff_gradient(np.sum, np.zeros((1, 1)), 0.0)

    def test_input_untouched(self):
        x = np.array([[1.0, 2.0]])
        finite_diff_gradient(lambda v: float(np.sum(v**3)), x, 1e-3)
        np.testing.assert_array_equal(x, [[1.0, 2.0]])


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([1e-12]))[0] == pytest.approx(1e-4)
    assert relative_error(np.array([2.0]), np.array([1.0]))[0] == pytest.approx(0.5)


def test_as_matrix_rejects_nan():
    with pytest.raises(NumericError):
        as_matrix([[1.0, np.inf]])
    assert as_matrix([1.0, 2.0]).shape == (1, 2)
