import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hpnn.activations import (
    Activation,
    activation_derivative,
    apply_activation,
    softmax,
    softmax_xent,
)
from hpnn.errors import TargetOutOfRange

ALL = list(Activation)


def test_tanh_of_zero_map_is_zero():
    out = apply_activation(np.zeros((2, 3, 3)), Activation.TANH)
    assert out.shape == (2, 3, 3)
    assert np.all(out == 0.0)


def test_identity_is_unchanged():
    x = np.random.default_rng(0).normal(size=(3, 4, 5))
    np.testing.assert_array_equal(apply_activation(x, Activation.IDENTITY), x)
    np.testing.assert_array_equal(activation_derivative(x, Activation.IDENTITY), 1.0)


def test_logistic_value():
    mpmath.mp.dps = 40
    expected = float(1 / (1 + mpmath.e ** mpmath.mpf("-0.5")))
    assert expected == pytest.approx(0.62245933120185459, abs=1e-16)
    assert apply_activation(np.array([0.5]), Activation.LOGISTIC)[0] == pytest.approx(expected, abs=1e-16)


def test_derivative_specific_values():
    assert activation_derivative(np.array([0.0]), Activation.TANH)[0] == 1.0
    s = 1 / (1 + math.exp(-0.3))
    analytic = activation_derivative(np.array([0.3]), Activation.LOGISTIC)[0]
    h = 1e-6
    numeric = (1 / (1 + math.exp(-(0.3 + h))) - 1 / (1 + math.exp(-(0.3 - h)))) / (2 * h)
    assert analytic == pytest.approx(s * (1 - s), abs=1e-15)
    assert abs(analytic - numeric) < 1e-9


def test_rectifier_derivative_at_zero_is_zero():
    assert activation_derivative(np.array([0.0]), Activation.RELU)[0] == 0.0
    np.testing.assert_array_equal(
        activation_derivative(np.array([-1.0, 2.0]), Activation.RELU), [0.0, 1.0]
    )


@pytest.mark.parametrize("kind", ALL)
def test_derivative_matches_finite_differences(kind):
    rng = np.random.default_rng(5)
    x = rng.uniform(-3, 3, size=(3, 6, 6))
    if kind is Activation.RELU:
        x = np.where(np.abs(x) < 1e-3, 0.5, x)  # stay off the kink
    h = 1e-5
    numeric = (apply_activation(x + h, kind) - apply_activation(x - h, kind)) / (2 * h)
    analytic = activation_derivative(x, kind)
    rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    assert rel.max() < 1e-7


def test_softmax_uniform_logits():
    loss, probs, grad = softmax_xent(np.full(8, 3.7), 2)
    np.testing.assert_allclose(probs, 0.125, atol=1e-15)
    assert loss == pytest.approx(math.log(8), abs=1e-14)
    assert grad[2] == pytest.approx(-0.875)


def test_softmax_shift_invariance():
    z = np.array([0.2, -1.0, 3.0, 0.5])
    a = softmax_xent(z, 1)
    b = softmax_xent(z + 123.25, 1)
    np.testing.assert_allclose(a[1], b[1], atol=1e-15)
    assert a[0] == pytest.approx(b[0], abs=1e-13)


def test_softmax_xent_against_extended_precision():
    mpmath.mp.dps = 50
    z = [mpmath.mpf(v) for v in (1, 2, 3)]
    denom = sum(mpmath.e**v for v in z)
    probs = [mpmath.e**v / denom for v in z]
    loss, p, grad = softmax_xent(np.array([1.0, 2.0, 3.0]), 2)
    assert loss == pytest.approx(float(-mpmath.log(probs[2])), abs=1e-15)
    expected_grad = [float(probs[0]), float(probs[1]), float(probs[2] - 1)]
    np.testing.assert_allclose(grad, expected_grad, atol=1e-15)


def test_target_out_of_range():
    with pytest.raises(TargetOutOfRange):
        softmax_xent(np.zeros(3), 3)


def test_batch_matches_single():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(5, 4))
    t = np.array([0, 3, 2, 1, 1])
    losses, probs, grad = softmax_xent(z, t)
    for n in range(5):
        l1, p1, g1 = softmax_xent(z[n], t[n])
        assert losses[n] == pytest.approx(l1, abs=1e-15)
        np.testing.assert_allclose(grad[n], g1, atol=1e-15)


def test_log_floor_keeps_loss_finite():
    loss, _, _ = softmax_xent(np.array([0.0, 1000.0]), 0)
    assert np.isfinite(loss)
    assert loss == pytest.approx(-math.log(1e-300))


logit_vectors = arrays(
    np.float64,
    st.integers(2, 12),
    elements=st.floats(-700, 700, allow_nan=False),
)


@settings(max_examples=200, deadline=None)
@given(logit_vectors, st.data())
def test_softmax_properties(z, data):
    target = data.draw(st.integers(0, len(z) - 1))
    loss, probs, grad = softmax_xent(z, target)
    assert np.all((probs >= 0) & (probs <= 1))
    assert abs(probs.sum() - 1.0) < 1e-12
    assert abs(grad.sum()) < 1e-12
    assert np.isfinite(loss)
    assert abs(softmax(z).sum() - 1.0) < 1e-12
