import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnfeq import Activation, clamp, linear, logistic, relu
from dnfeq.errors import BracketFailure, ModelError, ToleranceNotMet
from dnfeq.roots import bisect_threshold, expand_bracket, newton_bisect

ALL = [logistic(1.0, 4.0, 0.5), logistic(2.0, 0.5, -1.0), clamp(-0.5, 1.0, 2.0), linear(0.7, 0.1), relu()]


@pytest.mark.parametrize("S", ALL, ids=lambda S: S.describe())
def test_nondecreasing_on_dense_grid(S):
    s = np.linspace(-50, 50, 20001)
    assert np.all(np.diff(S(s)) >= 0)
    assert S.is_nondecreasing


@pytest.mark.parametrize("S", ALL, ids=lambda S: S.describe())
def test_derivative_matches_finite_difference(S):
    s = np.linspace(-3.1, 3.3, 41)  # avoids the kinks of clamp and relu
    h = 1e-6
    fd = (S(s + h) - S(s - h)) / (2 * h)
    np.testing.assert_allclose(S.derivative(s), fd, atol=1e-7)


@pytest.mark.parametrize("S", ALL, ids=lambda S: S.describe())
def test_lipschitz_constant_dominates_slopes(S):
    s = np.linspace(-20, 20, 4001)
    assert np.max(S.derivative(s)) <= S.lipschitz * (1 + 1e-12)


def test_bounds():
    assert logistic(2.5).bound == 2.5 and logistic().is_bounded
    assert clamp(-3.0, 1.0).bound == 3.0
    assert relu().bound == math.inf and not relu().is_bounded
    assert linear(1.0).bound == math.inf
    assert linear(0.0, -0.25).is_bounded and linear(0.0, -0.25).bound == 0.25


def test_logistic_saturates_without_overflow():
    S = logistic(1.0, 1.0, 0.0)
    with np.errstate(all="raise"):
        v = S(np.array([-1e308, -800.0, 800.0, 1e308]))
    np.testing.assert_array_equal(v, [0.0, 0.0, 1.0, 1.0])


def test_logistic_preimage_matches_closed_form():
    S = logistic(2.0, 3.0, 0.25)
    y = np.array([1e-6, 0.1, 1.0, 1.7, 2.0 - 1e-9])
    exact = 0.25 + np.log(y / (2.0 - y)) / 3.0
    np.testing.assert_allclose(S.preimage(y), exact, rtol=0, atol=1e-9)
    assert np.isnan(S.preimage(2.0)[0]) and np.isnan(S.preimage(0.0)[0])


def test_clamp_preimage_flat_edges_and_outside():
    S = clamp(0.0, 1.0, 2.0)
    pre = S.preimage([0.0, 0.5, 1.0, 1.5])
    # flat bottom is (-inf, 0]: finite end 0; flat top [0.5, inf): finite end 0.5
    np.testing.assert_allclose(pre[:3], [0.0, 0.25, 0.5], atol=1e-15)
    assert np.isnan(pre[3])


def test_relu_preimage():
    pre = relu().preimage([0.0, 2.0, -1.0])
    np.testing.assert_allclose(pre[:2], [0.0, 2.0])
    assert np.isnan(pre[2])


def test_constant_activation_preimage():
    S = linear(0.0, 0.3)
    assert S.reaches(0.3) and not S.reaches(0.31)
    assert S.preimage(0.3)[0] == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.1, 20), st.floats(-3, 3))
def test_logistic_preimage_round_trip(y, beta, theta):
    S = logistic(1.0, beta, theta)
    assert abs(S(S.preimage(y))[0] - y) <= 1e-14


@pytest.mark.parametrize(
    "kind, params",
    [("logistic", {"L": -1}), ("logistic", {"beta": 0}), ("clamp", {"lo": 1, "hi": 0}),
     ("linear", {"slope": -1}), ("relu", {"slope": 1}), ("tanh", {}), ("linear", {"gain": 2}),
     ("logistic", {"theta": math.nan})],
)
def test_invalid_activation_parameters(kind, params):
    with pytest.raises(ModelError):
        Activation(kind, params)


def test_describe_is_readable():
    assert logistic(1, 4, 0.5).describe() == "logistic(L=1.0, beta=4.0, theta=0.5)"
    assert relu().describe() == "relu"


# root finding -------------------------------------------------------------

def test_newton_bisect_solves_each_node_to_tolerance():
    v = np.linspace(-30, 30, 61)
    phi = lambda s: s + 5.0 * np.tanh(s) - v
    dphi = lambda s: 1.0 + 5.0 / np.cosh(s) ** 2
    x = newton_bisect(phi, dphi, v - 5, v + 5, tol=1e-13)
    assert np.max(np.abs(phi(x))) <= 1e-13


def test_newton_bisect_survives_zero_slope_and_kinks():
    # piecewise linear map with flat pieces in its derivative oracle
    phi = lambda s: s + 3.0 * np.clip(s, 0, 1) - 2.0
    dphi = lambda s: np.zeros_like(s)  # useless derivative forces bisection
    x = newton_bisect(phi, dphi, np.array([-10.0]), np.array([10.0]), tol=1e-14)
    assert abs(x[0] - 0.5) <= 1e-14


def test_newton_bisect_rejects_bad_bracket():
    phi = lambda s: s - 5.0
    with pytest.raises(BracketFailure):
        newton_bisect(phi, lambda s: np.ones_like(s), np.array([0.0]), np.array([1.0]))


def test_newton_bisect_reports_unreachable_tolerance():
    # a jump: no float makes |phi| small
    phi = lambda s: np.where(s < 0.3, -1.0, 1.0)
    with pytest.raises(ToleranceNotMet):
        newton_bisect(phi, lambda s: np.zeros_like(s), np.array([0.0]), np.array([1.0]), tol=1e-3)


def test_expand_bracket_grows_until_sign_change():
    phi = lambda s: s - 1e6
    lo, hi = expand_bracket(phi, np.array([0.0]))
    assert phi(lo)[0] <= 0 <= phi(hi)[0]


def test_expand_bracket_fails_without_root():
    with pytest.raises(BracketFailure):
        expand_bracket(lambda s: np.ones_like(s), np.array([0.0]))


def test_bisect_threshold_returns_adjacent_floats():
    lo, hi = bisect_threshold(lambda s: s >= 0.1, np.array([0.0]), np.array([1.0]))
    assert lo[0] < 0.1 <= hi[0] and np.nextafter(lo[0], 1) == hi[0]
