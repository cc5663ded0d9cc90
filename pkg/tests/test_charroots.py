import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bisect_real
from wavefrontier.charroots import (
    CertificationFailed,
    ComplexRoots,
    bisect_root,
    char_derivative,
    char_value,
    continue_root,
    default_strip,
    quadratic_root,
    quadratic_roots,
    small_delay_threshold,
    winding_count,
)

LAMBDA0 = (3 + math.sqrt(5)) / 2

# real roots of z^2 - 3 z e^{rz} + e^{rz}, 40-digit mpmath findroot, frozen
FAST_ROOTS = {
    0.1: 4.2071210916262275806,
    0.05: 3.1363785809461736708,
    0.025: 2.8434198703978330166,
    0.0125: 2.7241047379191230736,
    0.01: 2.7019188960188649367,
}
SLOW_ROOTS = {
    0.1: 0.37956880699675333098,
    0.01: 0.38171777493696671597,
}


@pytest.mark.parametrize("c,alpha,expected", [(3, 2, 2.0), (2, 1, 1.0), (3, 1, LAMBDA0)])
def test_quadratic_root(c, alpha, expected):
    assert quadratic_root(c, alpha) == pytest.approx(expected, abs=1e-12)


def test_quadratic_roots_complex():
    with pytest.raises(ComplexRoots):
        quadratic_roots(1.0, 1.0)


def test_char_value_examples():
    assert abs(char_value(LAMBDA0, 3, 1, 0.0)) < 1e-14
    for c, a, r in [(3, 1, 0.3), (5, 2, 0.01), (2.5, 0.5, 1.0)]:
        assert char_value(0.0, c, a, r) == pytest.approx(a, abs=1e-15)
    assert char_value(1.0, 3, 2, 0.1) == pytest.approx(1 - math.exp(0.1), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False), st.floats(0.0, 0.2))
def test_char_derivative_matches_difference(z, r):
    eps = 1e-6
    fd = (char_value(z + eps, 3, 1, r) - char_value(z - eps, 3, 1, r)) / (2 * eps)
    assert abs(fd - char_derivative(z, 3, 1, r)) < 1e-6 * (1 + abs(fd))


def test_continue_root_zero_delay_is_exact():
    assert continue_root(3, 2, 0.0).value == 2.0
    assert continue_root(3, 1, 0.0).value == quadratic_roots(3, 1)[1]


def test_continue_root_matches_bisection():
    root = continue_root(3, 2, 0.01)
    lam0 = 2.0
    oracle = bisect_real(lambda z: float(char_value(z, 3, 2, 0.01)), lam0 - 0.5, lam0 + 0.5)
    assert root.value == pytest.approx(oracle, abs=1e-10)
    assert root.winding == 1


@pytest.mark.parametrize("r", [0.05, 0.025, 0.0125, 0.01])
def test_fast_root_frozen(r):
    root = continue_root(3, 1, r)
    assert root.value == pytest.approx(FAST_ROOTS[r], abs=1e-12)
    assert root.winding == 1


def test_fast_root_large_delay_leaves_strip():
    # the real root exists but lies outside the certification strip
    with pytest.raises(CertificationFailed):
        continue_root(3, 1, 0.1)
    root = continue_root(3, 1, 0.1, certify=False)
    assert root.value == pytest.approx(FAST_ROOTS[0.1], abs=1e-10)


@pytest.mark.parametrize("r", [0.1, 0.01])
def test_slow_root_frozen(r):
    root = continue_root(3, 1, r, branch="slow")
    assert root.value == pytest.approx(SLOW_ROOTS[r], abs=1e-12)
    assert root.winding == 1


def test_distance_to_lambda0_decreases():
    rs = [0.05, 0.025, 0.0125]
    d = [abs(continue_root(3, 1, r).value - LAMBDA0) for r in rs]
    assert all(a > b for a, b in zip(d, d[1:]))


def test_winding_examples():
    assert winding_count(3, 2, 0.0, (1.7, 2.3, 20.0)) == 1
    assert winding_count(3, 2, 0.0, (0.5, 2.5, 20.0)) == 2
    assert winding_count(3, 1, 0.01, default_strip(3, 1)) == 1


def test_bisect_root_oracle_agrees():
    z = bisect_root(3, 1, 0.01, LAMBDA0 - 0.5, LAMBDA0 + 0.5)
    assert z == pytest.approx(FAST_ROOTS[0.01], abs=1e-13)


def test_bisect_root_no_sign_change():
    with pytest.raises(CertificationFailed):
        bisect_root(3, 1, 0.01, 5.0, 6.0)


def test_small_delay_threshold():
    r = small_delay_threshold(3, 1)
    assert 0.0 < r < 0.1
    continue_root(3, 1, r)


@settings(max_examples=25, deadline=None)
@given(st.floats(2.2, 6.0), st.floats(0.2, 1.0), st.floats(0.0, 0.02))
def test_root_is_zero_of_h(c, alpha, r):
    if c <= 2 * math.sqrt(alpha) + 0.1:
        return
    root = continue_root(c, alpha, r, certify=False)
    assert abs(char_value(root.value, c, alpha, r)) < 1e-10 * max(1.0, root.value ** 2)
    assert np.isfinite(root.value)
