import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from oracles import kernel_quad
from wavefrontier.core import GridFunction, grid_nodes
from wavefrontier.kernel import (
    KernelNotPositive,
    characteristic_exponents,
    check_positive,
    check_symbol,
    closed_form_kernel,
    convolve,
    fit_decay_bound,
    spectral_kernel,
)

L_K, H = 40.0, 0.02


@pytest.fixture(scope="module")
def k_default():
    return spectral_kernel(1.0, 3.0, 1.5, 0.01, L_K, H)


@pytest.fixture(scope="module")
def k_closed():
    return closed_form_kernel(1.0, 2.0, 1.0, L_K, H)


def test_closed_form_peak(k_closed):
    lm, lp = characteristic_exponents(1.0, 2.0, 1.0)
    assert (lm, lp) == pytest.approx((1 - math.sqrt(2), 1 + math.sqrt(2)))
    assert k_closed.samples(0.0) == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-14)


def test_closed_form_mass(k_closed):
    assert k_closed.integral == pytest.approx(1.0, abs=1e-12)


def test_closed_form_monotone_tails(k_closed):
    g, t = k_closed.samples.values, k_closed.samples.t
    assert np.all(np.diff(g[t >= 0]) < 0)
    assert np.all(np.diff(g[t <= 0]) > 0)


def test_closed_form_matches_bvp_solve():
    # independent oracle: finite-difference solve of D x'' - c x' - beta x = -H
    D, c, beta = 1.0, 2.0, 1.0
    Lb, hb = 30.0, 0.01
    t = grid_nodes(Lb, hb)
    w = 0.1
    Hf = np.maximum(0.0, 1.0 - np.abs(t) / w) / w
    n = t.size
    main = np.full(n, -2 * D / hb ** 2 - beta)
    up = np.full(n - 1, D / hb ** 2 - c / (2 * hb))
    lo = np.full(n - 1, D / hb ** 2 + c / (2 * hb))
    x = spsolve(diags([lo, main, up], [-1, 0, 1], format="csc"), -Hf)
    k = closed_form_kernel(D, c, beta, 2 * Lb, hb)
    conv = convolve(k, GridFunction(Lb, hb, Hf, 0.0, 0.0))
    sel = np.abs(t) < 10
    # O(hb^2) error of the finite-difference oracle near the hat's kinks
    assert np.max(np.abs(conv.values[sel] - x[sel])) < 5e-4


def test_spectral_matches_closed_form_at_zero_delay(k_closed):
    k = spectral_kernel(1.0, 2.0, 1.0, 0.0, L_K, H)
    assert np.max(np.abs(k.samples.values - k_closed.samples.values)) < 1e-6


@pytest.mark.parametrize("t", [-2.0, -0.5, 0.0, 0.3, 1.0, 3.0])
def test_spectral_matches_quadrature(k_default, t):
    assert k_default.samples(t) == pytest.approx(kernel_quad(t, 1.0, 3.0, 1.5, 0.01), abs=1e-8)


@pytest.mark.parametrize("r", [0.0, 0.01, 0.02])
def test_mass_is_inverse_beta(r):
    k = spectral_kernel(1.0, 3.0, 1.5, r, L_K, H)
    assert k.integral == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_decay_rate_continuous_in_delay():
    d0 = fit_decay_bound(closed_form_kernel(1.0, 3.0, 1.5, L_K, H))[1]
    d2 = fit_decay_bound(spectral_kernel(1.0, 3.0, 1.5, 0.02, L_K, H))[1]
    lm, lp = characteristic_exponents(1.0, 3.0, 1.5)
    assert d0 == pytest.approx(min(-lm, lp), rel=0.05)
    assert abs(d2 - d0) <= 0.2 * d0


def test_fit_decay_closed_form(k_closed):
    M, delta = fit_decay_bound(k_closed)
    assert delta == pytest.approx(math.sqrt(2) - 1, rel=0.05)
    M2, delta2 = fit_decay_bound(k_closed.samples.scale(2.0))
    assert M2 == pytest.approx(2 * M, rel=1e-12)
    assert delta2 == pytest.approx(delta, rel=1e-12)


def test_envelope_holds():
    k = spectral_kernel(1.0, 3.0, 1.5, 0.02, L_K, H)
    t, g = k.samples.t, k.samples.values
    assert np.all(np.abs(g) <= k.M * np.exp(-k.delta * np.abs(t)) * (1 + 1e-12))


def test_convolve_constant(k_default):
    L = 20.0
    k = 0.8
    Hc = GridFunction.constant(1.5 * k, L, H)
    out = convolve(k_default, Hc)
    assert np.max(np.abs(out.values - k)) < 1e-10
    assert out.limits == pytest.approx((k, k))


def test_convolve_limits(k_default):
    L = 20.0
    t = grid_nodes(L, H)
    Hf = GridFunction(L, H, 1.5 * 0.8 * (t > 0), 0.0, 1.5 * 0.8)
    out = convolve(k_default, Hf)
    assert out.limits == pytest.approx((0.0, 0.8))


def test_convolve_narrow_hat(k_default):
    L = 20.0
    t = grid_nodes(L, H)
    w = 2 * H
    Hf = GridFunction(L, H, np.maximum(0.0, 1.0 - np.abs(t) / w) / w, 0.0, 0.0)
    out = convolve(k_default, Hf)
    assert np.max(np.abs(out.values - k_default.samples(t))) <= 2 * H


def test_linear_residual_identity(k_default):
    # D x'' - c x'(. + r) - beta x(. + r) + H = 0 for x = G * H
    L = 20.0
    t = grid_nodes(L, H)
    Hf = GridFunction(L, H, 1.2 * (1 + np.tanh(t)) / 2, 0.0, 1.2)
    x = convolve(k_default, Hf)
    r = 0.01
    xv = x.values
    d2 = (xv[2:] - 2 * xv[1:-1] + xv[:-2]) / H ** 2
    tt = t[1:-1]
    xs = lambda s: x(tt + r + s)  # noqa: E731
    d1s = (xs(H) - xs(-H)) / (2 * H)
    res = d2 - 3.0 * d1s - 1.5 * xs(0.0) + Hf.values[1:-1]
    sel = np.abs(tt) < 15
    assert np.max(np.abs(res[sel])) < 10 * H ** 2 + 1e-6


def test_symbol_bounded_away_from_zero():
    assert check_symbol(1.0, 3.0, 1.5, 0.01) > 1e-3


def test_large_delay_kernel_not_positive():
    k = spectral_kernel(1.0, 3.0, 1.5, 1.0, L_K, H)
    with pytest.raises(KernelNotPositive):
        check_positive(k)


@settings(max_examples=15, deadline=None)
@given(st.floats(2.1, 5.0), st.floats(0.3, 3.0), st.floats(0.5, 2.0))
def test_closed_form_mass_property(c, beta, D):
    lm, lp = characteristic_exponents(D, c, beta)
    k = closed_form_kernel(D, c, beta, math.ceil(30.0 / min(-lm, lp)), 0.05)
    assert k.integral == pytest.approx(1.0 / beta, rel=1e-10)
    assert np.all(k.samples.values >= 0)
