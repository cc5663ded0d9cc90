import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import KPP_MODEL
from oracles import kpp_front
from wavefrontier.core import GridFunction, ModelParams, grid_nodes, validate
from wavefrontier.waveops import (
    PqmViolated,
    ReactionSpec,
    WaveOperators,
    analytic_lipschitz,
    choose_betas,
    f1_pointwise,
    f1c,
    f2c,
    f_ordering_suite,
    h_ordering_suite,
    lipschitz_ratios,
    pqm_check,
    random_ordered_pair,
    residual_sup,
)

TOL = 1e-10
ZERO_DELAY = ModelParams(tau1=0.0, tau2=0.0, tau3=0.0, tau4=0.0)


def const(v, wave):
    return GridFunction.constant(v, wave.L, wave.h)


@pytest.fixture(scope="module")
def ops0():
    return WaveOperators(ZERO_DELAY, validate(ZERO_DELAY))


def test_f1c_examples(wave):
    spec = ReactionSpec(1.0, 1.0, 0.25, 0.25)
    t = np.linspace(-3, 3, 7)
    assert np.all(f1c(spec, const(0.0, wave), const(0.7, wave), t) == 0.0)
    k = const(0.8, wave)
    assert np.max(np.abs(f1c(spec, k, k, t))) < 1e-15
    assert np.max(np.abs(f2c(spec, k, k, t))) < 1e-15
    half = const(0.5, wave)
    assert f1c(spec, half, half, t) == pytest.approx(np.full(7, 0.1875), abs=1e-15)


@pytest.mark.parametrize("a,K,expected", [(0.25, (1.0, 1.0), 1.5), (1.0, (0.5, 0.5), 0.75), (0.7, (0.5, 0.0), 0.25)])
def test_choose_betas(a, K, expected):
    spec = ReactionSpec(1.0, 1.0, a, a)
    assert choose_betas(spec, K)[0] == pytest.approx(expected, abs=1e-15)


def test_analytic_lipschitz_default():
    assert analytic_lipschitz(ReactionSpec(1.0, 1.0, 0.25, 0.25), (1.0, 1.0))[0] == pytest.approx(1.5)


def test_h1_examples(ops0):
    w = ops0.wave
    assert np.all(ops0.H1(const(0.0, w), const(0.0, w)).values == 0.0)
    k = const(0.8, w)
    assert np.max(np.abs(ops0.H1(k, k).values - w.beta1 * 0.8)) < 1e-14
    half = const(0.5, w)
    assert np.max(np.abs(ops0.H1(half, half).values - 0.9375)) < 1e-15


def test_f_examples(ops):
    w = ops.wave
    zero = const(0.0, w)
    assert np.max(np.abs(ops.F1(zero, zero).values)) < 1e-15
    k = const(0.8, w)
    F1, F2 = ops.F(k, k)
    assert np.max(np.abs(F1.values - 0.8)) < 1e-10
    assert np.max(np.abs(F2.values - 0.8)) < 1e-10


def test_f_solves_linear_problem(ops):
    # D F'' - c F'(. + r) - beta F(. + r) + H = 0 up to O(h^2)
    w = ops.wave
    t = grid_nodes(w.L, w.h)
    phi = GridFunction(w.L, w.h, 0.8 * (1 + np.tanh(t / 3)) / 2, 0.0, 0.8)
    psi = GridFunction(w.L, w.h, 0.6 * (1 + np.tanh(t / 2)) / 2, 0.0, 0.6)
    H = ops.H1(phi, psi)
    res = ops.linear_residual(ops.F1(phi, psi), H, which=1)
    sel = np.abs(t) < 30
    assert np.max(np.abs(res[sel])) < 10 * w.h ** 2 + 1e-6


def test_residual_of_equilibria(ops):
    w = ops.wave
    for v in (0.0, 0.8):
        rp, rs = ops.wave_residual(const(v, w), const(v, w))
        assert residual_sup(rp) < 1e-14 and residual_sup(rs) < 1e-14


def test_kpp_oracle_residual():
    wave = validate(KPP_MODEL)
    ops = WaveOperators(KPP_MODEL, wave)
    t_o, v_o = kpp_front()
    t = grid_nodes(wave.L, wave.h)
    phi = GridFunction(wave.L, wave.h, np.interp(t, t_o, v_o), 0.0, 1.0)
    zero = const(0.0, wave)
    rp, _ = ops.wave_residual(phi, zero)
    assert residual_sup(rp) <= 1e-3


def test_pqm_defaults_pass(ops):
    rep = pqm_check(ops.spec, ops.wave.beta1, ops.wave.beta2, ops.box, n_samples=300, seed=1)
    assert rep["ok"]
    assert all(rep["margins"][k] >= -TOL for k in ("P1", "P2", "P3", "P4"))


def test_pqm_without_shift_fails(ops):
    with pytest.raises(PqmViolated) as err:
        pqm_check(ops.spec, 0.0, ops.wave.beta2, ops.box, n_samples=300, seed=1)
    assert "P1" in str(err.value) and err.value.witness


def test_pqm_identical_arguments_margin_zero():
    spec = ReactionSpec(1.0, 1.0, 0.25, 0.25)
    p, q = 0.7, 0.3
    assert f1_pointwise(spec, p, q) - f1_pointwise(spec, p, q) + 1.5 * (p - p) == 0.0


def test_suites_thread_independent(ops):
    a = h_ordering_suite(ops, 60, seed=3, threads=1)
    b = h_ordering_suite(ops, 60, seed=3, threads=3)
    assert a == b
    c = pqm_check(ops.spec, 1.5, 1.5, n_samples=120, seed=3, threads=1)
    d = pqm_check(ops.spec, 1.5, 1.5, n_samples=120, seed=3, threads=4)
    assert c["margins"] == d["margins"]


def test_ordering_statements_that_hold(ops):
    hs = h_ordering_suite(ops, 100, seed=0)["margins"]
    fs = f_ordering_suite(ops, 100, seed=0)["margins"]
    for key in ("H1", "H2", "H3", "H4c", "H5c_phi", "H5c_psi"):
        assert hs[key] >= -TOL, key
    for key in ("F2", "F3", "F1c", "F4c_phi", "F4c_psi"):
        assert fs[key] >= -TOL, key


def test_lipschitz_ratio_below_bound(ops):
    rep = lipschitz_ratios(ops, 60, seed=0)
    assert 0 < rep["h_ratio"] <= rep["h_bound"]
    assert np.isfinite(rep["f_ratio"])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_f_maps_box_into_box(ops, seed):
    rng = np.random.default_rng(seed)
    w = ops.wave
    phi, _ = random_ordered_pair(rng, w.L, w.h, 1.0, monotone=True)
    psi, _ = random_ordered_pair(rng, w.L, w.h, 1.0, monotone=True)
    F1, F2 = ops.F(phi, psi)
    for F in (F1, F2):
        assert F.values.min() >= -1e-12 and F.values.max() <= 1.0 + 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_h1_monotone_in_phi(ops, seed):
    rng = np.random.default_rng(seed)
    w = ops.wave
    hi, lo = random_ordered_pair(rng, w.L, w.h, 1.0, monotone=True)
    psi, _ = random_ordered_pair(rng, w.L, w.h, 1.0, monotone=True)
    assert np.min(ops.H1(hi, psi).values - ops.H1(lo, psi).values) >= -TOL
