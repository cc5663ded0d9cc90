import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import kpp_front
from wavefrontier.core import GridFunction, ProfilePair, grid_nodes
from wavefrontier.iteration import (
    MaxIterExceeded,
    NoCrossing,
    aligned_error,
    boundary_certificate,
    cross_step,
    level_crossing,
    solve,
    translate_align,
)


def constants_pair(wave, lo=0.0, hi=1.0):
    z = GridFunction.constant(lo, wave.L, wave.h)
    o = GridFunction.constant(hi, wave.L, wave.h)
    return ProfilePair(z, z, o, o, wave.box)


def test_cross_step_constant_bracket_is_fixed(ops):
    nxt = cross_step(constants_pair(ops.wave), ops)
    assert np.all(nxt.lower_phi.values == 0.0) and np.all(nxt.lower_psi.values == 0.0)
    assert np.max(np.abs(nxt.upper_phi.values - 1.0)) < 1e-10
    assert np.max(np.abs(nxt.upper_psi.values - 1.0)) < 1e-10


def test_cross_step_keeps_order(pair0, ops):
    nxt = cross_step(pair0, ops)
    assert max(nxt.trapping_violations().values()) <= 1e-8
    for new, old in ((nxt.upper_phi, pair0.upper_phi), (nxt.upper_psi, pair0.upper_psi)):
        assert np.all(new.values <= old.values + 1e-8)
    for new, old in ((nxt.lower_phi, pair0.lower_phi), (nxt.lower_psi, pair0.lower_psi)):
        assert np.all(new.values >= old.values - 1e-8)


def test_solved_wave(solved, ops):
    c = solved.certificates
    assert solved.converged and solved.reason == "residual"
    assert c["residual_sup"] <= 1e-5
    assert c["boundary"]["ok"]
    assert solved.candidate == "lower_branch"
    k1 = ops.wave.equilibrium[0]
    assert solved.phi.values[-1] == pytest.approx(k1, abs=1e-3)


def test_solved_is_near_fixed_point(solved, ops):
    F1 = ops.F1(solved.phi, solved.psi)
    F2 = ops.F2(solved.phi, solved.psi)
    t = solved.phi.t
    sel = np.abs(t) < 30
    assert np.max(np.abs(F1.values - solved.phi.values)[sel]) < 1e-3
    assert np.max(np.abs(F2.values - solved.psi.values)[sel]) < 1e-3


def test_trace_invariants(solved):
    tr = solved.trace
    g = np.array(tr["gap_sup"])
    assert np.all(np.diff(g) <= 1e-10)
    assert len(tr["residual"]) == solved.certificates["iterations"] + 1
    assert all(th in (0.5, 1.0) for th in tr["theta"])


def test_zero_iterations_returns_initial_state(pair0, ops):
    res = solve(pair0, ops, tol_gap=np.inf, max_iter=0)
    assert res.reason == "gap" and res.certificates["iterations"] == 0
    assert res.pair is pair0


def test_max_iter_raises(pair0, ops):
    with pytest.raises(MaxIterExceeded) as err:
        solve(pair0, ops, max_iter=2)
    assert err.value.result is not None and err.value.result.reason == "max_iter"
    res = solve(pair0, ops, max_iter=2, raise_on_max=False)
    assert not res.converged


def test_boundary_certificate():
    g = GridFunction(1.0, 0.5, np.array([0.0, 0.1, 0.4, 0.7, 0.8]), 0.0, 0.8)
    assert boundary_certificate(g, 0.8)["ok"]
    assert not boundary_certificate(g.scale(0.5), 0.8)["right_ok"]


def test_level_crossing():
    g = GridFunction.from_callable(lambda t: 0.5 * (1 + np.tanh(t - 0.3)), 5.0, 0.01, 0.0, 1.0)
    assert level_crossing(g, 0.5) == pytest.approx(0.3, abs=1e-4)
    with pytest.raises(NoCrossing):
        level_crossing(g, 2.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_translate_align_recovers_shift(shift):
    L, h = 20.0, 0.02
    f = lambda t: 0.5 * (1 + np.tanh(t))  # noqa: E731
    ref = GridFunction.from_callable(f, L, h, 0.0, 1.0)
    moved = GridFunction.from_callable(lambda t: f(t - shift), L, h, 0.0, 1.0)
    assert translate_align(ref, ref) == pytest.approx(0.0, abs=1e-9)
    assert translate_align(moved, ref, window=10) == pytest.approx(shift, abs=h)


def test_kpp_matches_ode_oracle(kpp_solved):
    assert kpp_solved.candidate == "upper_branch"
    phi = kpp_solved.phi
    t_o, v_o = kpp_front()
    t = grid_nodes(phi.L, phi.h)
    ref = GridFunction(phi.L, phi.h, np.interp(t, t_o, v_o), 0.0, 1.0)
    _, err = aligned_error(phi, ref, window=20)
    assert err <= 1e-3
    assert np.all(kpp_solved.psi.values == 0.0)
