"""Cross iteration between lower and upper solutions and the wave certificate.

One step maps (lower_phi, lower_psi, upper_phi, upper_psi) to

    upper_phi <- F1(upper_phi, lower_psi)    lower_phi <- F1(lower_phi, upper_psi)
    upper_psi <- F2(lower_phi, upper_psi)    lower_psi <- F2(upper_phi, lower_psi)

so the bracket splits into two monotone sequences, one started from
(upper_phi, lower_psi) and one from (lower_phi, upper_psi). Each tends to a
wave of its own; the returned candidate is whichever of the midpoint and the
two branch pairs has the smallest residual and valid boundary values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .core import GridFunction, ProfilePair, WavefrontierError, decay_norm, sup_norm
from .waveops import WaveOperators, residual_sup

EDGE = 5.0


class OrderingBroken(WavefrontierError):
    def __init__(self, msg: str, witness: dict | None = None):
        super().__init__(msg)
        self.witness = witness or {}


class MaxIterExceeded(WavefrontierError):
    def __init__(self, msg: str, result: "SolveResult | None" = None):
        super().__init__(msg)
        self.result = result


class NoCrossing(WavefrontierError):
    pass


@dataclass
class IterationState:
    pair: ProfilePair
    iter: int
    gap_sup: float
    gap_mu: float
    residual_sup: float


@dataclass
class SolveResult:
    phi: GridFunction
    psi: GridFunction
    pair: ProfilePair
    candidate: str
    converged: bool
    reason: str
    trace: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)

    def diagnostics(self) -> dict:
        return {
            "candidate": self.candidate,
            "converged": self.converged,
            "termination": self.reason,
            "certificates": self.certificates,
            "trace": self.trace,
        }


def gaps(pair: ProfilePair, mu: float) -> tuple[float, float]:
    d_phi = pair.upper_phi - pair.lower_phi
    d_psi = pair.upper_psi - pair.lower_psi
    return sup_norm([d_phi, d_psi]), decay_norm([d_phi, d_psi], mu)


def cross_step(pair: ProfilePair, ops: WaveOperators, theta: float = 1.0, tol: float = 1e-8,
               check: bool = True) -> ProfilePair:
    """One cross-iteration step; ``theta < 1`` blends with the previous pair."""
    lp, ls, up, us = pair.lower_phi, pair.lower_psi, pair.upper_phi, pair.upper_psi
    new = [
        ops.F1(lp, us),
        ops.F2(up, ls),
        ops.F1(up, ls),
        ops.F2(lp, us),
    ]
    if theta != 1.0:
        old = (lp, ls, up, us)
        new = [n.scale(theta) + o.scale(1.0 - theta) for n, o in zip(new, old)]
    out = ProfilePair(*new, box=pair.box)
    if check:
        # psi monotonicity is traced by solve, not asserted here
        viol = out.trapping_violations()
        bad = {k: v for k, v in viol.items() if v > tol}
        if bad:
            worst = max(bad, key=bad.get)
            raise OrderingBroken(f"cross step broke '{worst}' by {bad[worst]:.3e}", {"invariant": worst, "amount": bad[worst]})
    return out


def candidates(pair: ProfilePair) -> dict[str, tuple[GridFunction, GridFunction]]:
    mid = pair.midpoint()
    return {
        "midpoint": mid,
        "lower_branch": (pair.lower_phi, pair.upper_psi),
        "upper_branch": (pair.upper_phi, pair.lower_psi),
    }


def boundary_certificate(phi: GridFunction, k1: float, tol: float = 1e-3) -> dict:
    left = float(phi.values[0])
    right = float(phi.values[-1])
    ok_left = abs(left) <= tol
    ok_right = 0.5 - tol <= right <= k1 + tol
    return {"phi(-L)": left, "phi(L)": right, "k1": k1, "left_ok": ok_left, "right_ok": ok_right,
            "ok": bool(ok_left and ok_right)}


def candidate_residual(ops: WaveOperators, phi, psi, edge: float = EDGE) -> float:
    rp, rs = ops.wave_residual(phi, psi)
    return max(residual_sup(rp, edge), residual_sup(rs, edge))


def _select(ops: WaveOperators, pair: ProfilePair, edge: float):
    k1 = ops.wave.equilibrium[0]
    best = None
    scores = {}
    for name, (phi, psi) in candidates(pair).items():
        res = candidate_residual(ops, phi, psi, edge)
        cert = boundary_certificate(phi, k1)
        scores[name] = {"residual": res, "boundary_ok": cert["ok"]}
        key = (not cert["ok"], res)
        if best is None or key < best[0]:
            best = (key, name, phi, psi, res, cert)
    return best[1:], scores


def solve(pair0: ProfilePair, ops: WaveOperators, tol_gap: float = 1e-8, tol_residual: float = 1e-4,
          max_iter: int = 2000, *, edge: float = EDGE, theta: float = 1.0, raise_on_max: bool = True,
          callback=None) -> SolveResult:
    """Iterate the cross step until a candidate is certified as a wave.

    Stops when the best candidate has residual <= ``tol_residual`` and valid
    boundary values, or the bracket gap drops below ``tol_gap``. Trapping and
    the monotone gap are checked after every step.
    """
    mu = ops.wave.mu
    pair = pair0
    g_sup, g_mu = gaps(pair, mu)
    (name, phi, psi, res, cert), scores = _select(ops, pair, edge)
    trace = {"gap_sup": [g_sup], "gap_mu": [g_mu], "residual": [res], "candidate": [name],
             "step_mu": [], "theta": [], "psi_monotone_defect": [max(pair.monotone_violations().values())]}
    state = IterationState(pair, 0, g_sup, g_mu, res)
    reason = None
    osc = 0
    while True:
        if res <= tol_residual and cert["ok"]:
            reason = "residual"
            break
        if g_sup <= tol_gap:
            reason = "gap"
            break
        if state.iter >= max_iter:
            reason = "max_iter"
            break
        new = cross_step(pair, ops, theta)
        step = decay_norm([new.lower_phi - pair.lower_phi, new.lower_psi - pair.lower_psi,
                           new.upper_phi - pair.upper_phi, new.upper_psi - pair.upper_psi], mu)
        ng_sup, ng_mu = gaps(new, mu)
        if ng_sup > g_sup + 1e-10:
            raise OrderingBroken(f"gap grew from {g_sup:.6e} to {ng_sup:.6e} at step {state.iter + 1}",
                                 {"iter": state.iter + 1, "gap_before": g_sup, "gap_after": ng_sup})
        # optional relaxation when the decay-norm gap oscillates
        if ng_mu > g_mu:
            osc += 1
            if osc >= 2 and theta == 1.0:
                theta = 0.5
        pair, g_sup, g_mu = new, ng_sup, ng_mu
        (name, phi, psi, res, cert), scores = _select(ops, pair, edge)
        state = IterationState(pair, state.iter + 1, g_sup, g_mu, res)
        trace["gap_sup"].append(g_sup)
        trace["gap_mu"].append(g_mu)
        trace["residual"].append(res)
        trace["candidate"].append(name)
        trace["step_mu"].append(step)
        trace["theta"].append(theta)
        trace["psi_monotone_defect"].append(max(pair.monotone_violations().values()))
        if callback is not None:
            callback(state)
    certificates = {
        "residual_sup": res,
        "tol_residual": tol_residual,
        "residual_ok": bool(res <= tol_residual),
        "boundary": cert,
        "candidates": scores,
        "iterations": state.iter,
        "trapping_ok": True,
        "monotone_gap_ok": True,
        "bracket_psi_monotone_defect_max": float(max(trace["psi_monotone_defect"])),
        "phi_monotone_defect": float(np.max(-np.diff(phi.values), initial=0.0)),
        "psi_monotone_defect": float(np.max(-np.diff(psi.values), initial=0.0)),
    }
    result = SolveResult(phi, psi, pair, name, reason in ("residual", "gap") and cert["ok"], reason, trace, certificates)
    if reason == "max_iter" and raise_on_max:
        raise MaxIterExceeded(f"no certified wave after {max_iter} iterations (residual {res:.3e})", result)
    return result


def level_crossing(g: GridFunction, level: float) -> float:
    """First t where the samples cross ``level`` (linear interpolation)."""
    v = g.values - level
    idx = np.nonzero((v[:-1] <= 0) & (v[1:] > 0) | (v[:-1] >= 0) & (v[1:] < 0))[0]
    if idx.size == 0:
        raise NoCrossing(f"profile never crosses {level}")
    j = int(idx[0])
    t = g.t
    if v[j + 1] == v[j]:
        return float(t[j])
    return float(t[j] - v[j] * (t[j + 1] - t[j]) / (v[j + 1] - v[j]))


def translate_align(profile: GridFunction, reference: GridFunction, window: float | None = None) -> float:
    """Shift s minimizing sup |profile(t + s) - reference(t)|.

    Starts from the difference of the half-way crossings and refines with a
    bounded scalar search of width 2h.
    """
    level = 0.5 * (reference.left_limit + reference.right_limit)
    s0 = level_crossing(profile, level) - level_crossing(reference, level)
    t = reference.t
    if window is not None:
        t = t[np.abs(t) <= window]

    def err(s):
        return float(np.max(np.abs(profile(t + s) - reference(t))))

    h = reference.h
    opt = minimize_scalar(err, bounds=(s0 - 2 * h, s0 + 2 * h), method="bounded", options={"xatol": 1e-10})
    return float(opt.x) if opt.fun <= err(s0) else float(s0)


def aligned_error(profile: GridFunction, reference: GridFunction, window: float | None = None) -> tuple[float, float]:
    s = translate_align(profile, reference, window)
    t = reference.t
    if window is not None:
        t = t[np.abs(t) <= window]
    return s, float(np.max(np.abs(profile(t + s) - reference(t))))
