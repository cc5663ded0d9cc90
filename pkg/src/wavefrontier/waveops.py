"""Reaction functionals, PQM checks, the shifted operators H and F, and wave residuals."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import GridFunction, ModelParams, WaveParams, WavefrontierError, decay_norm, grid_nodes
from .kernel import Kernel, build_kernel, check_positive, convolve

BETA_MARGIN = 0.25


class DomainViolation(WavefrontierError):
    pass


class PqmViolated(WavefrontierError):
    def __init__(self, msg: str, witness: dict | None = None):
        super().__init__(msg)
        self.witness = witness or {}


@dataclass(frozen=True)
class ReactionSpec:
    alpha1: float
    alpha2: float
    a: float
    b: float
    r1: float = 0.0
    r2: float = 0.0
    r3: float = 0.0
    r4: float = 0.0

    @classmethod
    def from_params(cls, model: ModelParams, wave: WaveParams) -> "ReactionSpec":
        return cls(model.alpha1, model.alpha2, model.a, model.b, wave.r1, wave.r2, wave.r3, wave.r4)


def f1_pointwise(spec: ReactionSpec, phi0, psi_lag):
    """alpha1 phi(0) (1 - phi(0) - a psi(-r2)) on already-evaluated values."""
    return spec.alpha1 * phi0 * (1.0 - phi0 - spec.a * psi_lag)


def f2_pointwise(spec: ReactionSpec, psi0, phi_lag):
    return spec.alpha2 * psi0 * (1.0 - psi0 - spec.b * phi_lag)


def f1c(spec: ReactionSpec, phi: GridFunction, psi: GridFunction, t):
    """alpha1 phi(t+r1) (1 - phi(t+r1) - a psi(t+r1-r2))."""
    t = np.asarray(t, dtype=float)
    return f1_pointwise(spec, phi(t + spec.r1), psi(t + spec.r1 - spec.r2))


def f2c(spec: ReactionSpec, phi: GridFunction, psi: GridFunction, t):
    """alpha2 psi(t+r3) (1 - psi(t+r3) - b phi(t+r3-r4))."""
    t = np.asarray(t, dtype=float)
    return f2_pointwise(spec, psi(t + spec.r3), phi(t + spec.r3 - spec.r4))


def choose_betas(spec: ReactionSpec, K) -> tuple[float, float]:
    """Shift constants making each reaction quasimonotone in its own species on [0, K]."""
    k1, k2 = K
    b1 = max(spec.alpha1 * (2 * k1 + spec.a * k2 - 1.0), 0.0) + BETA_MARGIN
    b2 = max(spec.alpha2 * (2 * k2 + spec.b * k1 - 1.0), 0.0) + BETA_MARGIN
    return b1, b2


def analytic_lipschitz(spec: ReactionSpec, K) -> tuple[float, float]:
    """Lipschitz bounds of f1, f2 on the box [0, K] for the decay norm.

    The two arguments are read at different delays, so the partial bounds add
    rather than combining in quadrature.
    """
    k1, k2 = K
    L1 = spec.alpha1 * (max(1.0, 2 * k1 + spec.a * k2 - 1.0) + spec.a * k1)
    L2 = spec.alpha2 * (max(1.0, 2 * k2 + spec.b * k1 - 1.0) + spec.b * k2)
    return L1, L2


def _check_domain(phi: GridFunction, psi: GridFunction, box, tol: float = 1e-8) -> None:
    k1, k2 = box
    for name, g, k in (("phi", phi, k1), ("psi", psi, k2)):
        lo = min(float(np.min(g.values)), g.left_limit, g.right_limit)
        hi = max(float(np.max(g.values)), g.left_limit, g.right_limit)
        if lo < -tol or hi > k + tol:
            raise DomainViolation(f"{name} leaves [0, {k:g}]: range [{lo:.3e}, {hi:.6g}]")


class WaveOperators:
    """H, F and residual operators for one parameter set.

    Kernels are built lazily on a window twice the profile half-length, so a
    single discrete convolution covers every pair of profile nodes.
    """

    def __init__(self, model: ModelParams, wave: WaveParams, *, require_positive: bool = True):
        self.model = model
        self.wave = wave
        self.spec = ReactionSpec.from_params(model, wave)
        self.require_positive = require_positive

    @cached_property
    def kernel1(self) -> Kernel:
        k = build_kernel(self.model.D1, self.model.c, self.wave.beta1, self.wave.r1, 2 * self.wave.L, self.wave.h)
        if self.require_positive:
            check_positive(k)
        return k

    @cached_property
    def kernel2(self) -> Kernel:
        w, m = self.wave, self.model
        if (m.D2, w.beta2, w.r3) == (m.D1, w.beta1, w.r1):
            return self.kernel1
        k = build_kernel(m.D2, m.c, w.beta2, w.r3, 2 * w.L, w.h)
        if self.require_positive:
            check_positive(k)
        return k

    @property
    def box(self) -> tuple[float, float]:
        return self.wave.box

    @property
    def t(self) -> np.ndarray:
        return grid_nodes(self.wave.L, self.wave.h)

    def f1(self, phi, psi) -> np.ndarray:
        return f1c(self.spec, phi, psi, phi.t)

    def f2(self, phi, psi) -> np.ndarray:
        return f2c(self.spec, phi, psi, phi.t)

    def _limits1(self, phi, psi):
        s = self.spec
        lo = f1_pointwise(s, phi.left_limit, psi.left_limit) + self.wave.beta1 * phi.left_limit
        hi = f1_pointwise(s, phi.right_limit, psi.right_limit) + self.wave.beta1 * phi.right_limit
        return lo, hi

    def _limits2(self, phi, psi):
        s = self.spec
        lo = f2_pointwise(s, psi.left_limit, phi.left_limit) + self.wave.beta2 * psi.left_limit
        hi = f2_pointwise(s, psi.right_limit, phi.right_limit) + self.wave.beta2 * psi.right_limit
        return lo, hi

    def H1(self, phi: GridFunction, psi: GridFunction, check: bool = True) -> GridFunction:
        if check:
            _check_domain(phi, psi, self.box)
        vals = self.f1(phi, psi) + self.wave.beta1 * phi(phi.t + self.spec.r1)
        # psi only enters multiplied by phi, so the tail rate is phi's
        return GridFunction(phi.L, phi.h, vals, *self._limits1(phi, psi), phi.left_rate)

    def H2(self, phi: GridFunction, psi: GridFunction, check: bool = True) -> GridFunction:
        if check:
            _check_domain(phi, psi, self.box)
        vals = self.f2(phi, psi) + self.wave.beta2 * psi(psi.t + self.spec.r3)
        return GridFunction(psi.L, psi.h, vals, *self._limits2(phi, psi), psi.left_rate)

    def F1(self, phi: GridFunction, psi: GridFunction, check: bool = True) -> GridFunction:
        return convolve(self.kernel1, self.H1(phi, psi, check))

    def F2(self, phi: GridFunction, psi: GridFunction, check: bool = True) -> GridFunction:
        return convolve(self.kernel2, self.H2(phi, psi, check))

    def F(self, phi, psi, check: bool = True) -> tuple[GridFunction, GridFunction]:
        return self.F1(phi, psi, check), self.F2(phi, psi, check)

    def linear_residual(self, x: GridFunction, H: GridFunction, which: int = 1) -> np.ndarray:
        """D x'' - c x'(t+r) - beta x(t+r) + H on interior nodes (finite differences)."""
        D = self.model.D1 if which == 1 else self.model.D2
        beta = self.wave.beta1 if which == 1 else self.wave.beta2
        r = self.wave.r1 if which == 1 else self.wave.r3
        d2, d1 = derivatives(x)
        t = x.t
        return D * d2.values - self.model.c * d1(t + r) - beta * x(t + r) + H.values

    def wave_residual(self, phi: GridFunction, psi: GridFunction) -> tuple[GridFunction, GridFunction]:
        return wave_residual(self.model, self.spec, phi, psi)


def derivatives(x: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Centered second and first differences; ghost nodes use the declared tails."""
    v = np.concatenate((np.atleast_1d(x.left_tail(-x.L - x.h)), x.values, [x.right_limit]))
    h = x.h
    d2 = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    d1 = (v[2:] - v[:-2]) / (2.0 * h)
    return (GridFunction(x.L, h, d2, 0.0, 0.0), GridFunction(x.L, h, d1, 0.0, 0.0))


def wave_residual(model: ModelParams, spec: ReactionSpec, phi: GridFunction, psi: GridFunction):
    """Pointwise defect of both wave equations on the grid.

    The shifted derivative x'(t+r) interpolates the centered-difference array,
    which keeps the whole expression second order in h.
    """
    t = phi.t
    p2, p1 = derivatives(phi)
    q2, q1 = derivatives(psi)
    r_phi = model.D1 * p2.values - model.c * p1(t + spec.r1) + f1c(spec, phi, psi, t)
    r_psi = model.D2 * q2.values - model.c * q1(t + spec.r3) + f2c(spec, phi, psi, t)
    return GridFunction(phi.L, phi.h, r_phi, 0.0, 0.0), GridFunction(psi.L, psi.h, r_psi, 0.0, 0.0)


def residual_sup(res: GridFunction, edge: float = 5.0) -> float:
    t = res.t
    mask = np.abs(t) <= res.L - edge
    return float(np.max(np.abs(res.values[mask])))


# --------------------------------------------------------------------------
# random profiles for the property suites

def random_knot_profile(rng: np.random.Generator, L: float, h: float, k: float, *, monotone: bool,
                        n_knots: int = 16, span: float | None = None) -> GridFunction:
    """Piecewise-linear profile on ``n_knots`` random knots with values in [0, k].

    Monotone profiles use sorted knot values with limits (first, last); other
    profiles are extended by their end values as well.
    """
    span = min(L, 12.0) if span is None else span
    knots = np.sort(rng.uniform(-span, span, n_knots))
    vals = rng.uniform(0.0, k, n_knots)
    if monotone:
        vals = np.sort(vals)
    t = grid_nodes(L, h)
    return GridFunction(L, h, np.interp(t, knots, vals), float(vals[0]), float(vals[-1]))


def random_ordered_pair(rng, L, h, k, *, monotone: bool, **kw) -> tuple[GridFunction, GridFunction]:
    """(upper, lower) with 0 <= lower <= upper <= k on the same knots."""
    span = kw.pop("span", min(L, 12.0))
    n_knots = kw.pop("n_knots", 16)
    knots = np.sort(rng.uniform(-span, span, n_knots))
    hi = rng.uniform(0.0, k, n_knots)
    lo = hi * rng.uniform(0.0, 1.0, n_knots)
    if monotone:
        hi = np.sort(hi)
        lo = np.minimum(np.sort(lo), hi)
    t = grid_nodes(L, h)
    up = GridFunction(L, h, np.interp(t, knots, hi), float(hi[0]), float(hi[-1]))
    dn = GridFunction(L, h, np.interp(t, knots, lo), float(lo[0]), float(lo[-1]))
    return up, dn


# --------------------------------------------------------------------------
# PQM and ordering suites

CHUNK = 50


def chunked_map(body, n: int, seed: int, threads: int = 1, chunk: int = CHUNK) -> list:
    """Run ``body(rng, count)`` over fixed chunks of ``n`` samples.

    Every chunk gets its own generator spawned from ``seed``, so the results
    do not depend on the number of threads.
    """
    sizes = [min(chunk, n - i) for i in range(0, n, chunk)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(sq), k) for sq, k in zip(seqs, sizes)]
    if threads <= 1 or len(jobs) <= 1:
        return [body(rng, k) for rng, k in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: body(*job), jobs))


def _merge_min(parts: list[dict]) -> dict:
    out = {}
    for part in parts:
        for key, v in part.items():
            out[key] = min(out.get(key, math.inf), v)
    return out


def pqm_check(spec: ReactionSpec, beta1: float, beta2: float, K=(1.0, 1.0), n_samples: int = 1000,
              seed: int = 0, *, raise_on_fail: bool = True, tol: float = 1e-12, threads: int = 1) -> dict:
    """Sample the four PQM inequalities on random ordered profile quadruples.

    Margins are oriented so that >= 0 means the inequality holds. (P3) is
    checked in the own-species form (psi varies, phi fixed); the variant that
    moves both arguments together is reported as ``P3_joint`` only.
    """
    k1, k2 = K
    L, h = 20.0, 0.05
    keys = ("P1", "P2", "P3", "P4", "P3_joint")

    def body(rng, count):
        margins = {key: math.inf for key in keys}
        witness = {}
        for _ in range(count):
            p1, p2 = random_ordered_pair(rng, L, h, k1, monotone=False)
            q1, q2 = random_ordered_pair(rng, L, h, k2, monotone=False)
            # functionals only read phi(0), psi(-r2) and psi(0), phi(-r4)
            P1, P2 = float(p1(0.0)), float(p2(0.0))
            Q1, Q2 = float(q1(0.0)), float(q2(0.0))
            P1l, P2l = float(p1(-spec.r4)), float(p2(-spec.r4))
            Q1l, Q2l = float(q1(-spec.r2)), float(q2(-spec.r2))
            vals = {
                "P1": f1_pointwise(spec, P1, Q1l) - f1_pointwise(spec, P2, Q1l) + beta1 * (P1 - P2),
                "P2": -(f1_pointwise(spec, P1, Q1l) - f1_pointwise(spec, P1, Q2l)),
                "P3": f2_pointwise(spec, Q1, P1l) - f2_pointwise(spec, Q2, P1l) + beta2 * (Q1 - Q2),
                "P4": -(f2_pointwise(spec, Q1, P1l) - f2_pointwise(spec, Q1, P2l)),
                "P3_joint": f2_pointwise(spec, Q1, P1l) - f2_pointwise(spec, Q2, P2l) + beta2 * (Q1 - Q2),
            }
            for key, v in vals.items():
                if v < margins[key]:
                    margins[key] = float(v)
                    witness[key] = {"phi1": P1, "phi2": P2, "psi1": Q1, "psi2": Q2,
                                    "phi1_lag": P1l, "phi2_lag": P2l, "psi1_lag": Q1l, "psi2_lag": Q2l}
        return margins, witness

    margins = {key: math.inf for key in keys}
    witness = {}
    for part_m, part_w in chunked_map(body, n_samples, seed, threads):
        for key, v in part_m.items():
            if v < margins[key]:
                margins[key] = v
                witness[key] = part_w[key]
    asserted = ("P1", "P2", "P3", "P4")
    report = {
        "margins": margins,
        "passed": {key: margins[key] >= -tol for key in margins},
        "ok": all(margins[key] >= -tol for key in asserted),
        "n_samples": n_samples,
        "seed": seed,
        "beta": [beta1, beta2],
        "K": [k1, k2],
    }
    if raise_on_fail and not report["ok"]:
        worst = min(asserted, key=lambda key: margins[key])
        raise PqmViolated(f"({worst}) violated, margin {margins[worst]:.3e}", witness[worst])
    report["witness"] = {k: witness[k] for k in margins if margins[k] < -tol}
    return report


def _min_margin(x) -> float:
    return float(np.min(x))


def _monotone_margin(g: GridFunction) -> float:
    return float(np.min(np.diff(g.values), initial=0.0))


def _reversed(g: GridFunction) -> GridFunction:
    return GridFunction(g.L, g.h, g.values[::-1].copy(), g.right_limit, g.left_limit)


def h_ordering_suite(ops: WaveOperators, n_pairs: int = 1000, seed: int = 0, threads: int = 1) -> dict:
    """Worst margins of the H-ordering statements over random ordered pairs.

    Keys ``H1``..``H5`` are the literal statements; ``H4c``/``H5c`` are the
    competitive-order versions (phi and psi move in opposite directions for
    the second species).
    """
    k1, k2 = ops.box
    L, h = ops.wave.L, ops.wave.h
    ops.kernel1, ops.kernel2  # build before any worker thread touches them

    def body(rng, count):
        m = {}
        for _ in range(count):
            p1, p2 = random_ordered_pair(rng, L, h, k1, monotone=True)
            q1, q2 = random_ordered_pair(rng, L, h, k2, monotone=True)
            H1_21 = ops.H1(p2, q1).values
            H1_11 = ops.H1(p1, q1).values
            H1_12 = ops.H1(p1, q2).values
            H2_11 = ops.H2(p1, q1)
            H2_22 = ops.H2(p2, q2).values
            H2_21 = ops.H2(p2, q1).values
            H2_12 = ops.H2(p1, q2).values
            # competitive monotone argument: phi nonincreasing, psi nondecreasing
            upd = {
                "H1": _min_margin(H1_11 - H1_21),
                "H2": _min_margin(H1_12 - H1_11),
                "H3": _min_margin(H2_11.values),
                "H4": _monotone_margin(H2_11),
                "H5": _min_margin(H2_11.values - H2_22),
                "H4c": _monotone_margin(ops.H2(_reversed(p1), q1)),
                "H5c_phi": _min_margin(H2_21 - H2_11.values),
                "H5c_psi": _min_margin(H2_11.values - H2_12),
            }
            m = _merge_min([m, upd])
        return m

    m = _merge_min(chunked_map(body, n_pairs, seed, threads))
    return {"margins": m, "n_pairs": n_pairs, "seed": seed}


def f_ordering_suite(ops: WaveOperators, n_pairs: int = 1000, seed: int = 0, threads: int = 1) -> dict:
    """Same as :func:`h_ordering_suite` for F; keys F1..F4 follow the literal list."""
    k1, k2 = ops.box
    L, h = ops.wave.L, ops.wave.h
    ops.kernel1, ops.kernel2

    def body(rng, count):
        m = {}
        for _ in range(count):
            p1, p2 = random_ordered_pair(rng, L, h, k1, monotone=True)
            q1, q2 = random_ordered_pair(rng, L, h, k2, monotone=True)
            F1_21 = ops.F1(p2, q1).values
            F1_11 = ops.F1(p1, q1).values
            F1_12 = ops.F1(p1, q2).values
            F2_11 = ops.F2(p1, q1)
            F2_22 = ops.F2(p2, q2).values
            F2_21 = ops.F2(p2, q1).values
            F2_12 = ops.F2(p1, q2).values
            upd = {
                "F1": _monotone_margin(F2_11),
                "F2": _min_margin(F1_11 - F1_21),
                "F3": _min_margin(F1_12 - F1_11),
                "F4": _min_margin(F2_11.values - F2_22),
                "F1c": _monotone_margin(ops.F2(_reversed(p1), q1)),
                "F4c_phi": _min_margin(F2_21 - F2_11.values),
                "F4c_psi": _min_margin(F2_11.values - F2_12),
            }
            m = _merge_min([m, upd])
        return m

    m = _merge_min(chunked_map(body, n_pairs, seed, threads))
    return {"margins": m, "n_pairs": n_pairs, "seed": seed}


def lipschitz_ratios(ops: WaveOperators, n_pairs: int = 500, seed: int = 0, threads: int = 1) -> dict:
    """Observed decay-norm Lipschitz ratios of H1 and F over random pairs in [0, K]."""
    k1, k2 = ops.box
    L, h, mu = ops.wave.L, ops.wave.h, ops.wave.mu
    ops.kernel1, ops.kernel2

    def body(rng, count):
        h_ratio = 0.0
        f_ratio = 0.0
        for _ in range(count):
            a_phi = random_knot_profile(rng, L, h, k1, monotone=False)
            a_psi = random_knot_profile(rng, L, h, k2, monotone=False)
            b_phi = random_knot_profile(rng, L, h, k1, monotone=False)
            b_psi = random_knot_profile(rng, L, h, k2, monotone=False)
            den = decay_norm([a_phi - b_phi, a_psi - b_psi], mu)
            if den == 0:
                continue
            dH = ops.H1(a_phi, a_psi) - ops.H1(b_phi, b_psi)
            h_ratio = max(h_ratio, decay_norm(dH, mu) / den)
            Fa = ops.F(a_phi, a_psi)
            Fb = ops.F(b_phi, b_psi)
            f_ratio = max(f_ratio, decay_norm([Fa[0] - Fb[0], Fa[1] - Fb[1]], mu) / den)
        return h_ratio, f_ratio

    parts = chunked_map(body, n_pairs, seed, threads)
    h_ratio = max(p[0] for p in parts)
    f_ratio = max(p[1] for p in parts)
    L1, _ = analytic_lipschitz(ops.spec, ops.box)
    tau1 = ops.model.tau1
    bound = math.exp(mu * ops.model.c * tau1) * L1 + ops.wave.beta1
    return {"h_ratio": h_ratio, "f_ratio": f_ratio, "h_bound": bound, "L1": L1, "n_pairs": n_pairs, "seed": seed}
