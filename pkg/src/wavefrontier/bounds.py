"""Quasi-upper and quasi-lower solutions and pointwise verification of their inequalities.

Two constructions are provided.

``cubic-bridge``
    Upper profiles e^{rho t}/2 | 1 - e^{-rho t}/2 built on the fast characteristic
    roots, lower psi = 0 and a lower phi that follows e^{lambda2 t}/4, a cubic
    bridge on [-T, T] and the plateau 1/2.
``slow-root``
    Same upper shape on the slow roots, lower phi = eps (e^{rho t} - M e^{(rho+eta) t})
    up to its maximum t* and constant afterwards.

Every profile is analytic on each piece, so the inequalities are checked with
exact derivatives; only neighborhoods of the joins are skipped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charroots import continue_root
from .core import GridFunction, ModelParams, ProfilePair, WaveParams, WavefrontierError, grid_nodes
from .waveops import ReactionSpec, f1_pointwise, f2_pointwise

T_LADDER = (5.0, 10.0, 20.0, 40.0)
M_LADDER = tuple(float(2 ** k) for k in range(0, 13))
CONSTRUCTIONS = ("slow-root", "cubic-bridge")


class NoAdmissibleT(WavefrontierError):
    pass


class InequalityViolated(WavefrontierError):
    def __init__(self, msg: str, witness: dict | None = None):
        super().__init__(msg)
        self.witness = witness or {}


# --------------------------------------------------------------------------
# analytic profiles

class Profile:
    """Piecewise-analytic C^1 profile with value, first and second derivative."""

    kinks: tuple[float, ...] = ()
    limits: tuple[float, float] = (0.0, 0.0)
    left_rate: float = 0.0

    def value(self, t):
        raise NotImplementedError

    def d1(self, t):
        raise NotImplementedError

    def d2(self, t):
        raise NotImplementedError

    def to_grid(self, L: float, h: float) -> GridFunction:
        t = grid_nodes(L, h)
        return GridFunction(L, h, self.value(t), *self.limits, self.left_rate)


@dataclass(frozen=True)
class ZeroProfile(Profile):
    kinks = ()
    limits = (0.0, 0.0)

    def value(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    d1 = value
    d2 = value


@dataclass(frozen=True)
class UpperProfile(Profile):
    """scale * (e^{rho t}/2 for t <= 0, 1 - e^{-rho t}/2 for t > 0)."""

    rho: float
    scale: float = 1.0

    @property
    def kinks(self):
        return (0.0,)

    @property
    def limits(self):
        return (0.0, self.scale)

    @property
    def left_rate(self):
        return self.rho

    def value(self, t):
        t = np.asarray(t, dtype=float)
        e = np.exp(-self.rho * np.abs(t))
        return self.scale * np.where(t <= 0, 0.5 * e, 1.0 - 0.5 * e)

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * 0.5 * self.rho * np.exp(-self.rho * np.abs(t))

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        e = np.exp(-self.rho * np.abs(t))
        return self.scale * 0.5 * self.rho ** 2 * np.where(t <= 0, e, -e)


def upper_profile(root: float, L: float, h: float, scale: float = 1.0) -> GridFunction:
    """Grid samples of the upper shape with decay rate ``root``."""
    if not root > 0:
        raise ValueError("root must be > 0")
    return UpperProfile(root, scale).to_grid(L, h)


def solve_bridge(value: float, slope: float, T: float) -> tuple[float, float]:
    """(a_c, b_c) so that f(t) = a_c (t-T)^3 + b_c (t-T)^2 + 1/2 has f(-T)=value, f'(-T)=slope."""
    if not T > 0:
        raise ValueError("T must be > 0")
    s = -2.0 * T
    A = np.array([[s ** 3, s ** 2], [3 * s ** 2, 2 * s]])
    rhs = np.array([value - 0.5, slope])
    a_c, b_c = np.linalg.solve(A, rhs)
    return float(a_c), float(b_c)


def bridge_coefficients(lambda2: float, T: float) -> tuple[float, float]:
    """Cubic bridge joining e^{lambda2 t}/4 at -T to the plateau 1/2 at T."""
    v = 0.25 * math.exp(-lambda2 * T)
    return solve_bridge(v, lambda2 * v, T)


def printed_bridge_coefficients(lambda2: float, T: float) -> tuple[float, float]:
    """Closed-form expressions for the same coefficients (compared, not used)."""
    e = math.exp(-lambda2 * T)
    a_c = (lambda2 * T * e + e - 2.0) / (16.0 * T ** 3)
    b_c = (2.0 * lambda2 * T * e + 3.0 * e - 6.0) / (16.0 * T ** 2)
    return a_c, b_c


def bridge_endpoint_errors(lambda2: float, T: float, coeffs=None) -> dict:
    """Absolute errors of the four endpoint identities for a cubic bridge."""
    a_c, b_c = bridge_coefficients(lambda2, T) if coeffs is None else coeffs
    f = CubicLower(lambda2, T, a_c, b_c)
    v = 0.25 * math.exp(-lambda2 * T)

    def mid(x):
        s = x - T
        return a_c * s ** 3 + b_c * s ** 2 + 0.5, 3 * a_c * s ** 2 + 2 * b_c * s

    return {
        "f(-T)": abs(mid(-T)[0] - v),
        "f'(-T)": abs(mid(-T)[1] - lambda2 * v),
        "f(T)": abs(float(f.value(T)) - 0.5),
        "f'(T)": abs(mid(T)[1]),
    }


@dataclass(frozen=True)
class CubicLower(Profile):
    """e^{lam t}/4 for t < -T, cubic bridge on [-T, T], 1/2 for t > T."""

    lam: float
    T: float
    a_c: float
    b_c: float

    @property
    def kinks(self):
        return (-self.T, self.T)

    @property
    def limits(self):
        return (0.0, 0.5)

    @property
    def left_rate(self):
        return self.lam

    def _pieces(self, t):
        t = np.asarray(t, dtype=float)
        return t, t < -self.T, t > self.T

    def value(self, t):
        t, left, right = self._pieces(t)
        s = t - self.T
        mid = self.a_c * s ** 3 + self.b_c * s ** 2 + 0.5
        ex = 0.25 * np.exp(self.lam * np.minimum(t, -self.T))
        return np.where(left, ex, np.where(right, 0.5, mid))

    def d1(self, t):
        t, left, right = self._pieces(t)
        s = t - self.T
        mid = 3 * self.a_c * s ** 2 + 2 * self.b_c * s
        ex = 0.25 * self.lam * np.exp(self.lam * np.minimum(t, -self.T))
        return np.where(left, ex, np.where(right, 0.0, mid))

    def d2(self, t):
        t, left, right = self._pieces(t)
        s = t - self.T
        mid = 6 * self.a_c * s + 2 * self.b_c
        ex = 0.25 * self.lam ** 2 * np.exp(self.lam * np.minimum(t, -self.T))
        return np.where(left, ex, np.where(right, 0.0, mid))


@dataclass(frozen=True)
class SlowLower(Profile):
    """eps (e^{rho t} - M e^{(rho+eta) t}) for t <= t*, constant afterwards (t* = argmax)."""

    rho: float
    eta: float
    M: float
    eps: float = 0.5

    @property
    def t_star(self) -> float:
        return math.log(self.rho / (self.M * (self.rho + self.eta))) / self.eta

    @property
    def plateau(self) -> float:
        return self.eps * math.exp(self.rho * self.t_star) * self.eta / (self.rho + self.eta)

    @property
    def kinks(self):
        return (self.t_star,)

    @property
    def limits(self):
        return (0.0, self.plateau)

    @property
    def left_rate(self):
        return self.rho

    def _left(self, t):
        t = np.asarray(t, dtype=float)
        return np.minimum(t, self.t_star), t <= self.t_star

    def value(self, t):
        s, left = self._left(t)
        g = self.eps * (np.exp(self.rho * s) - self.M * np.exp((self.rho + self.eta) * s))
        return np.where(left, g, self.plateau)

    def d1(self, t):
        s, left = self._left(t)
        g = self.eps * (self.rho * np.exp(self.rho * s) - self.M * (self.rho + self.eta) * np.exp((self.rho + self.eta) * s))
        return np.where(left, g, 0.0)

    def d2(self, t):
        s, left = self._left(t)
        r2 = (self.rho + self.eta) ** 2
        g = self.eps * (self.rho ** 2 * np.exp(self.rho * s) - self.M * r2 * np.exp((self.rho + self.eta) * s))
        return np.where(left, g, 0.0)


@dataclass(frozen=True)
class ScaledProfile(Profile):
    base: Profile
    scale: float

    @property
    def kinks(self):
        return self.base.kinks

    @property
    def limits(self):
        lo, hi = self.base.limits
        return (self.scale * lo, self.scale * hi)

    @property
    def left_rate(self):
        return self.base.left_rate

    def value(self, t):
        return self.scale * self.base.value(t)

    def d1(self, t):
        return self.scale * self.base.d1(t)

    def d2(self, t):
        return self.scale * self.base.d2(t)


# --------------------------------------------------------------------------
# bound specification

@dataclass(frozen=True)
class BoundSpec:
    """Parameters of a quasi-solution quadruple.

    ``lambda1``/``mu1`` are the decay rates of the upper phi/psi profiles;
    ``lambda2`` the rate of the lower phi. For the cubic construction ``T``,
    ``a_c``, ``b_c`` describe the bridge; for the slow-root construction
    ``M_lower`` and ``eta`` fix the lower phi.
    """

    lambda1: float
    mu1: float
    lambda2: float
    construction: str = "slow-root"
    T: float = math.nan
    a_c: float = math.nan
    b_c: float = math.nan
    M_lower: float = math.nan
    eta: float = math.nan
    scale: tuple[float, float] = (1.0, 1.0)
    roots: dict = field(default_factory=dict, compare=False)

    def with_T(self, T: float) -> "BoundSpec":
        a_c, b_c = bridge_coefficients(self.lambda2, T)
        return _replace(self, T=T, a_c=a_c, b_c=b_c)

    def with_M(self, M: float) -> "BoundSpec":
        return _replace(self, M_lower=M)

    def profiles(self) -> tuple[Profile, Profile, Profile, Profile]:
        """(lower_phi, lower_psi, upper_phi, upper_psi) as analytic profiles."""
        k1, k2 = self.scale
        up_phi = UpperProfile(self.lambda1, k1)
        up_psi = UpperProfile(self.mu1, k2)
        if self.construction == "cubic-bridge":
            low = CubicLower(self.lambda2, self.T, self.a_c, self.b_c)
        else:
            low = SlowLower(self.lambda2, self.eta, self.M_lower)
        if k1 != 1.0:
            low = ScaledProfile(low, k1)
        return low, ZeroProfile(), up_phi, up_psi

    def as_dict(self) -> dict:
        d = {
            "construction": self.construction,
            "lambda1": self.lambda1,
            "mu1": self.mu1,
            "lambda2": self.lambda2,
            "scale": list(self.scale),
            "roots": self.roots,
        }
        if self.construction == "cubic-bridge":
            d.update(T=self.T, a_c=self.a_c, b_c=self.b_c)
            pa, pb = printed_bridge_coefficients(self.lambda2, self.T) if math.isfinite(self.T) else (math.nan, math.nan)
            d["printed_coefficient_discrepancy"] = max(abs(pa - self.a_c), abs(pb - self.b_c))
        else:
            low = SlowLower(self.lambda2, self.eta, self.M_lower) if math.isfinite(self.M_lower) else None
            d.update(M_lower=self.M_lower, eta=self.eta,
                     t_star=low.t_star if low else math.nan, plateau=low.plateau if low else math.nan)
        return d


def _replace(spec: BoundSpec, **kw) -> BoundSpec:
    from dataclasses import replace
    return replace(spec, **kw)


def make_bound_spec(model: ModelParams, wave: WaveParams, construction: str = "slow-root",
                    lambda2: float | None = None) -> BoundSpec:
    """Certified roots plus defaults for the chosen construction (T or M still unset)."""
    if construction not in CONSTRUCTIONS:
        raise ValueError(f"construction must be one of {CONSTRUCTIONS}")
    branch = "fast" if construction == "cubic-bridge" else "slow"
    lam = continue_root(model.c, model.alpha1, wave.r1, branch=branch)
    mu = continue_root(model.c, model.alpha2, wave.r3, branch=branch)
    l2 = lam.value if lambda2 is None else float(lambda2)
    scale = (1.0, 1.0) if wave.target == "literal-paper" else wave.box
    roots = {"lambda1": lam.as_dict(), "mu1": mu.as_dict()}
    eta = 0.5 * min(l2, mu.value)
    return BoundSpec(lam.value, mu.value, l2, construction, eta=eta, scale=scale, roots=roots)


def lower_profiles(spec: BoundSpec, L: float, h: float) -> tuple[GridFunction, GridFunction]:
    low, zero, _, _ = spec.profiles()
    return low.to_grid(L, h), zero.to_grid(L, h)


def profile_pair(spec: BoundSpec, L: float, h: float, box=(1.0, 1.0)) -> ProfilePair:
    lp, ls, up, us = (p.to_grid(L, h) for p in spec.profiles())
    return ProfilePair(lp, ls, up, us, tuple(box))


# --------------------------------------------------------------------------
# verification

def _operator(profile_x: Profile, D: float, c: float, r: float, t: np.ndarray) -> np.ndarray:
    return D * profile_x.d2(t) - c * profile_x.d1(t + r)


def _f1(spec: ReactionSpec, phi: Profile, psi: Profile, t):
    return f1_pointwise(spec, phi.value(t + spec.r1), psi.value(t + spec.r1 - spec.r2))


def _f2(spec: ReactionSpec, phi: Profile, psi: Profile, t):
    return f2_pointwise(spec, psi.value(t + spec.r3), phi.value(t + spec.r3 - spec.r4))


def _case_labels(t, kinks, r, kind):
    if kind == "upper":
        k = kinks[0] if kinks else 0.0
        edges = [(-np.inf, k - r, "t<=-r"), (k - r, k, "-r<t<=0"), (k, np.inf, "t>0")]
    elif len(kinks) == 2:
        lo, hi = kinks
        edges = [(-np.inf, lo - r, "t<=-T-r"), (lo - r, hi, "-T-r<t<=T"), (hi, np.inf, "t>T")]
    elif len(kinks) == 1:
        k = kinks[0]
        edges = [(-np.inf, k - r, "t<=t*-r"), (k - r, k, "t*-r<t<=t*"), (k, np.inf, "t>t*")]
    else:
        edges = [(-np.inf, np.inf, "all")]
    return edges


def _worst_by_case(t, margin, edges, sign):
    """Worst signed margin per case; sign=+1 expects margin <= tol, -1 expects >= -tol."""
    out = {}
    for lo, hi, label in edges:
        sel = (t > lo) & (t <= hi)
        if not np.any(sel):
            continue
        vals = margin[sel]
        j = int(np.argmax(vals)) if sign > 0 else int(np.argmin(vals))
        out[label] = {"worst": float(vals[j]), "at": float(t[sel][j])}
    return out


def verify_quasi(spec: BoundSpec, model: ModelParams, wave: WaveParams, sample_step: float | None = None,
                 tol: float = 1e-10, *, raise_on_fail: bool = False, which: str = "all") -> dict:
    """Check the four cross differential inequalities of the quadruple.

    The upper psi inequality is evaluated with f2(upper phi, upper psi) and,
    additionally, with the lower phi that the cross iteration pairs it with
    (``upper_psi_cross``); only the four listed in ``asserted`` decide ``ok``.
    """
    h = wave.h if sample_step is None else sample_step
    t = grid_nodes(wave.L, h)
    rs = ReactionSpec.from_params(model, wave)
    low_phi, low_psi, up_phi, up_psi = spec.profiles()
    c = model.c
    kinks = tuple(sorted(set(low_phi.kinks + up_phi.kinks + up_psi.kinks)))
    keep = np.ones_like(t, dtype=bool)
    for k in kinks:
        keep &= np.abs(t - k) > 2 * h
    tk = t[keep]

    exprs = {
        "upper_phi": (_operator(up_phi, model.D1, c, rs.r1, tk) + _f1(rs, up_phi, low_psi, tk), +1, up_phi, "upper", rs.r1),
        "upper_psi": (_operator(up_psi, model.D2, c, rs.r3, tk) + _f2(rs, up_phi, up_psi, tk), +1, up_psi, "upper", rs.r3),
        "upper_psi_cross": (_operator(up_psi, model.D2, c, rs.r3, tk) + _f2(rs, low_phi, up_psi, tk), +1, up_psi, "upper", rs.r3),
        "lower_phi": (_operator(low_phi, model.D1, c, rs.r1, tk) + _f1(rs, low_phi, up_psi, tk), -1, low_phi, "lower", rs.r1),
        "lower_psi": (_operator(low_psi, model.D2, c, rs.r3, tk) + _f2(rs, low_phi, low_psi, tk), -1, low_psi, "lower", rs.r3),
    }
    asserted = ("upper_phi", "upper_psi", "lower_phi", "lower_psi")
    if which == "lower":
        asserted = ("lower_phi", "lower_psi")
        exprs = {k: v for k, v in exprs.items() if k.startswith("lower")}
    report = {"tol": tol, "kinks": list(kinks), "excluded_radius": 2 * h, "asserted": list(asserted), "inequalities": {}}
    ok = True
    for name, (vals, sign, prof, kind, r) in exprs.items():
        worst_idx = int(np.argmax(vals)) if sign > 0 else int(np.argmin(vals))
        worst = float(vals[worst_idx]) if vals.size else 0.0
        passed = worst <= tol if sign > 0 else worst >= -tol
        entry = {
            "sense": "<=" if sign > 0 else ">=",
            "worst": worst,
            "at": float(tk[worst_idx]) if vals.size else math.nan,
            "passed": bool(passed),
            "max_abs": float(np.max(np.abs(vals))) if vals.size else 0.0,
            "cases": _worst_by_case(tk, vals, _case_labels(tk, prof.kinks, r, kind), sign),
        }
        report["inequalities"][name] = entry
        if name in asserted:
            ok &= passed
    report["ok"] = bool(ok)
    if raise_on_fail and not ok:
        bad = [n for n in asserted if not report["inequalities"][n]["passed"]]
        e = report["inequalities"][bad[0]]
        raise InequalityViolated(f"{bad[0]} inequality fails at t={e['at']:.4g} (margin {e['worst']:.3e})",
                                 {"inequality": bad[0], **e})
    return report


def ordering_defect(spec: BoundSpec, wave: WaveParams) -> dict:
    pair = profile_pair(spec, wave.L, wave.h, wave.box)
    return pair.ordering_violations()


def auto_T(spec: BoundSpec, model: ModelParams, wave: WaveParams, ladder=T_LADDER) -> BoundSpec:
    """Smallest bridge half-width in the ladder whose lower inequalities hold."""
    tried = {}
    for T in ladder:
        cand = spec.with_T(T)
        rep = verify_quasi(cand, model, wave, which="lower")
        tried[T] = rep["inequalities"]["lower_phi"]["worst"]
        if rep["ok"]:
            return cand
    raise NoAdmissibleT(f"no T in {list(ladder)} satisfies the lower inequalities; worst margins {tried}")


def auto_M(spec: BoundSpec, model: ModelParams, wave: WaveParams, ladder=M_LADDER) -> BoundSpec:
    """Smallest M in the ladder for which the slow-root lower phi is admissible."""
    tried = {}
    for M in ladder:
        cand = spec.with_M(M)
        rep = verify_quasi(cand, model, wave, which="lower")
        order = ordering_defect(cand, wave)
        tried[M] = rep["inequalities"]["lower_phi"]["worst"]
        if rep["ok"] and max(order.values()) <= 1e-12:
            return cand
    raise NoAdmissibleT(f"no M in the ladder gives an admissible lower solution; worst margins {tried}")


def build_bounds(model: ModelParams, wave: WaveParams, construction: str = "slow-root",
                 lambda2: float | None = None, T: float | None = None) -> BoundSpec:
    """Roots plus the automatic choice of T (cubic) or M (slow-root)."""
    spec = make_bound_spec(model, wave, construction, lambda2)
    if construction == "cubic-bridge":
        return spec.with_T(T) if T is not None else auto_T(spec, model, wave)
    return auto_M(spec, model, wave)


def derivative_jumps(g: GridFunction, points) -> dict:
    """|forward - backward difference| at the node nearest to each point."""
    out = {}
    v = g.values
    for p in points:
        j = int(round((p + g.L) / g.h))
        if 1 <= j < v.size - 1:
            out[float(p)] = float(abs((v[j + 1] - v[j]) - (v[j] - v[j - 1])) / g.h)
    return out
