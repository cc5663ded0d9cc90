"""Domain types, parameter validation, grid functions and the decay norm."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class WavefrontierError(Exception):
    """Base class for all library errors."""


class NonPositiveParameter(WavefrontierError):
    pass


class SubcriticalWaveSpeed(WavefrontierError):
    pass


class AlphaOrderingViolated(WavefrontierError):
    pass


class NoValidEquilibrium(WavefrontierError):
    pass


class ProfileOrderingError(WavefrontierError):
    """A ProfilePair failed its ordering / monotonicity invariants."""


@dataclass(frozen=True)
class ModelParams:
    """Constants of the delayed-diffusion Lotka-Volterra system plus wave speed.

    ``tau1``/``tau3`` delay the diffusion of u/v, ``tau2``/``tau4`` delay the
    competitor inside the reaction term.
    """

    D1: float = 1.0
    D2: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    a: float = 0.25
    b: float = 0.25
    tau1: float = 0.01 / 3.0
    tau2: float = 0.01 / 3.0
    tau3: float = 0.01 / 3.0
    tau4: float = 0.01 / 3.0
    c: float = 3.0

    @property
    def taus(self) -> tuple[float, float, float, float]:
        return (self.tau1, self.tau2, self.tau3, self.tau4)

    def critical_speed(self) -> float:
        return max(2.0 * math.sqrt(self.D1 * self.alpha1), 2.0 * math.sqrt(self.D2 * self.alpha2))

    def with_delays(self, *taus: float) -> "ModelParams":
        if len(taus) == 1:
            taus = taus * 4
        t1, t2, t3, t4 = taus
        return replace(self, tau1=t1, tau2=t2, tau3=t3, tau4=t4)


@dataclass(frozen=True)
class WaveParams:
    """Moving-frame quantities derived from :class:`ModelParams`.

    ``k1``/``k2`` bound the trapping box used for the shift constants and the
    ordering checks; ``equilibrium`` is the coexistence state of the kinetics.
    With ``target="literal-paper"`` the box is (1, 1), with ``"K-scaled"`` it
    is the coexistence state itself.
    """

    r1: float
    r2: float
    r3: float
    r4: float
    beta1: float
    beta2: float
    k1: float
    k2: float
    mu: float
    L: float = 40.0
    h: float = 0.02
    equilibrium: tuple[float, float] = (1.0, 1.0)
    target: str = "literal-paper"

    @property
    def rs(self) -> tuple[float, float, float, float]:
        return (self.r1, self.r2, self.r3, self.r4)

    @property
    def box(self) -> tuple[float, float]:
        return (self.k1, self.k2)


TARGETS = ("literal-paper", "K-scaled")


def equilibria(params: ModelParams) -> tuple[float, float]:
    """Coexistence state of 1 - k1 - a k2 = 0, 1 - k2 - b k1 = 0."""
    det = 1.0 - params.a * params.b
    if abs(det) < 1e-14:
        raise NoValidEquilibrium("a*b == 1: the equilibrium system is singular")
    k1 = (1.0 - params.a) / det
    k2 = (1.0 - params.b) / det
    for k in (k1, k2):
        if not (0.0 < k <= 1.0):
            raise NoValidEquilibrium(f"coexistence state ({k1:.6g}, {k2:.6g}) not in (0, 1]^2")
    return k1, k2


def _check_positive(params: ModelParams) -> None:
    for name in ("D1", "D2", "alpha1", "alpha2", "a", "b", "c"):
        if not getattr(params, name) > 0:
            # a = b = 0 is the decoupled limit and is allowed
            if name in ("a", "b") and getattr(params, name) == 0:
                continue
            raise NonPositiveParameter(f"{name} must be > 0, got {getattr(params, name)!r}")
    for i, tau in enumerate(params.taus, start=1):
        if not tau >= 0:
            raise NonPositiveParameter(f"tau{i} must be >= 0, got {tau!r}")


def validate(
    params: ModelParams,
    *,
    target: str = "literal-paper",
    require_alpha_order: bool = False,
    L: float = 40.0,
    h: float = 0.02,
    mu: float | None = None,
) -> WaveParams:
    """Check ``params`` and assemble the moving-frame :class:`WaveParams`.

    The shift constants come from :func:`wavefrontier.waveops.choose_betas`
    evaluated on the trapping box. When ``mu`` is None it defaults to half
    the slower decay rate of the two undelayed Green's functions; the kernel
    module re-checks it against the fitted bounds.
    """
    from .waveops import ReactionSpec, choose_betas  # circular at import time

    _check_positive(params)
    crit = params.critical_speed()
    if params.c <= crit:
        raise SubcriticalWaveSpeed(f"c={params.c} must exceed max 2*sqrt(D*alpha) = {crit:.6g}")
    if require_alpha_order and params.alpha2 < params.alpha1:
        raise AlphaOrderingViolated(f"alpha2={params.alpha2} < alpha1={params.alpha1}")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    n = round(2 * L / h)
    if abs(n * h - 2 * L) > 1e-9 * L:
        raise ValueError(f"L={L} must be an integer multiple of h={h}")

    K = equilibria(params)
    box = (1.0, 1.0) if target == "literal-paper" else K
    r1, r2, r3, r4 = (params.c * t for t in params.taus)
    spec = ReactionSpec(params.alpha1, params.alpha2, params.a, params.b, r1, r2, r3, r4)
    beta1, beta2 = choose_betas(spec, box)
    if mu is None:
        d1 = _undelayed_decay(params.D1, params.c, beta1)
        d2 = _undelayed_decay(params.D2, params.c, beta2)
        mu = 0.5 * min(d1, d2)
    if not mu > 0:
        raise NonPositiveParameter(f"mu must be > 0, got {mu!r}")
    return WaveParams(r1, r2, r3, r4, beta1, beta2, box[0], box[1], mu, L, h, K, target)


def _undelayed_decay(D: float, c: float, beta: float) -> float:
    disc = math.sqrt(c * c + 4.0 * D * beta)
    return min((disc - c) / (2 * D), (c + disc) / (2 * D))


def grid_nodes(L: float, h: float) -> np.ndarray:
    n = round(2 * L / h)
    return -L + h * np.arange(n + 1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples on the uniform grid t_j = -L + j h with declared tails.

    Evaluation inside [-L, L] is piecewise linear. Right of the grid it returns
    ``right_limit``. Left of the grid it returns ``left_limit`` when
    ``left_rate`` is 0, otherwise it relaxes from the first sample to the
    limit like exp(left_rate (t + L)).
    """

    L: float
    h: float
    values: np.ndarray
    left_limit: float = 0.0
    right_limit: float = 0.0
    left_rate: float = 0.0

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        n = round(2 * self.L / self.h)
        if vals.shape != (n + 1,):
            raise ValueError(f"expected {n + 1} samples for L={self.L}, h={self.h}; got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("GridFunction values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, f, L: float, h: float, left_limit: float, right_limit: float) -> "GridFunction":
        return cls(L, h, np.asarray(f(grid_nodes(L, h)), dtype=float), left_limit, right_limit)

    @classmethod
    def constant(cls, value: float, L: float, h: float) -> "GridFunction":
        n = round(2 * L / h)
        return cls(L, h, np.full(n + 1, float(value)), float(value), float(value))

    @property
    def t(self) -> np.ndarray:
        return grid_nodes(self.L, self.h)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def limits(self) -> tuple[float, float]:
        return (self.left_limit, self.right_limit)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        # index arithmetic instead of np.interp keeps shifted lookups on the
        # exact grid bit-identical to the stored values
        s = (t + self.L) / self.h
        j = np.floor(s)
        frac = s - j
        last = self.values.size - 1
        jc = np.clip(j, 0, last - 1).astype(np.int64)
        frac = np.where(j > last - 1, s - jc, frac)
        v0 = self.values[jc]
        v1 = self.values[jc + 1]
        out = np.where(frac == 1.0, v1, v0 + frac * (v1 - v0))
        out = np.where(s < 0, self.left_tail(np.minimum(t, -self.L)), out)
        out = np.where(s > last, self.right_limit, out)
        return out if out.ndim else float(out)

    def left_tail(self, t):
        """Extension used for t < -L."""
        if self.left_rate == 0.0:
            return np.full_like(np.asarray(t, dtype=float), self.left_limit)
        amp = self.values[0] - self.left_limit
        return self.left_limit + amp * np.exp(self.left_rate * (np.asarray(t, dtype=float) + self.L))

    def shifted(self, shift: float) -> np.ndarray:
        """Values of f(t_j + shift) at every grid node."""
        if shift == 0.0:
            return self.values.copy()
        return self(self.t + shift)

    def with_values(self, values, left_limit=None, right_limit=None, left_rate=None) -> "GridFunction":
        return GridFunction(
            self.L,
            self.h,
            values,
            self.left_limit if left_limit is None else left_limit,
            self.right_limit if right_limit is None else right_limit,
            self.left_rate if left_rate is None else left_rate,
        )

    def _combined_rate(self, other: "GridFunction") -> float:
        # a sum of two exponential tails is dominated by the slower one
        rates = [r for r in (self.left_rate, other.left_rate) if r > 0]
        return min(rates) if rates else 0.0

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values + other.values, self.left_limit + other.left_limit,
                                self.right_limit + other.right_limit, self._combined_rate(other))

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values - other.values, self.left_limit - other.left_limit,
                                self.right_limit - other.right_limit, self._combined_rate(other))

    def scale(self, s: float) -> "GridFunction":
        return self.with_values(s * self.values, s * self.left_limit, s * self.right_limit)


def eval_shifted(f: GridFunction, t, shift: float = 0.0):
    """Interpolated f(t + shift) with the declared tail extension."""
    return f(np.asarray(t, dtype=float) + shift)


def decay_norm(components: GridFunction | Sequence[GridFunction], mu: float) -> float:
    """sup_t exp(-mu |t|) * |Phi(t)| with the Euclidean norm across components.

    Tails are constant or relax monotonically to their limit, so beyond the
    grid the supremum is bounded by the larger of the edge sample and the
    limit, weighted by exp(-mu L).
    """
    if mu <= 0:
        raise NonPositiveParameter(f"mu must be > 0, got {mu!r}")
    comps = [components] if isinstance(components, GridFunction) else list(components)
    t = comps[0].t
    stacked = np.stack([c.values for c in comps])
    norms = np.sqrt(np.sum(stacked * stacked, axis=0))
    inner = float(np.max(np.exp(-mu * np.abs(t)) * norms))
    L = comps[0].L
    left = math.sqrt(sum(c.left_limit ** 2 for c in comps))
    right = math.sqrt(sum(c.right_limit ** 2 for c in comps))
    return max(inner, math.exp(-mu * L) * max(left, right))


def sup_norm(components: GridFunction | Sequence[GridFunction]) -> float:
    comps = [components] if isinstance(components, GridFunction) else list(components)
    stacked = np.stack([c.values for c in comps])
    inner = float(np.max(np.sqrt(np.sum(stacked * stacked, axis=0))))
    left = math.sqrt(sum(c.left_limit ** 2 for c in comps))
    right = math.sqrt(sum(c.right_limit ** 2 for c in comps))
    return max(inner, left, right)


@dataclass(frozen=True, eq=False)
class ProfilePair:
    """Lower and upper two-component profiles bracketing a wave."""

    lower_phi: GridFunction
    lower_psi: GridFunction
    upper_phi: GridFunction
    upper_psi: GridFunction
    box: tuple[float, float] = (1.0, 1.0)

    def trapping_violations(self) -> dict[str, float]:
        """Worst violation of each ordering invariant; positive numbers are violations."""
        k1, k2 = self.box
        lp, ls, up, us = (g.values for g in (self.lower_phi, self.lower_psi, self.upper_phi, self.upper_psi))
        return {
            "lower_phi>=0": float(np.max(-lp)),
            "lower_psi>=0": float(np.max(-ls)),
            "lower_phi<=upper_phi": float(np.max(lp - up)),
            "lower_psi<=upper_psi": float(np.max(ls - us)),
            "upper_phi<=k1": float(np.max(up - k1)),
            "upper_psi<=k2": float(np.max(us - k2)),
        }

    def monotone_violations(self) -> dict[str, float]:
        """Largest decrease of each psi bound between neighboring nodes."""
        return {
            "upper_psi nondecreasing": float(np.max(-np.diff(self.upper_psi.values), initial=0.0)),
            "lower_psi nondecreasing": float(np.max(-np.diff(self.lower_psi.values), initial=0.0)),
        }

    def ordering_violations(self, tol: float = 1e-8) -> dict[str, float]:
        return {**self.trapping_violations(), **self.monotone_violations()}

    def check(self, tol: float = 1e-8) -> None:
        bad = {k: v for k, v in self.ordering_violations().items() if v > tol}
        if bad:
            worst = max(bad, key=bad.get)
            raise ProfileOrderingError(f"ProfilePair invariant '{worst}' violated by {bad[worst]:.3e}")

    def is_valid(self, tol: float = 1e-8) -> bool:
        return all(v <= tol for v in self.ordering_violations().values())

    def phi_monotone_defect(self) -> float:
        """Largest decrease of either phi bound (reported, not asserted)."""
        return max(float(np.max(-np.diff(g.values), initial=0.0)) for g in (self.lower_phi, self.upper_phi))

    def midpoint(self) -> tuple[GridFunction, GridFunction]:
        return ((self.lower_phi + self.upper_phi).scale(0.5), (self.lower_psi + self.upper_psi).scale(0.5))
