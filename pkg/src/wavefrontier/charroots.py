"""Real roots of the characteristic quasi-polynomial h(z) = z^2 - c z e^{rz} + alpha e^{rz}.

The undelayed quadratic has two positive roots when c > 2 sqrt(alpha). For
small r > 0 each of them persists as a real root of ``h``; this module tracks
either one by Newton continuation in r and certifies uniqueness inside a
rectangle with the argument principle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import WavefrontierError


class ComplexRoots(WavefrontierError):
    pass


class NewtonDiverged(WavefrontierError):
    pass


class CertificationFailed(WavefrontierError):
    pass


class ZeroOnContour(WavefrontierError):
    pass


class QuadratureNotConverged(WavefrontierError):
    pass


@dataclass(frozen=True)
class CharRoot:
    value: float
    residual: float
    r: float
    winding: int
    strip: tuple[float, float, float]
    branch: str = "fast"

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "residual": self.residual,
            "r": self.r,
            "winding": self.winding,
            "strip": list(self.strip),
            "branch": self.branch,
        }


def quadratic_roots(c: float, alpha: float) -> tuple[float, float]:
    """Both roots (small, large) of z^2 - c z + alpha = 0."""
    disc = c * c - 4.0 * alpha
    if disc < 0:
        raise ComplexRoots(f"c={c} < 2*sqrt(alpha)={2 * math.sqrt(alpha):.6g}: complex roots")
    s = math.sqrt(disc)
    big = 0.5 * (c + s)
    # product of roots is alpha; avoids cancellation in (c - s)/2
    return alpha / big, big


def quadratic_root(c: float, alpha: float) -> float:
    """Larger real root of z^2 - c z + alpha = 0."""
    return quadratic_roots(c, alpha)[1]


def char_value(z, c: float, alpha: float, r: float):
    """h(z) = z^2 - c z e^{rz} + alpha e^{rz}; works elementwise on arrays."""
    e = np.exp(r * z)
    return z * z - c * z * e + alpha * e


def char_derivative(z, c: float, alpha: float, r: float):
    e = np.exp(r * z)
    return 2 * z - c * e - c * r * z * e + alpha * r * e


def default_strip(c: float, alpha: float, branch: str = "fast", im_halfheight: float = 50.0):
    lo, hi = quadratic_roots(c, alpha)
    d = hi - lo
    center = hi if branch == "fast" else lo
    return (center - d / 2, center + d / 2, im_halfheight)


def _edge_integral(z0: complex, z1: complex, n: int, c, alpha, r) -> complex:
    # composite trapezoid on a straight edge
    s = np.linspace(0.0, 1.0, n + 1)
    z = z0 + (z1 - z0) * s
    hv = char_value(z, c, alpha, r)
    if np.min(np.abs(hv)) < 1e-8:
        raise ZeroOnContour(f"|h| < 1e-8 on contour edge {z0} -> {z1}")
    g = char_derivative(z, c, alpha, r) / hv
    w = np.full(n + 1, 1.0 / n)
    w[0] = w[-1] = 0.5 / n
    return complex(np.sum(w * g) * (z1 - z0))


def _winding_estimate(c, alpha, r, strip, n) -> float:
    lo, hi, H = strip
    corners = [complex(lo, -H), complex(hi, -H), complex(hi, H), complex(lo, H)]
    total = 0j
    for k in range(4):
        total += _edge_integral(corners[k], corners[(k + 1) % 4], n, c, alpha, r)
    return (total / (2j * math.pi)).real


def winding_count(c: float, alpha: float, r: float, strip, nodes: int = 4096, max_doublings: int = 6) -> int:
    """Number of zeros of ``h`` inside the rectangle ``strip = (re_lo, re_hi, im_half)``.

    The trapezoid rule is refined by doubling until two consecutive estimates
    agree to 0.1 and the estimate is within 0.25 of an integer.
    """
    prev = _winding_estimate(c, alpha, r, strip, nodes)
    n = nodes
    for _ in range(max_doublings):
        n *= 2
        cur = _winding_estimate(c, alpha, r, strip, n)
        if abs(cur - prev) < 0.1 and abs(cur - round(cur)) < 0.25:
            return int(round(cur))
        prev = cur
    raise QuadratureNotConverged(f"winding estimate {prev:.4f} not stable after {n} nodes per edge")


def newton_root(c: float, alpha: float, r: float, z0: float, tol: float = 1e-14, maxit: int = 60) -> float:
    z = float(z0)
    for _ in range(maxit):
        f = float(char_value(z, c, alpha, r))
        df = float(char_derivative(z, c, alpha, r))
        if df == 0 or not math.isfinite(df):
            break
        step = f / df
        z -= step
        if not math.isfinite(z):
            break
        if abs(step) <= tol * max(1.0, abs(z)):
            return z
    raise NewtonDiverged(f"Newton did not converge for r={r} from z0={z0}; r may be too large")


def continue_root(
    c: float,
    alpha: float,
    r: float,
    *,
    branch: str = "fast",
    strip=None,
    steps: int = 16,
    certify: bool = True,
) -> CharRoot:
    """Track the real root emanating from the quadratic root as r grows from 0.

    ``branch="fast"`` follows the larger quadratic root (lambda_0),
    ``branch="slow"`` the smaller one. With ``certify`` the result must be
    the only zero in ``strip`` (default strip of half-width d/2, where d is
    the distance between the quadratic roots).
    """
    if branch not in ("fast", "slow"):
        raise ValueError(f"branch must be 'fast' or 'slow', got {branch!r}")
    lo, hi = quadratic_roots(c, alpha)
    if c <= 2 * math.sqrt(alpha):
        raise ComplexRoots("double root: continuation needs c > 2 sqrt(alpha)")
    z = hi if branch == "fast" else lo
    if strip is None:
        strip = default_strip(c, alpha, branch)
    if r != 0:
        for k in range(1, steps + 1):
            z = newton_root(c, alpha, r * k / steps, z)
    res = abs(float(char_value(z, c, alpha, r)))
    if res > 1e-12 * max(1.0, z * z):
        # final polish; the continuation path already converged to tol
        z = newton_root(c, alpha, r, z)
        res = abs(float(char_value(z, c, alpha, r)))
    wind = winding_count(c, alpha, r, strip) if certify else -1
    root = CharRoot(float(z), res, float(r), wind, tuple(float(s) for s in strip), branch)
    if certify:
        if wind != 1:
            raise CertificationFailed(f"winding={wind} in strip {strip} for r={r} (root {z:.6g})")
        if not (strip[0] < z < strip[1]):
            raise CertificationFailed(f"continued root {z:.6g} left strip {strip[:2]} for r={r}")
    return root


def bisect_root(c: float, alpha: float, r: float, lo: float, hi: float) -> float:
    """Real-line bisection oracle on h restricted to [lo, hi]."""
    flo = float(char_value(lo, c, alpha, r))
    fhi = float(char_value(hi, c, alpha, r))
    if flo * fhi > 0:
        raise CertificationFailed(f"no sign change of h on [{lo}, {hi}] for r={r}")
    return brentq(lambda z: float(char_value(z, c, alpha, r)), lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


def small_delay_threshold(c: float, alpha: float, branch: str = "fast", r_max: float = 1.0, levels: int = 12) -> float:
    """Largest dyadic r = r_max / 2^k that continues and certifies (0.0 if none)."""
    r = r_max
    for _ in range(levels):
        try:
            continue_root(c, alpha, r, branch=branch)
            return r
        except WavefrontierError:
            r /= 2
    return 0.0
