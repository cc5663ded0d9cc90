"""Independent reference computations used by the tests.

Nothing here imports the package's numerical routines; each oracle solves
its problem by a separate method.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


def kpp_front(c: float = 3.0, alpha: float = 1.0, D: float = 1.0, t_span=(-60.0, 60.0), eps: float = 1e-9):
    """Monotone front of D phi'' - c phi' + alpha phi (1 - phi) = 0 from 0 to 1.

    Integrates backward in t from the saddle (1, 0) along its stable
    direction, so the trajectory stays on the heteroclinic connection.
    Returns (t, phi) with the 1/2 crossing placed at t = 0.
    """
    # linearisation at 1: D u'' - c u' - alpha u = 0, decaying root
    nu = (c - math.sqrt(c * c + 4.0 * D * alpha)) / (2.0 * D)

    def rhs(t, y):
        return [y[1], (c * y[1] - alpha * y[0] * (1.0 - y[0])) / D]

    t0 = 0.0
    y0 = [1.0 - eps, -eps * nu]
    sol = solve_ivp(rhs, (t0, t0 - 400.0), y0, method="DOP853", rtol=1e-12, atol=1e-15, dense_output=True)
    ts = sol.t[::-1]
    ys = sol.y[0][::-1]
    # place the half-way crossing at 0
    j = int(np.nonzero(ys >= 0.5)[0][0])
    t_half = brentq(lambda s: sol.sol(s)[0] - 0.5, ts[j - 1], ts[j], xtol=1e-14)
    grid = np.linspace(t_span[0], t_span[1], 12001)
    src = grid + t_half
    vals = np.where(src <= ts[0], 0.0, np.where(src >= t0, 1.0 - eps * np.exp(nu * (src - t0)), 0.0))
    inside = (src > ts[0]) & (src < t0)
    vals[inside] = sol.sol(src[inside])[0]
    return grid, vals


def decay_norm_loop(t, comps, mu):
    """Brute-force weighted sup norm over grid nodes."""
    best = 0.0
    for i in range(len(t)):
        s = 0.0
        for c in comps:
            s += c[i] * c[i]
        best = max(best, math.exp(-mu * abs(t[i])) * math.sqrt(s))
    return best


def bisect_real(f, lo, hi, tol=1e-15):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def pde_step_loop(u, v, hist_u, hist_v, p, dx, dt, bc_u, bc_v):
    """One explicit step of the delayed-diffusion system, point by point.

    ``hist_u(tau)`` / ``hist_v(tau)`` return the field ``tau`` time units
    ago. The loop runs right to left to differ from the vectorised order.
    """
    n = len(u)
    du = hist_u(p["tau1"])
    dv_lag = hist_v(p["tau2"])
    dv = hist_v(p["tau3"])
    du_lag = hist_u(p["tau4"])
    un = [0.0] * n
    vn = [0.0] * n
    un[0], un[-1] = bc_u
    vn[0], vn[-1] = bc_v
    for j in range(n - 2, 0, -1):
        lap_u = (du[j + 1] - 2.0 * du[j] + du[j - 1]) / (dx * dx)
        lap_v = (dv[j + 1] - 2.0 * dv[j] + dv[j - 1]) / (dx * dx)
        ru = p["alpha1"] * u[j] * (1.0 - u[j] - p["a"] * dv_lag[j])
        rv = p["alpha2"] * v[j] * (1.0 - v[j] - p["b"] * du_lag[j])
        un[j] = u[j] + dt * (p["D1"] * lap_u + ru)
        vn[j] = v[j] + dt * (p["D2"] * lap_v + rv)
    return np.array(un), np.array(vn)


def kernel_quad(t: float, D: float, c: float, beta: float, r: float) -> float:
    """G(t) = (1/2 pi) int exp(i w t) / s(w) dw by QAWF quadrature on [0, inf).

    s(w) = D w^2 + (i c w + beta) exp(i w r); G is real, so only the
    half-line is needed.
    """
    def inv(w):
        return 1.0 / (D * w * w + (1j * c * w + beta) * np.exp(1j * w * r))

    if t == 0:
        a = quad(lambda w: inv(w).real, 0.0, np.inf, limit=500, epsabs=1e-13)[0]
        return a / math.pi
    a = quad(lambda w: inv(w).real, 0.0, np.inf, weight="cos", wvar=abs(t))[0]
    b = quad(lambda w: inv(w).imag, 0.0, np.inf, weight="sin", wvar=abs(t))[0]
    return (a - math.copysign(1.0, t) * b) / math.pi
