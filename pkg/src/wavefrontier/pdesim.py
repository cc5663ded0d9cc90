"""Method-of-lines simulation of the delayed-diffusion competition system.

    u_t = D1 u_xx(x, t - tau1) + alpha1 u (1 - u - a v(x, t - tau2))
    v_t = D2 v_xx(x, t - tau3) + alpha2 v (1 - v - b u(x, t - tau4))

Forward Euler in time, second differences in space, Dirichlet boundaries and
a ring buffer of past snapshots with linear interpolation in time.

Delayed diffusion is only conditionally well posed: a Fourier mode with
wavenumber k grows once D k^2 tau exceeds pi/2, so a fine grid resolves modes
the continuous problem cannot damp. :func:`stable_dt` checks the discrete
recurrence for the grid's stiffest mode and :func:`auto_dx` picks a grid on
which a stable step exists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import GridFunction, ModelParams, WavefrontierError

GUARD = (-0.05, 1.05)


class BlowUp(WavefrontierError):
    pass


class HistoryUnderflow(WavefrontierError):
    pass


class ProfileTooNarrow(WavefrontierError):
    pass


class FrontLostAtBoundary(WavefrontierError):
    pass


class NoStableStep(WavefrontierError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Spatial half-length X, steps dx/dt, final time and Dirichlet values.

    ``bc`` is (u_left, u_right, v_left, v_right).
    """

    X: float
    dx: float
    dt: float
    t_end: float
    params: ModelParams
    bc: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    record_every: float = 0.05

    @property
    def x(self) -> np.ndarray:
        n = round(2 * self.X / self.dx)
        return -self.X + self.dx * np.arange(n + 1)

    @property
    def tau_max(self) -> float:
        return max(self.params.taus)

    @property
    def depth(self) -> int:
        return int(math.ceil(self.tau_max / self.dt)) + 2

    def cfl_dt(self) -> float:
        return cfl_dt(self.dx, self.params)


def cfl_dt(dx: float, params: ModelParams, safety: float = 0.8) -> float:
    """Undelayed explicit-diffusion bound 0.4 dx^2 / D times ``safety``."""
    return safety * 0.4 * dx * dx / max(params.D1, params.D2)


def _mode_radius(dt: float, lam: float, tau: float) -> float:
    """Spectral radius of u^{n+1} = u^n + dt lam u(t_n - tau) with linear history interpolation."""
    if tau == 0:
        return abs(1.0 + dt * lam)
    q = tau / dt
    m = int(math.floor(q))
    th = q - m
    # z^{m+2} - z^{m+1} - dt lam ((1 - th) z + th) = 0
    coeffs = np.zeros(m + 3)
    coeffs[0] = 1.0
    coeffs[1] = -1.0
    coeffs[-2] -= dt * lam * (1.0 - th)
    coeffs[-1] -= dt * lam * th
    return float(np.max(np.abs(np.roots(coeffs))))


def stable_dt(dx: float, params: ModelParams, n_modes: int = 48, max_lag_steps: int = 64) -> float:
    """Largest dt = cfl_dt / 2^k whose delayed diffusion recurrence is stable for every grid mode.

    Reaction terms are ignored (they are bounded and O(dt)). Halving stops once
    a delay spans more than ``max_lag_steps`` steps: the recurrence then tracks
    the continuous delay equation and further refinement cannot help.
    """
    dt = cfl_dt(dx, params)
    pairs = [(params.D1, params.tau1), (params.D2, params.tau3)]
    k = np.linspace(0.0, math.pi, n_modes)
    tau_d = max(params.tau1, params.tau3)
    while tau_d / dt <= max_lag_steps and dt > 1e-12:
        ok = True
        for D, tau in pairs:
            lams = -4.0 * D / (dx * dx) * np.sin(k / 2) ** 2
            if max(_mode_radius(dt, lam, tau) for lam in lams) > 1.0 + 1e-12:
                ok = False
                break
        if ok:
            return dt
        dt /= 2
    raise NoStableStep(
        f"no stable explicit step for dx={dx}: D k^2 tau = {4 * max(D for D, _ in pairs) * max(params.tau1, params.tau3) / dx ** 2:.3g} "
        "exceeds the well-posedness limit pi/2 for the finest grid mode"
    )


DX_LADDER = (0.05, 0.1, 0.125, 0.2, 0.25)


def auto_dx(params: ModelParams, ladder=DX_LADDER) -> tuple[float, float]:
    """Finest dx in the ladder with a stable step, and that step."""
    for dx in ladder:
        try:
            return dx, stable_dt(dx, params)
        except NoStableStep:
            continue
    raise NoStableStep(f"no dx in {list(ladder)} admits a stable explicit step")


@dataclass
class SimState:
    u: np.ndarray
    v: np.ndarray
    history: np.ndarray  # (depth, 2, nx); slot n % depth holds step n
    t: float
    n: int = 0
    min_value: float = 0.0

    def delayed(self, which: int, tau: float, dt: float) -> np.ndarray:
        """Field ``which`` (0=u, 1=v) at time t - tau, linearly interpolated."""
        if tau == 0:
            return self.u if which == 0 else self.v
        q = tau / dt
        m = int(math.floor(q))
        th = q - m
        depth = self.history.shape[0]
        if m + 1 >= depth:
            raise HistoryUnderflow(f"history depth {depth} too short for tau={tau}")
        a = self.history[(self.n - m) % depth, which]
        if th == 0:
            return a
        b = self.history[(self.n - m - 1) % depth, which]
        return (1.0 - th) * a + th * b


def init_from_profile(profile: tuple[GridFunction, GridFunction], config: SimConfig) -> SimState:
    """Populate the field and its history from u(x, -s) = phi(x - c s)."""
    phi, psi = profile
    c = config.params.c
    if min(phi.L, psi.L) < config.X - 1e-12:
        raise ProfileTooNarrow(f"profile half-length {min(phi.L, psi.L)} < simulation half-length {config.X}")
    x = config.x
    depth = config.depth
    hist = np.empty((depth, 2, x.size))
    for k in range(depth):
        s = k * config.dt
        slot = (-k) % depth
        hist[slot, 0] = phi(x - c * s)
        hist[slot, 1] = psi(x - c * s)
    u = hist[0, 0].copy()
    v = hist[0, 1].copy()
    return SimState(u, v, hist, 0.0, 0, float(min(u.min(), v.min())))


def constant_state(uval: float, vval: float, config: SimConfig) -> SimState:
    x = config.x
    hist = np.empty((config.depth, 2, x.size))
    hist[:, 0] = uval
    hist[:, 1] = vval
    return SimState(np.full(x.size, uval), np.full(x.size, vval), hist, 0.0)


def step(state: SimState, config: SimConfig) -> SimState:
    """One forward-Euler step; returns a new state sharing the history buffer."""
    p = config.params
    dt, dx = config.dt, config.dx
    du = state.delayed(0, p.tau1, dt)
    dv = state.delayed(1, p.tau3, dt)
    v_lag = state.delayed(1, p.tau2, dt)
    u_lag = state.delayed(0, p.tau4, dt)
    u, v = state.u, state.v
    un = u.copy()
    vn = v.copy()
    lap_u = (du[2:] - 2.0 * du[1:-1] + du[:-2]) / (dx * dx)
    lap_v = (dv[2:] - 2.0 * dv[1:-1] + dv[:-2]) / (dx * dx)
    ui, vi = u[1:-1], v[1:-1]
    un[1:-1] = ui + dt * (p.D1 * lap_u + p.alpha1 * ui * (1.0 - ui - p.a * v_lag[1:-1]))
    vn[1:-1] = vi + dt * (p.D2 * lap_v + p.alpha2 * vi * (1.0 - vi - p.b * u_lag[1:-1]))
    ul, ur, vl, vr = config.bc
    un[0], un[-1], vn[0], vn[-1] = ul, ur, vl, vr
    lo = float(min(un.min(), vn.min()))
    hi = float(max(un.max(), vn.max()))
    if not (GUARD[0] <= lo and hi <= GUARD[1]) or not math.isfinite(lo + hi):
        raise BlowUp(f"field left [{GUARD[0]}, {GUARD[1]}] at t={state.t + dt:.4g}: range [{lo:.3g}, {hi:.3g}]")
    depth = state.history.shape[0]
    n = state.n + 1
    state.history[n % depth, 0] = un
    state.history[n % depth, 1] = vn
    return SimState(un, vn, state.history, (n) * dt, n, min(state.min_value, lo))


def crossing(x: np.ndarray, f: np.ndarray, level: float = 0.5) -> float:
    """Leftmost x where f crosses ``level`` upward, linearly interpolated."""
    above = f >= level
    idx = np.nonzero(~above[:-1] & above[1:])[0]
    if idx.size == 0:
        return math.nan
    j = int(idx[0])
    return float(x[j] + (level - f[j]) * (x[j + 1] - x[j]) / (f[j + 1] - f[j]))


@dataclass
class SimResult:
    state: SimState
    times: np.ndarray
    front_u: np.ndarray
    front_v: np.ndarray
    snapshots: list = field(default_factory=list)


def run(state: SimState, config: SimConfig, t_end: float | None = None, snapshot_times=()) -> SimResult:
    """Advance to ``t_end`` recording the u = 1/2 and v = 1/2 crossings."""
    t_end = config.t_end if t_end is None else t_end
    n_steps = int(round(t_end / config.dt))
    rec = max(1, int(round(config.record_every / config.dt)))
    snap_steps = {int(round(s / config.dt)): s for s in snapshot_times}
    x = config.x
    times, fu, fv, snaps = [0.0], [crossing(x, state.u)], [crossing(x, state.v)], []
    if 0 in snap_steps:
        snaps.append((0.0, state.u.copy(), state.v.copy()))
    for k in range(1, n_steps + 1):
        state = step(state, config)
        if k % rec == 0:
            times.append(state.t)
            fu.append(crossing(x, state.u))
            fv.append(crossing(x, state.v))
        if k in snap_steps:
            snaps.append((state.t, state.u.copy(), state.v.copy()))
    return SimResult(state, np.array(times), np.array(fu), np.array(fv), snaps)


def front_speed(times, positions, discard: float = 0.2, margin: float | None = None,
                X: float | None = None) -> tuple[float, float]:
    """|slope| and r^2 of a least-squares line through the crossing positions.

    The first ``discard`` fraction of the samples is dropped as transient.
    """
    times = np.asarray(times, dtype=float)
    pos = np.asarray(positions, dtype=float)
    if np.any(~np.isfinite(pos)):
        raise FrontLostAtBoundary("front crossing missing in part of the trace")
    if X is not None:
        m = 1.0 if margin is None else margin
        if np.any(np.abs(pos) > X - m):
            raise FrontLostAtBoundary("front came within the boundary margin")
    start = int(math.floor(discard * times.size))
    t, p = times[start:], pos[start:]
    if t.size < 10:
        raise ValueError("need at least 10 crossing samples after the transient")
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, p, rcond=None)
    fit = slope * t + icpt
    ss_res = float(np.sum((p - fit) ** 2))
    ss_tot = float(np.sum((p - p.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(abs(slope)), float(r2)


def sim_config_for(profile, params: ModelParams, T: float, dx: float | None = None, dt: float | None = None,
                   margin: float = 20.0) -> SimConfig:
    """Domain X >= c T + margin, Dirichlet values from the profile limits."""
    phi, psi = profile
    X = math.ceil(params.c * T + margin)
    if dx is None:
        dx, sdt = auto_dx(params)
        dt = sdt if dt is None else dt
    elif dt is None:
        dt = cfl_dt(dx, params)
    bc = (phi.left_limit, phi.right_limit, psi.left_limit, psi.right_limit)
    return SimConfig(float(X), float(dx), float(dt), float(T), params, bc)


def transport_error(result: SimResult, profile, config: SimConfig, interior: float = 10.0) -> float:
    phi, psi = profile
    x = config.x
    T = result.state.t
    sel = np.abs(x) <= config.X - interior
    c = config.params.c
    eu = np.max(np.abs(result.state.u[sel] - phi(x[sel] + c * T)))
    ev = np.max(np.abs(result.state.v[sel] - psi(x[sel] + c * T)))
    return float(max(eu, ev))


def transport_check(profile, config: SimConfig, T: float | None = None, interior: float = 10.0) -> float:
    """sup over interior x of |u(x,T) - phi(x + c T)| and the same for v."""
    T = config.t_end if T is None else T
    state = init_from_profile(profile, config)
    result = run(state, config, T)
    return transport_error(result, profile, config, interior)


def simulate(profile, config: SimConfig, snapshot_times=()) -> dict:
    """Run, then summarise speed, fit quality and transport error."""
    state = init_from_profile(profile, config)
    result = run(state, config, snapshot_times=snapshot_times)
    speed, r2 = front_speed(result.times, result.front_u, X=config.X)
    err = transport_error(result, profile, config)
    return {
        "result": result,
        "speed": speed,
        "r2": r2,
        "transport_error": err,
        "min_value": result.state.min_value,
        "dx": config.dx,
        "dt": config.dt,
        "X": config.X,
        "t_end": config.t_end,
    }


def with_dt(config: SimConfig, dt: float) -> SimConfig:
    return replace(config, dt=dt)
