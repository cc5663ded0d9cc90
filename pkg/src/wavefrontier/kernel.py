"""Green's functions of x -> D x'' - c x'(.+r) - beta x(.+r) and convolution with them.

G is the bounded solution of D x'' - c x'(t+r) - beta x(t+r) = -delta(t). Its
Fourier transform is 1/s(w) with s(w) = D w^2 + (i c w + beta) e^{i w r}.

Convolution uses product integration: H is treated as the piecewise-linear
interpolant of its samples, so the discrete weights are hat averages of G,

    w_m = (1/h) * integral G(m h - s) hat(s / h) ds,

and sum_m h w_m = 1/beta holds to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .core import GridFunction, WavefrontierError, grid_nodes


class SymbolVanishes(WavefrontierError):
    pass


class TruncationNotConverged(WavefrontierError):
    pass


class InsufficientDecay(WavefrontierError):
    pass


class KernelNotPositive(WavefrontierError):
    pass


@dataclass(frozen=True, eq=False)
class Kernel:
    """Sampled Green's function with its convolution weights and envelope.

    ``weights`` holds w_m for m = -m_max..m_max (``weights[m + m_max]``);
    ``samples`` holds point values on [-L_K, L_K].
    """

    samples: GridFunction
    D: float
    c: float
    beta: float
    r: float
    M: float
    delta: float
    weights: np.ndarray = field(repr=False)
    method: str = "spectral"

    @property
    def h(self) -> float:
        return self.samples.h

    @property
    def m_max(self) -> int:
        return (self.weights.size - 1) // 2

    @property
    def integral(self) -> float:
        """Product-integration mass sum_m h w_m (equals 1/beta)."""
        return float(math.fsum(self.weights) * self.h)

    def sample_integral(self) -> float:
        """Trapezoid integral of the point samples plus exponential-tail estimates."""
        g = self.samples.values
        h = self.h
        body = h * (math.fsum(g) - 0.5 * (g[0] + g[-1]))
        return body

    def exp_tail_sums(self, rate: float) -> np.ndarray:
        """R_m = sum_{i >= 1} exp(-rate i h) w_{m+i} for every stored m (cached per rate)."""
        cache = self.__dict__.setdefault("_exp_tail_cache", {})
        if rate not in cache:
            q = math.exp(-rate * self.h)
            rev = self.weights[::-1]
            # y_m = q (w_{m+1} + y_{m+1}) run from the far end
            cache[rate] = lfilter([0.0, q], [1.0, -q], rev)[::-1]
        return cache[rate]

    def tail_bound(self) -> float:
        """Envelope bound on |integral of G| beyond the sampled window."""
        return 2.0 * self.M * math.exp(-self.delta * self.samples.L) / self.delta

    def as_dict(self) -> dict:
        return {
            "D": self.D,
            "c": self.c,
            "beta": self.beta,
            "r": self.r,
            "M": self.M,
            "delta": self.delta,
            "integral": self.integral,
            "method": self.method,
        }


def characteristic_exponents(D: float, c: float, beta: float) -> tuple[float, float]:
    """Roots (Lambda_minus < 0 < Lambda_plus) of D z^2 - c z - beta = 0."""
    disc = math.sqrt(c * c + 4.0 * D * beta)
    lp = (c + disc) / (2.0 * D)
    lm = -beta / (D * lp)  # product of the roots is -beta/D
    return lm, lp


def closed_form_values(t, D: float, c: float, beta: float):
    """Residue formula for the undelayed Green's function."""
    lm, lp = characteristic_exponents(D, c, beta)
    A = 1.0 / (D * (lp - lm))
    t = np.asarray(t, dtype=float)
    # clip exponents so the unused branch never overflows
    return np.where(t >= 0, A * np.exp(lm * np.maximum(t, 0.0)), A * np.exp(lp * np.minimum(t, 0.0)))


def _hat_average_closed(m: np.ndarray, h: float, D: float, c: float, beta: float) -> np.ndarray:
    """Exact hat averages of the closed-form kernel at u = m h."""
    lm, lp = characteristic_exponents(D, c, beta)
    A = 1.0 / (D * (lp - lm))

    def factor(lam):
        x = lam * h
        # 2 (cosh x - 1) / x^2, series near 0
        return 2.0 * (np.cosh(x) - 1.0) / (x * x) if abs(x) > 1e-4 else 1.0 + x * x / 12.0

    u = m * h
    out = np.where(
        m > 0,
        A * np.exp(lm * np.maximum(u, 0.0)) * factor(lm),
        A * np.exp(lp * np.minimum(u, 0.0)) * factor(lp),
    )

    def one_sided(lam):
        # (1/h) int_0^h e^{lam s} (1 - s/h) ds
        x = lam * h
        if abs(x) < 1e-4:
            return 0.5 + x / 6.0 + x * x / 24.0
        return (math.expm1(x) - x) / (x * x)

    out = np.asarray(out, dtype=float)
    out[m == 0] = A * (one_sided(lm) + one_sided(-lp))
    return out


def _fft_size(L_K: float, h: float, delta: float) -> int:
    period = 2.0 * L_K + 40.0 / delta
    n = 1 << max(10, math.ceil(math.log2(period / h)))
    return n


def symbol(w, D: float, c: float, beta: float, r: float):
    w = np.asarray(w, dtype=float)
    return D * w * w + (1j * c * w + beta) * np.exp(1j * w * r)


def check_symbol(D: float, c: float, beta: float, r: float, n: int = 40001) -> float:
    """Smallest |s(w)|/(1 + w^2) on the real line; raises SymbolVanishes if ~0.

    For |w| > w_star the quadratic term dominates, so only a bounded window
    needs scanning.
    """
    w_star = (c + math.sqrt(c * c + 4 * D * beta)) / D + 1.0
    w = np.linspace(-w_star, w_star, n)
    val = float(np.min(np.abs(symbol(w, D, c, beta, r)) / (1.0 + w * w)))
    if val < 1e-9:
        raise SymbolVanishes(f"symbol nearly vanishes on the real line (min {val:.3e}) for r={r}")
    return val


def _alias_terms(D, c, beta, r, gamma, h, N, js):
    """Periodized DTFT samples of 1/s - 1/s_ref and of the same times the hat transform."""
    k = np.fft.fftfreq(N, d=h) * 2.0 * math.pi
    pts = np.zeros(N, dtype=complex)
    wts = np.zeros(N, dtype=complex)
    # fixed summation order for reproducibility
    for j in js:
        w = k + 2.0 * math.pi * j / h
        diff = 1.0 / symbol(w, D, c, beta, r) - 1.0 / symbol(w, D, c, gamma, 0.0)
        pts += diff
        wts += diff * np.sinc(w * h / (2.0 * math.pi)) ** 2
    return pts, wts


def _spectral_arrays(D, c, beta, r, L_K, h, n_alias, check_truncation=False):
    gamma = beta + 1.0
    lm, lp = characteristic_exponents(D, c, beta)
    N = _fft_size(L_K, h, min(-lm, lp))
    m = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)
    P, W = _alias_terms(D, c, beta, r, gamma, h, N, range(-n_alias, n_alias + 1))
    change = 0.0
    if check_truncation:
        extra = [j for j in range(-2 * n_alias, 2 * n_alias + 1) if abs(j) > n_alias]
        P2, _ = _alias_terms(D, c, beta, r, gamma, h, N, extra)
        change = float(np.max(np.abs(np.fft.ifft(P2).real / h)))
    pts = np.fft.ifft(P).real / h + closed_form_values(m * h, D, c, gamma)
    wts = np.fft.ifft(W).real / h + _hat_average_closed(m, h, D, c, gamma)
    order = np.argsort(m, kind="stable")
    return m[order], pts[order], wts[order], change


def _window(m_sorted, arr, n_K):
    mid = int(np.searchsorted(m_sorted, 0))
    return arr[mid - n_K: mid + n_K + 1]


def closed_form_kernel(D: float, c: float, beta: float, L_K: float, h: float) -> Kernel:
    """Undelayed Green's function from the residue formula."""
    if not (D > 0 and beta > 0):
        raise ValueError("closed_form_kernel needs D > 0 and beta > 0")
    n_K = round(L_K / h)
    t = grid_nodes(L_K, h)
    samples = GridFunction(L_K, h, closed_form_values(t, D, c, beta), 0.0, 0.0)
    # weights over a wider window so tail sums are exact to rounding
    lm, lp = characteristic_exponents(D, c, beta)
    m_max = n_K + math.ceil(40.0 / min(-lm, lp) / h)
    m = np.arange(-m_max, m_max + 1)
    weights = _hat_average_closed(m, h, D, c, beta)
    M, delta = fit_decay_bound_arrays(t, samples.values)
    return Kernel(samples, D, c, beta, 0.0, M, delta, weights, "closed-form")


def spectral_kernel(
    D: float,
    c: float,
    beta: float,
    r: float,
    L_K: float,
    h: float,
    n_alias: int = 128,
    check_truncation: bool = True,
) -> Kernel:
    """Green's function for delay r by Fourier inversion of 1/s.

    The closed-form kernel with beta replaced by beta + 1 is subtracted before
    inversion so the remaining transform decays like |w|^-3.
    """
    if not (D > 0 and beta > 0):
        raise ValueError("spectral_kernel needs D > 0 and beta > 0")
    check_symbol(D, c, beta, r)
    n_K = round(L_K / h)
    m, pts, wts, change = _spectral_arrays(D, c, beta, r, L_K, h, n_alias, check_truncation)
    if check_truncation:
        if change > 1e-8:
            raise TruncationNotConverged(f"doubling the frequency range moved G by {change:.3e}")
    vals = _window(m, pts, n_K)
    samples = GridFunction(L_K, h, vals, 0.0, 0.0)
    M, delta = fit_decay_bound_arrays(samples.t, vals)
    # full periodic window, trimmed symmetric about 0
    m_half = min(int(-m[0]), int(m[-1]))
    weights = _window(m, wts, m_half)
    return Kernel(samples, D, c, beta, float(r), M, delta, weights, "spectral")


def build_kernel(D: float, c: float, beta: float, r: float, L_K: float, h: float) -> Kernel:
    """Closed form at r = 0, spectral otherwise."""
    if r == 0:
        return closed_form_kernel(D, c, beta, L_K, h)
    return spectral_kernel(D, c, beta, r, L_K, h)


def fit_decay_bound_arrays(t: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    a = np.abs(g)
    gmax = float(np.max(a))
    if a[0] >= 1e-3 * gmax or a[-1] >= 1e-3 * gmax:
        raise InsufficientDecay("kernel samples do not decay at the window edges")
    thresh = 1e-7 * gmax
    slopes = []
    for side in (t > 0, t < 0):
        sel = side & (a > thresh)
        ts, gs = np.abs(t[sel]), a[sel]
        if ts.size < 4:
            continue
        # outer half of the resolved range keeps the fit away from the peak
        far = ts >= 0.5 * ts.max()
        if np.count_nonzero(far) < 2:
            far = np.ones_like(ts, dtype=bool)
        slope, _ = np.polyfit(ts[far], np.log(gs[far]), 1)
        slopes.append(-slope)
    if not slopes or min(slopes) <= 0:
        raise InsufficientDecay("could not fit a positive decay rate")
    delta = float(min(slopes))
    M = float(np.max(a * np.exp(delta * np.abs(t))))
    return M, delta


def fit_decay_bound(kernel: Kernel | GridFunction) -> tuple[float, float]:
    """(M, delta) with |G(t)| <= M exp(-delta |t|) at every sample."""
    s = kernel.samples if isinstance(kernel, Kernel) else kernel
    return fit_decay_bound_arrays(s.t, s.values)


def positivity_defect(kernel: Kernel) -> float:
    """-min(G)/max(G); zero or negative means the kernel is nonnegative."""
    g = kernel.samples.values
    return float(-np.min(g) / np.max(g))


def check_positive(kernel: Kernel, tol: float = 1e-8) -> None:
    d = positivity_defect(kernel)
    if d > tol:
        raise KernelNotPositive(f"kernel has negative lobes: min G = {-d:.3e} * max G (r={kernel.r})")


def convolve(kernel: Kernel, H: GridFunction) -> GridFunction:
    """F(t_j) = integral G(t_j - s) H(s) ds on H's grid.

    H is the piecewise-linear interpolant of its samples continued by its
    declared tails, so the result is exact for such H up to the weight
    accuracy. An exponential left tail of H gives the same left tail rate.
    """
    if abs(kernel.h - H.h) > 1e-12 * H.h:
        raise ValueError("kernel and profile grids must share the step h")
    n = H.values.size - 1
    mm = kernel.m_max
    if mm < n:
        raise ValueError("kernel weights do not cover the profile window")
    h = H.h
    w = kernel.weights
    # interior: sum_k H_k w_{j-k}, j - k in [-n, n]
    core = w[mm - n: mm + n + 1]
    body = fftconvolve(H.values, core, mode="full")[n: 2 * n + 1]
    # tails: k < 0 gives m = j - k > j, k > n gives m < j - n
    csum = np.concatenate(([0.0], np.cumsum(w)))  # csum[i] = sum w[:i]
    total = csum[-1]
    j = np.arange(n + 1)
    right_of_j = total - csum[mm + j + 1]  # sum_{m > j}
    left_of = csum[mm + j - n]  # sum_{m < j - n}
    out = body + H.left_limit * right_of_j + H.right_limit * left_of
    if H.left_rate > 0:
        # hat nodes k < 0 carry (H_0 - left_limit) exp(rate k h) on top of the limit
        amp = H.values[0] - H.left_limit
        out = out + amp * kernel.exp_tail_sums(H.left_rate)[mm + j]
    lim = 1.0 / kernel.beta
    return GridFunction(H.L, h, h * out, H.left_limit * lim, H.right_limit * lim, H.left_rate)
