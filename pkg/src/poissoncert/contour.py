"""Generating functions on circles, DFT inversion of the Poisson-binomial law,
and the parametric radius bound on |Delta_k| with its radius optimisation.

g(w) = prod_j (q_j + p_j w) is a polynomial of degree n, so sampling it at
m > n points of a circle and inverting the DFT recovers its coefficients w_k
exactly up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np

from .distributions import Pmf, as_instance, pb_stats, InstanceStats
from .errors import DomainError, NumericalFailure

EPS = np.finfo(float).eps
SQRT_E = math.sqrt(math.e)
C_QUAD = SQRT_E / 2.0
C_LIN = SQRT_E * math.pi ** 2 / 6.0
IMAG_TOL = 1e-12
DOUBLE_TARGET = 1e-13
GRID_POINTS = 129
GRID_RMIN = 1e-6
GOLDEN_RTOL = 1e-6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ContourConfig:
    r: float = 1.0
    m: Optional[int] = None
    precision: str = "auto"  # auto | double | mp

    def __post_init__(self):
        r = float(self.r)
        if not math.isfinite(r) or r <= 0:
            raise DomainError(f"contour radius must be finite and > 0, got {self.r!r}")
        object.__setattr__(self, "r", r)
        if self.precision not in ("auto", "double", "mp"):
            raise DomainError(f"unknown precision mode {self.precision!r}")

    def points(self, n: int) -> int:
        if self.m is None:
            return 1 << int(n).bit_length()  # smallest power of two > n
        return int(self.m)


def g_eval(instance, w):
    """prod_j (q_j + p_j w) by sequential multiplication; w scalar or array."""
    inst = as_instance(instance)
    w = np.asarray(w, dtype=np.complex128)
    out = np.ones(w.shape, dtype=np.complex128)
    for pj in inst.p:
        out = out * ((1.0 - pj) + pj * w)
    return complex(out) if out.ndim == 0 else out


def phi_eval(lam, w):
    """exp(lam (w - 1)), the Poisson generating function."""
    lam = float(lam)
    if not math.isfinite(lam) or lam <= 0:
        raise DomainError(f"lambda must be finite and > 0, got {lam!r}")
    out = np.exp(lam * (np.asarray(w, dtype=np.complex128) - 1.0))
    return complex(out) if np.ndim(out) == 0 else out


def _double_error_estimate(inst, r: float, m: int) -> float:
    # |g| on |w| = r is at most g(r); dividing by r^k amplifies by up to r^-n
    n = inst.n
    log_g = math.fsum(math.log1p(pj * (r - 1.0)) for pj in inst.p)
    amp = math.exp(log_g + max(0.0, -n * math.log(r)))
    return 4.0 * (n + math.log2(m)) * EPS * amp, amp


def _dft_double(inst, r: float, m: int) -> np.ndarray:
    n = inst.n
    theta = 2.0 * np.pi * np.arange(m) / m
    nodes = r * np.exp(1j * theta)
    vals = g_eval(inst, nodes)
    coef = np.fft.fft(vals) / m
    k = np.arange(n + 1)
    return coef[: n + 1] * np.exp(-k * math.log(r))


def _dft_mp(inst, r: float, m: int, dps: int) -> np.ndarray:
    n = inst.n
    with mpmath.workdps(dps):
        rr = mpmath.mpf(r)
        ps = [mpmath.mpf(x) for x in inst.p]
        nodes = [rr * mpmath.expjpi(mpmath.mpf(2 * j) / m) for j in range(m)]
        vals = []
        for z in nodes:
            acc = mpmath.mpc(1)
            for pj in ps:
                acc *= (1 - pj) + pj * z
            vals.append(acc)
        out = np.empty(n + 1, dtype=np.complex128)
        for k in range(n + 1):
            s = mpmath.fsum(vals[j] * mpmath.expjpi(mpmath.mpf(-2 * j * k) / m) for j in range(m))
            c = s / m / rr ** k
            out[k] = complex(c)
    return out


def pb_pmf_via_dft(instance, config: Optional[ContourConfig] = None) -> Pmf:
    """Law of W recovered from g sampled at m points on the circle |w| = r.

    In ``auto`` mode the double-precision FFT is used when its estimated
    rounding error is below 1e-13; otherwise (typically r far from 1, where
    r^-k amplifies rounding) the DFT is evaluated with mpmath at a working
    precision chosen from the same estimate.
    """
    inst = as_instance(instance)
    cfg = config or ContourConfig()
    n = inst.n
    m = cfg.points(n)
    if m <= n:
        raise DomainError(f"need m > n for exact inversion (m={m}, n={n})")
    err, amp = _double_error_estimate(inst, cfg.r, m)
    mode = cfg.precision
    if mode == "auto":
        mode = "double" if err <= DOUBLE_TARGET else "mp"
    if mode == "double":
        c = _dft_double(inst, cfg.r, m)
    else:
        dps = int(math.ceil(-math.log10(DOUBLE_TARGET) + math.log10(max(amp, 1.0)))) + 10
        c = _dft_mp(inst, cfg.r, m, max(dps, 30))
    if np.max(np.abs(c.imag)) > IMAG_TOL:
        raise NumericalFailure(
            f"imaginary residue {np.max(np.abs(c.imag)):.3e} exceeds {IMAG_TOL} (r={cfg.r}, m={m})")
    w = c.real.copy()
    if np.min(w) < -IMAG_TOL:
        raise NumericalFailure(f"negative coefficient {np.min(w):.3e} from DFT inversion")
    w[w < 0] = 0.0
    return Pmf(w)


# ---------------------------------------------------------------- radius bound


def _stats(obj) -> InstanceStats:
    if isinstance(obj, InstanceStats):
        return obj
    return pb_stats(obj)


def psi(stats, r):
    """psi(r) = min(r, 1/r) (lambda - lambda_2)."""
    st = _stats(stats)
    r = np.asarray(r, dtype=np.float64)
    out = np.minimum(r, 1.0 / r) * st.variance
    return float(out) if out.ndim == 0 else out


def rho(stats, k):
    """rho = (lambda - lambda_2) min(k/lambda, lambda/k) for k >= 1."""
    st = _stats(stats)
    k = np.asarray(k, dtype=np.float64)
    if np.any(k < 1):
        raise DomainError("rho is defined for k >= 1")
    out = st.variance * np.minimum(k / st.lam, st.lam / k)
    return float(out) if out.ndim == 0 else out


def _min1_pow(x, s):
    # min(1, x^-s), equal to 1 at x = 0
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(x > 1.0, x ** (-s), 1.0)


def log_bound_5_6(stats, k, r):
    st = _stats(stats)
    r = np.asarray(r, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    ps = np.minimum(r, 1.0 / r) * st.variance
    bracket = C_QUAD * (r - 1.0) ** 2 * _min1_pow(ps, 0.5) + C_LIN * r * _min1_pow(ps, 1.5)
    log_delta = np.where(r < 1.0, 1.0, 0.0)
    with np.errstate(divide="ignore"):
        return (math.log(st.lam2) if st.lam2 > 0 else -np.inf) + log_delta \
            + st.lam * (r - 1.0) - k * np.log(r) + np.log(bracket)


def bound_5_6(stats, k, r):
    """Parametric upper bound on |Delta_k| from the circle of radius r > 0.

    lambda_2 delta_r e^{lambda(r-1)} r^-k ((sqrt(e)/2)(r-1)^2 min(1, psi^-1/2)
    + (sqrt(e) pi^2/6) r min(1, psi^-3/2)), delta_r = e for r < 1 and 1 otherwise.
    """
    st = _stats(stats)
    if not st.lam > 0:
        raise DomainError("the radius bound needs lambda > 0")
    r_arr = np.asarray(r, dtype=np.float64)
    if np.any(~np.isfinite(r_arr)) or np.any(r_arr <= 0):
        raise DomainError("radius must be finite and > 0")
    if int(np.min(k)) < 0:
        raise DomainError("k must be >= 0")
    out = np.exp(log_bound_5_6(st, k, r_arr))
    return float(out) if np.ndim(out) == 0 else out


def bound_5_6_k0_limit(stats) -> float:
    """Limit of the radius bound at k = 0 as r -> 0: (e sqrt(e)/2) lambda_2 e^-lambda."""
    st = _stats(stats)
    return math.e * C_QUAD * st.lam2 * math.exp(-st.lam)


def _golden(f, a: float, b: float, rtol: float):
    """Minimise f on [a, b] (log-radius coordinates) by golden-section search."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def radius_grid(stats, k: int) -> np.ndarray:
    st = _stats(stats)
    hi = max(4.0, 4.0 * k / st.lam)
    return np.geomspace(GRID_RMIN, hi, GRID_POINTS)


def best_r_bound(stats, k: int) -> tuple:
    """(r_star, value) minimising the radius bound over r > 0.

    Log grid of 129 radii, golden-section refinement in log r around the best
    grid point, and the special radii r = 1, r = k/lambda (k >= 1) and the
    r -> 0 limit (k = 0, reported as r_star = 0).
    """
    st = _stats(stats)
    if not st.lam > 0:
        raise DomainError("the radius bound needs lambda > 0")
    k = int(k)
    if st.lam2 == 0.0:
        return (1.0, 0.0)
    grid = radius_grid(st, k)
    logs = log_bound_5_6(st, k, grid)
    i = int(np.argmin(logs))
    cands = [(float(grid[i]), float(logs[i]))]
    lo = math.log(grid[max(i - 1, 0)])
    hi = math.log(grid[min(i + 1, grid.size - 1)])
    if hi > lo:
        x, fx = _golden(lambda t: float(log_bound_5_6(st, k, math.exp(t))), lo, hi, GOLDEN_RTOL)
        cands.append((math.exp(x), fx))
    cands.append((1.0, float(log_bound_5_6(st, k, 1.0))))
    if k >= 1:
        rk = k / st.lam
        cands.append((rk, float(log_bound_5_6(st, k, rk))))
    else:
        cands.append((0.0, math.log(bound_5_6_k0_limit(st))))
    r_star, lv = min(cands, key=lambda t: t[1])
    return (r_star, math.exp(lv))


__all__ = [
    "ContourConfig", "g_eval", "phi_eval", "pb_pmf_via_dft", "psi", "rho",
    "bound_5_6", "log_bound_5_6", "bound_5_6_k0_limit", "best_r_bound", "radius_grid",
]
