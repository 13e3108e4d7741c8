"""Catalogue of explicit Poisson-approximation bounds as evaluable certificates.

A certificate is an (applicability predicate, bound expression, target
quantity) triple. Evaluating one on an instance yields the bound, the exact
value of the target and the margin (bound - actual for upper bounds,
actual - bound for lower bounds).

Per-k certificates are evaluated as arrays over k. Bounds proportional to a
Poisson probability f(k) are assembled in log space so that they stay
meaningful where f(k) underflows.

Total variation uses the l1 convention (range [0, 2]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .contour import (C_LIN, C_QUAD, best_r_bound, bound_5_6_k0_limit, log_bound_5_6,
                      radius_grid)
from .distributions import as_instance, log1m_plus
from .divergences import ExactComparison, default_k_max, kolmogorov_normal
from .errors import DomainError

SLACK = 1e-9
KAPPA_GRID = (0.5, 0.75, 0.9)
BE_CONSTANT = 0.56
THM12_C_SMALL = 15.0
THM12_C_LARGE = 56e6
PROP62_C = 7e6
SQRT_E = math.sqrt(math.e)
TAIL_DS = (1, 6)

REPORTED_ONLY = "reported-only"


# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class BoundCertificate:
    id: str
    target: str
    direction: str
    applicable: bool
    bound_value: Optional[float]
    actual: Optional[float]
    margin: Optional[float]
    k: Optional[int] = None
    kappa: Optional[float] = None
    d: Optional[int] = None
    flags: tuple = ()

    def is_violation(self, slack: float = SLACK) -> bool:
        if not self.applicable or self.margin is None:
            return False
        scale = max(abs(self.bound_value), abs(self.actual), 1e-300)
        return self.margin < -slack * scale

    @property
    def reported_only(self) -> bool:
        return REPORTED_ONLY in self.flags

    def to_dict(self) -> dict:
        return {
            "id": self.id, "k": self.k, "kappa": self.kappa, "d": self.d,
            "target": self.target, "direction": self.direction,
            "applicable": self.applicable, "bound": self.bound_value,
            "actual": self.actual, "margin": self.margin, "flags": list(self.flags),
        }


@dataclass
class CertArrays:
    """One certificate evaluated over a vector of k (length 1 for global ones)."""

    id: str
    target: str
    direction: str
    ks: np.ndarray
    applicable: np.ndarray
    bound: np.ndarray
    actual: np.ndarray
    flags: tuple
    per_k: bool
    kappa: Optional[float] = None
    d: Optional[int] = None

    @cached_property
    def margin(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            m = self.bound - self.actual if self.direction == "upper" else self.actual - self.bound
        return np.where(self.applicable, m, np.nan)

    def violations(self, slack: float = SLACK) -> np.ndarray:
        scale = np.maximum(np.maximum(np.abs(self.bound), np.abs(self.actual)), 1e-300)
        with np.errstate(invalid="ignore"):
            bad = self.applicable & (self.margin < -slack * scale)
        return bad

    @property
    def reported_only(self) -> bool:
        return REPORTED_ONLY in self.flags

    def certificates(self) -> list:
        out = []
        for i in range(self.ks.size):
            app = bool(self.applicable[i])
            out.append(BoundCertificate(
                id=self.id, target=self.target, direction=self.direction,
                applicable=app,
                bound_value=float(self.bound[i]) if app else None,
                actual=float(self.actual[i]) if app else None,
                margin=float(self.margin[i]) if app else None,
                k=int(self.ks[i]) if self.per_k or self.ks[i] >= 0 else None,
                kappa=self.kappa, d=self.d, flags=self.flags,
            ))
        return out


class _Entry(NamedTuple):
    id: str
    target: str
    direction: str
    per_k: bool
    flags: tuple
    needs_kappa: bool
    needs_d: bool
    default: bool
    fn: Callable
    k_fixed: Optional[int]


REGISTRY: dict = {}


def _cert(id, target, direction, *, per_k=False, flags=(), kappa=False, d=False,
          default=True, k=None):
    def deco(fn):
        REGISTRY[id] = _Entry(id, target, direction, per_k, tuple(flags), kappa, d, default, fn, k)
        return fn
    return deco


def certificate_ids(include_opt_in: bool = False) -> list:
    return sorted(i for i, s in REGISTRY.items() if include_opt_in or s.default)


# ---------------------------------------------------------------- context


class _Ctx:
    def __init__(self, cmp_: ExactComparison, ks: np.ndarray, kappa, d):
        self.cmp = cmp_
        self.st = cmp_.instance.stats
        self.lam = self.st.lam
        self.lam2 = self.st.lam2
        self.var = self.st.variance
        self.max_p = self.st.max_p
        self.ks = ks
        self.kappa = kappa
        self.d = d

    @cached_property
    def kf(self):
        return self.ks.astype(np.float64)

    @cached_property
    def logf(self):
        return self.cmp.logf(self.ks)

    @cached_property
    def f(self):
        return np.exp(self.logf)

    @cached_property
    def delta(self):
        return self.cmp.delta(self.ks)

    @cached_property
    def abs_delta(self):
        return np.abs(self.delta)

    def logf_shift(self, s: int):
        # log f(k - s), -inf where k - s < 0
        kk = self.ks - s
        out = np.full(kk.shape, -np.inf)
        ok = kk >= 0
        if np.any(ok):
            out[ok] = self.cmp.logf(kk[ok])
        return out

    @cached_property
    def delta_scalar(self):
        return {k: float(self.cmp.delta(np.array([k]))[0]) for k in (0, 1, 2)}

    def tail_moments(self, d: int) -> np.ndarray:
        return _tail_moments(self.lam, d, self.ks)


def _tail_moments(lam: float, d: int, ks: np.ndarray) -> np.ndarray:
    """sum_{j >= k} j^d f(j) for each k in ks, by reverse accumulation."""
    top = int(ks.max()) if ks.size else 0
    end = max(top, int(2 * lam) + 1) + 64
    while True:
        js = np.arange(0, end + 1, dtype=np.int64)
        with np.errstate(divide="ignore"):
            lt = d * np.log(js.astype(np.float64)) + kernels.poisson_logpmf(lam, js)
        t = np.exp(lt)
        last = float(end)
        ratio = (lam / (last + 1.0)) * ((last + 1.0) / last) ** d
        if ratio < 0.5 and t[-1] <= 1e-20 * t.sum():
            break
        end *= 2
    rev = np.cumsum(t[::-1])[::-1]
    return rev[np.clip(ks, 0, end)]


def resolve_kappa(kappa_eff: Optional[float]) -> Optional[float]:
    """Smallest grid value >= kappa_eff, or None when kappa_eff exceeds the grid."""
    if kappa_eff is None:
        return None
    for g in KAPPA_GRID:
        if kappa_eff <= g:
            return g
    return None


def _min1_pow(x, s):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(x > 1.0, x ** (-s), 1.0)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _g(app, bound, actual):
    return (bool(app), float(bound) if app else math.nan, float(actual) if app else math.nan)


# ---------------------------------------------------------------- global: total variation


@_cert("BH_LOWER", "tv", "lower")
def _bh_lower(c):
    return _g(c.lam > 0, min(1.0, 1.0 / c.lam) * c.lam2 / 16.0 if c.lam > 0 else 0, c.cmp.tv)


@_cert("BH_UPPER", "tv", "upper")
def _bh_upper(c):
    b = 2.0 * (-math.expm1(-c.lam) / c.lam) * c.lam2 if c.lam > 0 else 0
    return _g(c.lam > 0, b, c.cmp.tv)


@_cert("LE_CAM", "tv", "upper")
def _le_cam(c):
    return _g(True, 2.0 * c.lam2, c.cmp.tv)


@_cert("KERSTAN", "tv", "upper")
def _kerstan(c):
    app = c.lam > 0 and c.max_p <= 0.25
    return _g(app, 2.1 * c.lam2 / c.lam if app else 0, c.cmp.tv)


@_cert("CHEN", "tv", "upper", flags=("unverified-precondition",))
def _chen(c):
    app = c.lam > 0
    extra = (REPORTED_ONLY,) if c.lam < 1.0 else ()
    return _g(app, 10.0 * c.lam2 / c.lam if app else 0, c.cmp.tv) + (extra,)


# ---------------------------------------------------------------- global: relative entropy


class HRInterval(NamedTuple):
    lower: float
    upper: float
    raw_lower: float
    clamped: bool


def hr_iid_interval(p: float, n: int) -> HRInterval:
    """Two-sided i.i.d. interval for D(W || Z) with p_j = p, j <= n.

    The lower end is clamped at 0 (D >= 0) and ``clamped`` records when that
    happened.
    """
    p = float(p)
    n = int(n)
    if not (0.0 < p < 1.0):
        raise DomainError(f"the i.i.d. interval needs 0 < p < 1, got {p!r}")
    if n < 1:
        raise DomainError("n must be >= 1")
    a = 0.5 * log1m_plus(p)
    q3 = (1.0 - p) ** 3
    lo = a - 14.0 * p * p / (n * q3)
    hi = a - (1.0 + p) * p * p / (4.0 * n * q3)
    return HRInterval(max(lo, 0.0), hi, lo, lo < 0.0)


def _iid_p(c):
    st = c.st
    inst = c.cmp.instance
    if not inst.is_iid:
        return None
    p = inst.p[0]
    return p if 0.0 < p < 1.0 else None


@_cert("HR_IID_LOWER", "kl", "lower")
def _hr_lower(c):
    p = _iid_p(c)
    if p is None:
        return _g(False, 0, 0)
    iv = hr_iid_interval(p, c.cmp.n)
    return _g(True, iv.lower, c.cmp.kl) + ((("clamped",) if iv.clamped else ()),)


@_cert("HR_IID_UPPER", "kl", "upper", flags=(REPORTED_ONLY, "known-defect"))
def _hr_upper(c):
    p = _iid_p(c)
    if p is None:
        return _g(False, 0, 0)
    return _g(True, hr_iid_interval(p, c.cmp.n).upper, c.cmp.kl)


@_cert("KHJ_UPPER", "kl", "upper")
def _khj(c):
    app = c.lam > 0 and c.max_p < 1.0
    if not app:
        return _g(False, 0, 0)
    p = c.st._p
    b = math.fsum(p ** 3 / (1.0 - p)) / c.lam
    return _g(True, b, c.cmp.kl)


@_cert("HJK_LOWER", "kl", "lower")
def _hjk(c):
    app = c.lam > 0
    return _g(app, 0.25 * (c.lam2 / c.lam) ** 2 if app else 0, c.cmp.kl)


# ---------------------------------------------------------------- global: chi-square


def prop34_constant(lam: float, *, small: bool = False, include_c2_term: bool = False) -> float:
    """C_lambda = lambda^2 + lambda (lambda + a)^2 + B_lambda with a = e - 1.

    ``small=True`` uses a = 2(sqrt(e) - 1), the sharper first-point constant
    valid for lambda <= 1/2. ``include_c2_term`` adds the contribution
    lambda^2 c^2 (e^lambda + c), c = (e^lambda - 1)/lambda, of the squared
    middle coefficient, which the closed form for B_lambda leaves out.
    """
    lam = float(lam)
    a = 2.0 * (SQRT_E - 1.0) if small else math.e - 1.0
    el = math.exp(lam)
    b = lam * (2.0 - lam - lam * lam) - 2.0 * (1.0 + lam - 2.0 * lam * lam) * el \
        + 4.0 * (1.0 + lam) * el * el
    c_val = lam * lam + lam * (lam + a) ** 2 + b
    if include_c2_term and lam > 0:
        cl = math.expm1(lam) / lam
        c_val += lam * lam * cl * cl * (el + cl)
    return c_val


C_HALF_LITERAL = 0.5 * (0.5 + 2.0 * (SQRT_E - 1.0)) ** 2 + 7.0 / 8.0 - 2.0 * SQRT_E + 6.0 * math.e


@_cert("THM12", "chi2", "upper")
def _thm12(c):
    app = c.lam > 0 and c.lam2 <= 0.5 * c.lam
    if not app:
        return _g(False, 0, 0)
    small = c.lam <= 0.5
    cc = THM12_C_SMALL if small else THM12_C_LARGE
    extra = (REPORTED_ONLY, "c15-branch") if small else ()
    return _g(True, cc * (c.lam2 / c.lam) ** 2, c.cmp.chi2) + (extra,)


@_cert("PROP34", "chi2", "upper")
def _prop34(c):
    app = c.lam > 0 and c.max_p <= 0.5
    if not app:
        return _g(False, 0, 0)
    return _g(True, prop34_constant(c.lam) * (c.lam2 / c.lam) ** 2, c.cmp.chi2)


@_cert("PROP62", "chi2", "upper", kappa=True)
def _prop62(c):
    k = c.kappa
    app = k is not None and 0 < k < 1 and c.lam >= 0.5 and c.lam2 <= k * c.lam
    if not app:
        return _g(False, 0, 0)
    return _g(True, PROP62_C * (1.0 - k) ** -3 * (c.lam2 / c.lam) ** 2, c.cmp.chi2)


# ---------------------------------------------------------------- global: fixed k


@_cert("THM13_K0", "abs_delta", "upper", k=0)
def _thm13_k0(c):
    return _g(c.lam > 0, 3.0 * c.lam2 * math.exp(-c.lam), abs(c.delta_scalar[0]))


@_cert("LEMMA31", "neg_delta", "upper", k=0)
def _lemma31(c):
    app = c.lam > 0 and c.max_p <= 0.5
    return _g(app, c.lam2 * math.exp(-c.lam), -c.delta_scalar[0])


@_cert("LEMMA31_NONNEG", "neg_delta", "lower", k=0)
def _lemma31_nonneg(c):
    app = c.lam > 0 and c.max_p <= 0.5
    return _g(app, 0.0, -c.delta_scalar[0])


@_cert("LEMMA32_K1", "abs_delta", "upper", k=1)
def _lemma32_k1(c):
    app = c.lam > 0 and c.max_p <= 0.5
    return _g(app, c.lam2 * (c.lam + math.e - 1.0) * math.exp(-c.lam), abs(c.delta_scalar[1]))


@_cert("LEMMA32_K1_SMALL", "abs_delta", "upper", k=1)
def _lemma32_k1_small(c):
    app = c.lam > 0 and c.max_p <= 0.5 and c.lam <= 0.5
    b = c.lam2 * (c.lam + 2.0 * (SQRT_E - 1.0)) * math.exp(-c.lam)
    return _g(app, b, abs(c.delta_scalar[1]))


@_cert("LOWER_K0", "neg_delta", "lower", k=0)
def _lower_k0(c):
    app = 0 < c.lam <= 0.5
    return _g(app, 0.47 * c.lam2 * math.exp(-c.lam), -c.delta_scalar[0])


@_cert("LOWER_K1", "delta", "lower", k=1)
def _lower_k1(c):
    app = 0 < c.lam <= 0.5
    return _g(app, 0.42 * c.lam2 * math.exp(-c.lam), c.delta_scalar[1])


@_cert("LOWER_K2", "neg_delta", "lower", k=2)
def _lower_k2(c):
    app = 0 < c.lam <= 0.125
    return _g(app, 17.0 / 49.0 * c.lam2 * math.exp(-c.lam), -c.delta_scalar[2])


@_cert("EQ56_K0_LIMIT", "abs_delta", "upper", k=0)
def _eq56_k0(c):
    app = c.lam > 0
    return _g(app, bound_5_6_k0_limit(c.st) if app else 0, abs(c.delta_scalar[0]))


# ---------------------------------------------------------------- global: M, K and relations


@_cert("PROP41", "M", "upper")
def _prop41(c):
    return _g(True, c.lam2, c.cmp.sup_density)


@_cert("THM71", "M", "upper")
def _thm71(c):
    app = c.lam > 0
    b = C_LIN * c.lam2 * float(_min1_pow(c.var, 1.5))
    return _g(app, b, c.cmp.sup_density)


@_cert("THM71_SIMPLE", "M", "upper")
def _thm71_simple(c):
    app = c.lam > 0 and c.lam2 <= 0.5 * c.lam
    b = math.sqrt(2.0 * math.e) * math.pi ** 2 / 3.0 * c.lam2 / c.lam ** 1.5 if app else 0
    return _g(app, b, c.cmp.sup_density)


@_cert("PINSKER", "kl", "lower")
def _pinsker(c):
    return _g(True, 0.5 * c.cmp.tv ** 2, c.cmp.kl)


@_cert("CHI_GE_KL", "chi2", "lower")
def _chi_ge_kl(c):
    return _g(True, c.cmp.kl, c.cmp.chi2)


@_cert("M_LE_2K", "M", "upper")
def _m_le_2k(c):
    return _g(True, 2.0 * c.cmp.kolmogorov, c.cmp.sup_density)


@_cert("K_LE_TV", "K", "upper")
def _k_le_tv(c):
    return _g(True, c.cmp.tv, c.cmp.kolmogorov)


def lyapunov_ratio(instance) -> float:
    """L3 = sum_j (p_j^2 + q_j^2) p_j q_j / (lambda - lambda_2)^{3/2}; nan if Var W = 0."""
    st = as_instance(instance).stats
    if st.variance <= 0:
        return math.nan
    p = st._p
    q = 1.0 - p
    return math.fsum((p * p + q * q) * p * q) / st.variance ** 1.5


@_cert("LYAPUNOV_SIMPLE", "L3", "upper")
def _lyap_simple(c):
    app = c.var > 0
    if not app:
        return _g(False, 0, 0)
    return _g(True, 1.0 / math.sqrt(c.var), lyapunov_ratio(c.cmp.instance))


@_cert("BE_LYAPUNOV", "K_normal", "upper", flags=(REPORTED_ONLY, "diagnostic"))
def _be_lyap(c):
    app = c.var > 0
    if not app:
        return _g(False, 0, 0)
    return _g(True, BE_CONSTANT * lyapunov_ratio(c.cmp.instance),
              kolmogorov_normal(c.cmp.instance, variance="lambda"))


# ---------------------------------------------------------------- per-k certificates


def _arr(app, bound, actual):
    app = np.asarray(app, dtype=bool)
    bound = np.where(app, bound, np.nan)
    actual = np.where(app, actual, np.nan)
    return app, bound, actual


@_cert("THM13_UNIF", "abs_delta", "upper", per_k=True)
def _thm13_unif(c):
    app = (c.ks >= 1) & (c.lam > 0)
    return _arr(app, np.full(c.ks.shape, 3.0 * c.lam2), c.abs_delta)


def thm13_nonunif_log(c) -> np.ndarray:
    k = np.maximum(c.kf, 1.0)
    r = c.var * np.minimum(k / c.lam, c.lam / k)
    a = 7.0 * np.sqrt(k) * ((k - c.lam) / c.lam) ** 2 * c.lam2 * _min1_pow(r, 0.5) \
        + 21.0 * k ** 1.5 * (c.lam2 / c.lam) * _min1_pow(r, 1.5)
    return _log(a) + c.logf


@_cert("THM13_NONUNIF", "abs_delta", "upper", per_k=True)
def _thm13_nonunif(c):
    app = (c.ks >= 1) & (c.lam > 0)
    return _arr(app, np.exp(thm13_nonunif_log(c)), c.abs_delta)


def _cor61_common(c):
    k = c.kf
    return ((k - c.lam) ** 2 / c.lam + 3.0) * (c.lam2 / c.lam)


def _kappa_ok(c):
    return c.kappa is not None and 0 < c.kappa < 1 and c.lam > 0 and c.lam2 <= c.kappa * c.lam


@_cert("COR61", "abs_delta", "upper", per_k=True, kappa=True)
def _cor61(c):
    ok = _kappa_ok(c)
    if not ok:
        return _arr(np.zeros(c.ks.shape, bool), 0.0, 0.0)
    pre = 7.0 / (1.0 - c.kappa) ** 1.5
    a = pre * _cor61_common(c) * np.maximum((c.kf / c.lam) ** 3, 1.0)
    return _arr(np.ones(c.ks.shape, bool), np.exp(_log(a) + c.logf), c.abs_delta)


@_cert("COR61_LOW", "abs_delta", "upper", per_k=True, kappa=True)
def _cor61_low(c):
    ok = _kappa_ok(c)
    if not ok:
        return _arr(np.zeros(c.ks.shape, bool), 0.0, 0.0)
    pre = 56.0 / (1.0 - c.kappa) ** 1.5
    a = pre * _cor61_common(c)
    app = c.kf <= 2.0 * c.lam
    return _arr(app, np.exp(_log(a) + c.logf), c.abs_delta)


@_cert("COR61_HIGH", "abs_delta", "upper", per_k=True, kappa=True)
def _cor61_high(c):
    ok = _kappa_ok(c)
    if not ok:
        return _arr(np.zeros(c.ks.shape, bool), 0.0, 0.0)
    pre = 49.0 / (1.0 - c.kappa) ** 1.5
    a = pre * (c.kf / c.lam) ** 3 * c.lam2
    app = (c.kf >= c.lam) & (c.lam >= 0.5)
    return _arr(app, np.exp(_log(a) + c.logf), c.abs_delta)


def _sum_logs(*logs):
    stack = np.vstack(logs)
    m = np.max(stack, axis=0)
    m = np.where(np.isfinite(m), m, 0.0)
    return m + _log(np.sum(np.exp(stack - m), axis=0))


@_cert("PROP33", "abs_delta", "upper", per_k=True)
def _prop33(c):
    app = (c.lam > 0) & (c.max_p <= 0.5) & np.ones(c.ks.shape, bool)
    if not app.any():
        return _arr(app, 0.0, 0.0)
    lp = _sum_logs(c.logf, c.logf_shift(1), c.logf_shift(2))  # log P{k-2 <= Z <= k}
    pre = math.expm1(c.lam) / c.lam * c.lam2
    return _arr(app, np.exp(math.log(pre) + lp), c.abs_delta)


@_cert("LEMMA32_UNIFIED", "abs_delta", "upper", per_k=True)
def _lemma32_unified(c):
    app = (c.ks >= 1) & (c.lam > 0) & (c.max_p <= 0.5)
    if not app.any():
        return _arr(app, 0.0, 0.0)
    mn = np.minimum(c.lam, c.kf)
    mn = np.where(mn > 0, mn, 1.0)
    ck = np.expm1(mn) / mn
    lb = _sum_logs(c.logf, _log(ck) + c.logf_shift(1), c.logf_shift(2))
    return _arr(app, np.exp(math.log(c.lam2) + lb) if c.lam2 > 0 else 0.0, c.abs_delta)


@_cert("LEMMA32_KGE2", "abs_delta", "upper", per_k=True)
def _lemma32_kge2(c):
    app = (c.ks >= 2) & (c.lam > 0) & (c.max_p <= 0.5)
    if not app.any():
        return _arr(app, 0.0, 0.0)
    cl = math.expm1(c.lam) / c.lam
    lb = _sum_logs(c.logf, math.log(cl) + c.logf_shift(1), c.logf_shift(2))
    return _arr(app, np.exp(math.log(c.lam2) + lb) if c.lam2 > 0 else 0.0, c.abs_delta)


@_cert("EQ56_R1", "abs_delta", "upper", per_k=True)
def _eq56_r1(c):
    app = np.full(c.ks.shape, c.lam > 0)
    if not app.any():
        return _arr(app, 0.0, 0.0)
    return _arr(app, np.exp(log_bound_5_6(c.st, c.kf, 1.0)), c.abs_delta)


@_cert("EQ56_RK", "abs_delta", "upper", per_k=True)
def _eq56_rk(c):
    app = (c.ks >= 1) & (c.lam > 0)
    if not app.any():
        return _arr(app, 0.0, 0.0)
    r = np.maximum(c.kf, 1.0) / c.lam
    return _arr(app, np.exp(log_bound_5_6(c.st, c.kf, r)), c.abs_delta)


@_cert("EQ56_GRID", "abs_delta", "upper", per_k=True, default=False)
def _eq56_grid(c):
    """Radius bound at every point of the search grid; the bound is the grid minimum."""
    app = np.full(c.ks.shape, c.lam > 0)
    if not app.any():
        return _arr(app, 0.0, 0.0)
    out = np.empty(c.ks.shape)
    for i, k in enumerate(c.ks):
        out[i] = np.min(log_bound_5_6(c.st, float(k), radius_grid(c.st, int(k))))
    return _arr(app, np.exp(out), c.abs_delta)


@_cert("EQ56_BEST", "abs_delta", "upper", per_k=True, default=False)
def _eq56_best(c):
    app = np.full(c.ks.shape, c.lam > 0)
    if not app.any():
        return _arr(app, 0.0, 0.0)
    vals = np.array([best_r_bound(c.st, int(k))[1] for k in c.ks])
    return _arr(app, vals, c.abs_delta)


# ---- Poisson probability envelopes (depend on lambda only)


@_cert("LEMMA21_CAP", "f", "upper", per_k=True)
def _l21_cap(c):
    app = (c.ks >= 1) & (c.lam > 0)
    k = np.maximum(c.kf, 1.0)
    return _arr(app, 1.0 / np.sqrt(2.0 * math.pi * k), c.f)


def _l21_domain(c):
    return (c.ks >= 1) & (c.kf <= 2.0 * c.lam) & (c.lam > 0)


@_cert("LEMMA21_UPPER", "f", "upper", per_k=True)
def _l21_upper(c):
    app = _l21_domain(c)
    k = np.maximum(c.kf, 1.0)
    lam = c.lam if c.lam > 0 else 1.0
    return _arr(app, np.exp(-(k - lam) ** 2 / (3.0 * lam)) / np.sqrt(2.0 * math.pi * k), c.f)


@_cert("LEMMA21_LOWER", "f", "lower", per_k=True)
def _l21_lower(c):
    app = _l21_domain(c)
    k = np.maximum(c.kf, 1.0)
    lam = c.lam if c.lam > 0 else 1.0
    return _arr(app, np.exp(-(k - lam) ** 2 / lam - 1.0) / np.sqrt(k), c.f)


@_cert("LEMMA21_REFINED", "f", "lower", per_k=True)
def _l21_refined(c):
    app = _l21_domain(c) & (c.kf >= c.lam)
    k = np.maximum(c.kf, 1.0)
    lam = c.lam if c.lam > 0 else 1.0
    return _arr(app, np.exp(-(k - lam) ** 2 / (2.0 * lam) - 1.0) / np.sqrt(k), c.f)


@_cert("TAIL_MOMENT", "tail_moment", "upper", per_k=True, d=True)
def _tail_moment(c):
    d = c.d
    if c.lam <= 0:
        return _arr(np.zeros(c.ks.shape, bool), 0.0, 0.0)
    k = np.maximum(c.kf, 1.0)
    app = (c.ks >= 1) & (d * np.log(k) - (d - 1) * np.log(k + 1.0) > math.log(c.lam))
    if not app.any():
        return _arr(app, 0.0, 0.0)
    q = (c.lam / k) * ((k + 1.0) / k) ** (d - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lb = d * np.log(k) + c.logf - np.log1p(-np.where(app, q, 0.0))
    return _arr(app, np.exp(lb), c.tail_moments(d))


# ---------------------------------------------------------------- evaluation


def _degenerate(entry, ks, kappa, d):
    n = ks.size
    return CertArrays(entry.id, entry.target, entry.direction, ks, np.ones(n, bool),
                      np.zeros(n), np.zeros(n), entry.flags + ("degenerate",), entry.per_k,
                      kappa, d)


def _run(entry: _Entry, ctx: _Ctx) -> CertArrays:
    if ctx.lam == 0.0:
        ks = ctx.ks if entry.per_k else np.array([entry.k_fixed if entry.k_fixed is not None else -1])
        return _degenerate(entry, ks, ctx.kappa, ctx.d)
    if entry.per_k:
        app, bound, actual = entry.fn(ctx)
        return CertArrays(entry.id, entry.target, entry.direction, ctx.ks, app,
                          np.broadcast_to(bound, ctx.ks.shape).astype(float),
                          np.broadcast_to(actual, ctx.ks.shape).astype(float),
                          entry.flags, True,
                          ctx.kappa if entry.needs_kappa else None,
                          ctx.d if entry.needs_d else None)
    res = entry.fn(ctx)
    app, bound, actual = res[:3]
    flags = entry.flags + (tuple(res[3]) if len(res) > 3 else ())
    kfix = entry.k_fixed if entry.k_fixed is not None else -1
    return CertArrays(entry.id, entry.target, entry.direction, np.array([kfix]),
                      np.array([app]), np.array([bound]), np.array([actual]),
                      flags, False, ctx.kappa if entry.needs_kappa else None, None)


def _entry(id_: str) -> _Entry:
    try:
        return REGISTRY[id_]
    except KeyError:
        raise DomainError(
            f"unknown certificate id {id_!r}; valid ids: {', '.join(certificate_ids(True))}"
        ) from None


def evaluate_arrays(instance, ids: Optional[Iterable[str]] = None, *, ks=None,
                    kappa: Optional[float] = None, ds: Sequence[int] = TAIL_DS,
                    comparison: Optional[ExactComparison] = None) -> list:
    """Evaluate certificates as arrays over k; the batch path used by the harness."""
    cmp_ = comparison or ExactComparison(instance)
    if ids is None:
        ids = certificate_ids()
    entries = [_entry(i) for i in ids]
    if ks is None:
        ks = np.arange(default_k_max(cmp_.n, cmp_.lam) + 1, dtype=np.int64)
    ks = np.asarray(ks, dtype=np.int64)
    if kappa is None:
        kappa = resolve_kappa(cmp_.instance.stats.kappa_eff)
    out = []
    base = _Ctx(cmp_, ks, kappa, None)
    for s in sorted(entries, key=lambda s: s.id):
        if s.needs_d:
            for d in ds:
                ctx = _Ctx(cmp_, ks, kappa, int(d))
                ctx.__dict__.update({k: v for k, v in base.__dict__.items()
                                     if k in ("logf", "f", "delta", "abs_delta", "kf")})
                out.append(_run(s, ctx))
        else:
            out.append(_run(s, base))
    return out


def evaluate_certificate(id: str, instance, k: Optional[int] = None,
                         kappa: Optional[float] = None, d: Optional[int] = None) -> BoundCertificate:
    """Evaluate one certificate. Per-k certificates need ``k``; TAIL_MOMENT needs ``d``.

    ``kappa`` defaults to the instance's lambda_2/lambda rounded up to 0.5, 0.75 or 0.9.
    """
    entry = _entry(id)
    if entry.per_k and k is None:
        raise DomainError(f"certificate {id} is per-k and needs k")
    if entry.needs_d and d is None:
        raise DomainError(f"certificate {id} needs the moment order d")
    if k is not None and int(k) < 0:
        raise DomainError("k must be >= 0")
    if kappa is not None and not (0.0 < float(kappa) < 1.0):
        raise DomainError("kappa must lie in (0, 1)")
    inst = as_instance(instance)
    ks = np.array([int(k)]) if entry.per_k else None
    arrs = evaluate_arrays(inst, [id], ks=ks, kappa=kappa, ds=(int(d),) if d else TAIL_DS)
    return arrs[0].certificates()[0]


def verify_instance(instance, ids: Optional[Iterable[str]] = None, slack: float = SLACK, *,
                    kappa: Optional[float] = None, k_max: Optional[int] = None,
                    ds: Sequence[int] = TAIL_DS) -> list:
    """Every requested certificate on one instance (per-k ones over k = 0..k_max),
    sorted by (id, k). Violations are reported through ``is_violation``."""
    if slack < 0:
        raise DomainError("slack must be >= 0")
    if ids is not None:
        ids = list(ids)
        if not ids:
            return []
    cmp_ = ExactComparison(instance)
    ks = None
    if k_max is not None:
        ks = np.arange(int(k_max) + 1, dtype=np.int64)
    arrs = evaluate_arrays(cmp_.instance, ids, ks=ks, kappa=kappa, ds=ds, comparison=cmp_)
    out = []
    for a in arrs:
        out.extend(a.certificates())
    out.sort(key=lambda c: (c.id, -1 if c.k is None else c.k, c.d or 0))
    return out


def violations(certs: Iterable[BoundCertificate], slack: float = SLACK,
               include_reported: bool = False) -> list:
    return [c for c in certs if c.is_violation(slack) and (include_reported or not c.reported_only)]


__all__ = [
    "BoundCertificate", "CertArrays", "HRInterval", "REGISTRY", "SLACK", "KAPPA_GRID",
    "C_HALF_LITERAL", "certificate_ids", "evaluate_certificate", "evaluate_arrays",
    "verify_instance", "violations", "hr_iid_interval", "prop34_constant",
    "lyapunov_ratio", "resolve_kappa",
]
