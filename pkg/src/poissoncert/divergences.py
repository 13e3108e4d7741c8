"""Exact distances between the law of W and Poisson(lambda).

W has support {0..n}, so every distance splits into a finite head over k <= n
plus a closed-form contribution from the Poisson mass beyond n.

Conventions: ``tv`` is the l1 distance sum_k |w_k - v_k| (twice the
sup-over-events distance), ``kl`` is in nats.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import kernels
from .distributions import as_instance, pb_pmf, poisson_tail
from .errors import DomainError

FLOOR = 1e-13


class ExactComparison:
    """Aligned log-space data for P_W and P_lambda, shared by all distances."""

    def __init__(self, instance):
        self.instance = as_instance(instance)
        st = self.instance.stats
        self.n = self.instance.n
        self.lam = st.lam
        self.degenerate = st.lam == 0.0
        self.w = pb_pmf(self.instance).weights
        if self.degenerate:
            self.logv = np.full(self.n + 1, -np.inf)
            self.logv[0] = 0.0
            self.tail_n = 0.0
            self.f_next = 0.0
        else:
            self.logv = kernels.poisson_logpmf(self.lam, np.arange(self.n + 1, dtype=np.int64))
            self.tail_n = poisson_tail(self.lam, self.n)
            self.f_next = math.exp(float(kernels.poisson_logpmf(self.lam, np.array([self.n + 1]))[0]))

    @cached_property
    def core(self) -> tuple:
        if self.degenerate:
            return (0.0, 0.0, 0.0, 0.0, 0.0)
        return kernels.divergence_core(self.w, self.logv)

    def logf(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        if self.degenerate:
            return np.where(ks == 0, 0.0, -np.inf)
        return kernels.poisson_logpmf(self.lam, ks)

    def delta(self, ks) -> np.ndarray:
        ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
        wk = np.zeros(ks.shape)
        inside = ks <= self.n
        wk[inside] = self.w[ks[inside]]
        return wk - np.exp(self.logf(ks))

    @property
    def tv(self) -> float:
        return self.core[0] + self.tail_n

    @property
    def kl(self) -> float:
        return self.core[1] + self.tail_n

    @property
    def chi2(self) -> float:
        return self.core[2] + self.tail_n

    @property
    def kolmogorov(self) -> float:
        return max(self.core[3], self.tail_n)

    @property
    def sup_density(self) -> float:
        # lam <= n, so f is non-increasing on k >= n+1 and f(n+1) is the tail max
        return max(self.core[4], self.f_next)


def _comparison(instance) -> ExactComparison:
    if isinstance(instance, ExactComparison):
        return instance
    return ExactComparison(instance)


def default_k_max(n: int, lam: float) -> int:
    return int(n + math.ceil(10.0 * math.sqrt(lam)) + 10)


def delta_sequence(instance, k_max: Optional[int] = None) -> np.ndarray:
    """Delta_k = w_k - f(k) for k = 0..k_max (w_k = 0 beyond n)."""
    cmp_ = _comparison(instance)
    if k_max is None:
        k_max = default_k_max(cmp_.n, cmp_.lam)
    k_max = int(k_max)
    if k_max < 0:
        raise DomainError("k_max must be >= 0")
    return cmp_.delta(np.arange(k_max + 1))


def total_variation(instance) -> float:
    """sum_k |w_k - f(k)| over all k >= 0 (l1 convention, range [0, 2])."""
    return _comparison(instance).tv


def relative_entropy(instance) -> float:
    """D(W || Z) = sum_k w_k log(w_k / f(k)) in nats.

    Accumulated as sum_k v_k h(L_k) with L_k = log(w_k/v_k) and
    h(L) = L e^L - e^L + 1 >= 0, so each term is non-negative; the Poisson
    mass beyond n contributes exactly P{Z > n}.
    """
    return _comparison(instance).kl


def chi_squared(instance) -> float:
    """sum_k (w_k - f(k))^2 / f(k), accumulated as sum_k v_k expm1(L_k)^2."""
    return _comparison(instance).chi2


def chi_squared_direct(instance) -> float:
    """sum_k w_k^2 / f(k) - 1; cancellation-prone cross-check of chi_squared."""
    cmp_ = _comparison(instance)
    if cmp_.degenerate:
        return 0.0
    with np.errstate(over="ignore"):
        terms = np.exp(2.0 * np.log(np.where(cmp_.w > 0, cmp_.w, 1.0)) - cmp_.logv)
    terms = np.where(cmp_.w > 0, terms, 0.0)
    return math.fsum(np.append(terms, -1.0))


def kolmogorov_distance(instance) -> float:
    """sup_k |P{W <= k} - P{Z <= k}|."""
    return _comparison(instance).kolmogorov


def sup_density_distance(instance) -> float:
    """sup_k |w_k - f(k)|."""
    return _comparison(instance).sup_density


def _norm_cdf(x: np.ndarray) -> np.ndarray:
    from math import erfc, sqrt
    return np.array([0.5 * erfc(-t / sqrt(2.0)) for t in np.atleast_1d(x)])


def kolmogorov_normal(instance, variance: str = "lambda") -> float:
    """sup_x |P{W <= x} - Phi((x - lam)/sigma)|, no continuity correction.

    ``variance="lambda"`` compares with N(lam, lam); ``variance="var"`` with
    N(lam, Var W). Returns nan when the chosen variance is 0.
    """
    inst = as_instance(instance)
    st = inst.stats
    if variance == "lambda":
        s2 = st.lam
    elif variance == "var":
        s2 = st.variance
    else:
        raise DomainError(f"variance must be 'lambda' or 'var', got {variance!r}")
    if s2 <= 0.0:
        return math.nan
    sigma = math.sqrt(s2)
    w = pb_pmf(inst).weights
    cdf = np.cumsum(w)
    ks = np.arange(inst.n + 1, dtype=np.float64)
    phi = _norm_cdf((ks - st.lam) / sigma)
    left = np.concatenate(([0.0], cdf[:-1]))
    right_gap = np.abs(cdf - phi)
    left_gap = np.abs(left - phi)
    return float(max(right_gap.max(), left_gap.max(), 1.0 - phi[-1], phi[0]))


@dataclass(frozen=True)
class DivergenceReport:
    tv: float
    kl: float
    chi2: float
    kolmogorov: float
    sup_density: float
    deltas: tuple
    k_max: int
    lam: float
    n: int
    instance_digest: str
    at_floor: tuple

    def to_json(self) -> dict:
        d = asdict(self)
        d["deltas"] = list(self.deltas)
        d["at_floor"] = list(self.at_floor)
        return d


def divergence_report(instance, k_max: Optional[int] = None) -> DivergenceReport:
    cmp_ = _comparison(instance)
    if k_max is None:
        k_max = default_k_max(cmp_.n, cmp_.lam)
    vals = {
        "tv": cmp_.tv,
        "kl": cmp_.kl,
        "chi2": cmp_.chi2,
        "kolmogorov": cmp_.kolmogorov,
        "sup_density": cmp_.sup_density,
    }
    floor = tuple(k for k, v in vals.items() if abs(v) < FLOOR)
    return DivergenceReport(
        deltas=tuple(delta_sequence(cmp_, k_max).tolist()),
        k_max=int(k_max),
        lam=cmp_.lam,
        n=cmp_.n,
        instance_digest=cmp_.instance.digest,
        at_floor=floor,
        **vals,
    )


__all__ = [
    "ExactComparison", "DivergenceReport", "divergence_report", "default_k_max",
    "delta_sequence", "total_variation", "relative_entropy", "chi_squared",
    "chi_squared_direct", "kolmogorov_distance", "sup_density_distance",
    "kolmogorov_normal", "FLOOR",
]
