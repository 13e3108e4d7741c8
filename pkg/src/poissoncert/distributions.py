"""Exact Poisson and Poisson-binomial laws, envelopes for Poisson probabilities,
and tail/moment tools.

Everything here is a pure function of its inputs. Poisson probabilities are
handled in log space and exponentiated last.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .errors import DomainError, InapplicableError, NumericalFailure

LOG_2PI = math.log(2.0 * math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)
BRUTEFORCE_MAX_N = 20
PMF_SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class InstanceStats:
    n: int
    lam: float
    lam2: float
    lam3: float
    variance: float
    max_p: float
    kappa_eff: Optional[float]
    F: float
    _p: np.ndarray = field(repr=False, compare=False)

    def power_sum(self, s: int) -> float:
        """lambda_s = sum_j p_j^s, accumulated largest term first with fsum."""
        if int(s) != s or s < 1:
            raise DomainError(f"power sum order must be an integer >= 1, got {s!r}")
        if s == 1:
            return self.lam
        terms = np.sort(self._p ** int(s))[::-1]
        return math.fsum(terms)


@dataclass(frozen=True)
class BernoulliInstance:
    """Success probabilities p_1..p_n of independent Bernoulli summands."""

    p: tuple

    def __post_init__(self):
        try:
            vals = tuple(float(x) for x in self.p)
        except (TypeError, ValueError) as exc:
            raise DomainError(f"probabilities must be real numbers: {exc}") from None
        if len(vals) < 1:
            raise DomainError("an instance needs at least one probability")
        for j, x in enumerate(vals):
            if not math.isfinite(x) or x < 0.0 or x > 1.0:
                raise DomainError(f"p[{j}] = {x!r} is outside [0, 1]")
        object.__setattr__(self, "p", vals)

    @classmethod
    def from_json(cls, obj) -> "BernoulliInstance":
        """Accepts a JSON string, a list of numbers, or a mapping with key ``"p"``.

        Decimal strings such as ``"0.1"`` are accepted as entries.
        """
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if isinstance(obj, dict):
            if "p" not in obj:
                raise DomainError('instance JSON object needs a "p" array')
            obj = obj["p"]
        if not isinstance(obj, (list, tuple)):
            raise DomainError("instance JSON must be an array of probabilities")
        return cls(tuple(obj))

    def to_json(self) -> dict:
        return {"p": list(self.p)}

    @property
    def n(self) -> int:
        return len(self.p)

    @cached_property
    def array(self) -> np.ndarray:
        return _readonly(self.p)

    @cached_property
    def stats(self) -> InstanceStats:
        return pb_stats(self)

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256()
        for x in self.p:
            h.update(float(x).hex().encode())
            h.update(b",")
        return h.hexdigest()[:16]

    @property
    def is_iid(self) -> bool:
        return all(x == self.p[0] for x in self.p)

    def __len__(self):
        return len(self.p)


def as_instance(obj) -> BernoulliInstance:
    if isinstance(obj, BernoulliInstance):
        return obj
    if isinstance(obj, np.ndarray):
        return BernoulliInstance(tuple(obj.tolist()))
    return BernoulliInstance(tuple(obj))


@dataclass(frozen=True, eq=False)
class Pmf:
    """Finite probability sequence over {0, 1, ..., len-1}."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("pmf weights must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("pmf weights must be finite and non-negative")
        total = math.fsum(w)
        if abs(total - 1.0) > PMF_SUM_TOL:
            raise NumericalFailure(f"pmf sums to {total!r}, not 1 within {PMF_SUM_TOL}")
        object.__setattr__(self, "weights", _readonly(w))

    def __len__(self):
        return self.weights.size

    def __getitem__(self, k):
        return self.weights[k]

    def __iter__(self):
        return iter(self.weights.tolist())

    def tolist(self) -> list:
        return self.weights.tolist()

    def mean(self) -> float:
        k = np.arange(self.weights.size, dtype=np.float64)
        return math.fsum(k * self.weights)

    def variance(self) -> float:
        k = np.arange(self.weights.size, dtype=np.float64)
        mu = self.mean()
        return math.fsum((k - mu) ** 2 * self.weights)

    def cdf(self) -> np.ndarray:
        return _readonly(np.cumsum(self.weights))


# ---------------------------------------------------------------- Poisson law


def _check_lam(lam) -> float:
    try:
        lam = float(lam)
    except (TypeError, ValueError):
        raise DomainError(f"lambda must be a real number, got {lam!r}") from None
    if not math.isfinite(lam) or lam <= 0.0:
        raise DomainError(f"lambda must be finite and > 0, got {lam!r}")
    return lam


def _check_k(k) -> np.ndarray:
    arr = np.asarray(k)
    if arr.dtype.kind not in "iu":
        if arr.dtype.kind != "f" or not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise DomainError(f"k must be integer valued, got {k!r}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise DomainError("k must be >= 0")
    return arr


def poisson_log_pmf(lam, k):
    """log P{Z = k} for Z ~ Poisson(lam).

    Evaluated with the saddle-point decomposition (Stirling error plus a
    cancellation-free deviance term), so that exp() of the result has relative
    error near machine precision far beyond the range where
    ``k log lam - lgamma(k+1) - lam`` is reliable.
    """
    lam = _check_lam(lam)
    ks = _check_k(k)
    out = kernels.poisson_logpmf(lam, ks.reshape(-1)).reshape(ks.shape)
    if out.ndim == 0:
        return float(out)
    return out


def poisson_pmf(lam, k):
    r = np.exp(poisson_log_pmf(lam, k))
    return float(r) if np.ndim(r) == 0 else r


def poisson_tail(lam, n: int, *, rel_stop: float = 1e-18, chunk: int = 256) -> float:
    """P{Z > n}, summed upward from f(n+1) until a geometric bound on the
    remainder drops below ``rel_stop`` times the running sum."""
    lam = _check_lam(lam)
    n = int(n)
    if n < 0:
        return 1.0
    terms = []
    k0 = n + 1
    while True:
        ks = np.arange(k0, k0 + chunk, dtype=np.int64)
        t = np.exp(kernels.poisson_logpmf(lam, ks))
        acc = math.fsum(terms) + np.cumsum(t)
        kf = ks.astype(np.float64)
        ratio = lam / (kf + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            rem = np.where(ratio < 1.0, t / (1.0 - ratio), np.inf)
        stop = (kf + 1.0 > lam) & ((rem <= rel_stop * acc) | (t == 0.0))
        idx = np.flatnonzero(stop)
        if idx.size:
            terms.extend(t[: idx[0] + 1].tolist())
            return math.fsum(terms)
        terms.extend(t.tolist())
        k0 += chunk


def poisson_interval(lam, a: int, b: int) -> float:
    """P{a <= Z <= b}; negative a is clamped to 0 and an empty range gives 0."""
    lam = _check_lam(lam)
    a = max(int(a), 0)
    b = int(b)
    if a > b:
        return 0.0
    ks = np.arange(a, b + 1, dtype=np.int64)
    return math.fsum(np.exp(kernels.poisson_logpmf(lam, ks)))


@dataclass(frozen=True)
class PoissonLaw:
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_lam(self.lam))

    def log_pmf(self, k):
        return poisson_log_pmf(self.lam, k)

    def pmf(self, k):
        return poisson_pmf(self.lam, k)

    def tail(self, n: int) -> float:
        return poisson_tail(self.lam, n)

    def interval(self, a: int, b: int) -> float:
        return poisson_interval(self.lam, a, b)

    @property
    def mean(self) -> float:
        return self.lam

    @property
    def variance(self) -> float:
        return self.lam


# ---------------------------------------------------------------- envelopes


def stirling_log_envelope(k: int) -> tuple:
    """Log of (sqrt(2 pi) k^(k+1/2) e^-k, e k^(k+1/2) e^-k); brackets log k!."""
    if int(k) != k or k < 1:
        raise DomainError(f"the Stirling envelope needs an integer k >= 1, got {k!r}")
    k = int(k)
    core = (k + 0.5) * math.log(k) - k
    return (0.5 * LOG_2PI + core, 1.0 + core)


def stirling_envelope(k: int) -> tuple:
    """(lower, upper) with lower <= k! <= upper; at k = 1 the upper bound is exactly 1."""
    lo, hi = stirling_log_envelope(k)
    return (math.exp(lo), math.exp(hi))


class GaussianEnvelope(NamedTuple):
    lower: Optional[float]
    upper: Optional[float]
    refined_lower: Optional[float]
    cap: float


def gaussian_envelope(lam, k: int) -> GaussianEnvelope:
    """Gaussian-shaped bounds on f(k) = P{Z = k}.

    ``cap`` = 1/sqrt(2 pi k) holds for every k >= 1. ``lower`` and ``upper`` are
    only given for 1 <= k <= 2 lam; ``refined_lower`` additionally needs k >= lam.
    Missing entries are None.
    """
    lam = _check_lam(lam)
    if int(k) != k or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k!r}")
    k = int(k)
    sk = math.sqrt(k)
    cap = 1.0 / (SQRT_2PI * sk)
    if k > 2.0 * lam:
        return GaussianEnvelope(None, None, None, cap)
    d2 = (k - lam) ** 2
    lower = math.exp(-d2 / lam - 1.0) / sk
    upper = math.exp(-d2 / (3.0 * lam)) / (SQRT_2PI * sk)
    refined = math.exp(-d2 / (2.0 * lam) - 1.0) / sk if k >= lam else None
    return GaussianEnvelope(lower, upper, refined, cap)


# ---------------------------------------------------------------- tails, moments


def _tail_moment_applicable(lam: float, k0: int, d: int) -> bool:
    # k0^d / (k0+1)^(d-1) > lam, in logs
    return d * math.log(k0) - (d - 1) * math.log(k0 + 1) > math.log(lam)


def poisson_tail_moment_bound(lam, k0: int, d: int) -> float:
    """Upper bound on sum_{k >= k0} k^d f(k) by a geometric majorant."""
    lam = _check_lam(lam)
    if int(k0) != k0 or k0 < 1 or int(d) != d or d < 1:
        raise DomainError("k0 and d must be integers >= 1")
    k0, d = int(k0), int(d)
    if not _tail_moment_applicable(lam, k0, d):
        raise InapplicableError(
            f"tail-moment bound needs k0^d/(k0+1)^(d-1) > lam (k0={k0}, d={d}, lam={lam})")
    q = (lam / k0) * ((k0 + 1) / k0) ** (d - 1)
    log_head = d * math.log(k0) + poisson_log_pmf(lam, k0)
    return math.exp(log_head) / (1.0 - q)


def poisson_tail_moment(lam, k0: int, d: int, *, rel_stop: float = 1e-18) -> float:
    """sum_{k >= k0} k^d f(k) by direct summation (oracle for the bound above)."""
    lam = _check_lam(lam)
    k0, d = int(k0), int(d)
    terms = []
    start = max(k0, 0)
    while True:
        ks = np.arange(start, start + 512, dtype=np.int64)
        kf = ks.astype(np.float64)
        with np.errstate(divide="ignore"):
            lt = d * np.log(kf) + kernels.poisson_logpmf(lam, ks)
        t = np.exp(lt)
        terms.extend(t.tolist())
        # successive ratio ((k+1)/k)^d lam/(k+1) < 1/2 guarantees a tail below the last term
        last = kf[-1]
        r = (lam / (last + 1.0)) * ((last + 1.0) / max(last, 1.0)) ** d
        if r < 0.5 and t[-1] <= rel_stop * math.fsum(terms):
            return math.fsum(terms)
        start += 512


class MomentFacts(NamedTuple):
    rising_bound: float
    central2: float
    central4: float


def poisson_moment_facts(lam, m: int = 1) -> MomentFacts:
    """E Z^m <= lam(lam+1)...(lam+m-1); Var Z = lam; E(Z-lam)^4 = lam(lam+3)."""
    lam = _check_lam(lam)
    if int(m) != m or m < 1:
        raise DomainError("m must be an integer >= 1")
    rising = math.prod(lam + i for i in range(int(m)))
    return MomentFacts(rising, lam, lam * (lam + 3.0))


# ---------------------------------------------------------------- Poisson-binomial


def pb_pmf(instance) -> Pmf:
    """Exact law of W = sum of the Bernoulli summands, by iterated convolution."""
    inst = as_instance(instance)
    w = kernels.pb_pmf(inst.array)
    return Pmf(w)


def pb_pmf_bruteforce(instance) -> Pmf:
    """Enumerate all 2^n outcome tuples and bucket their probabilities by the sum (n <= 20).

    Each tuple's probability is the plain product of p_j or q_j factors; each
    bucket is then summed exactly rounded with fsum.
    """
    inst = as_instance(instance)
    n = inst.n
    if n > BRUTEFORCE_MAX_N:
        raise DomainError(f"brute-force enumeration is limited to n <= {BRUTEFORCE_MAX_N}")
    p = np.array(inst.p, dtype=np.float64)
    q = 1.0 - p
    shifts = np.arange(n, dtype=np.int64)
    buckets = [[] for _ in range(n + 1)]
    total = 1 << n
    block = 1 << 14
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total), dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(bool)
        probs = np.ones(idx.size)
        for j in range(n):  # sequential product, same order for every tuple
            probs *= np.where(bits[:, j], p[j], q[j])
        counts = bits.sum(axis=1)
        for k in range(n + 1):
            sel = probs[counts == k]
            if sel.size:
                buckets[k].extend(sel.tolist())
    return Pmf(np.array([math.fsum(b) for b in buckets]))


def pb_stats(instance) -> InstanceStats:
    inst = as_instance(instance)
    p = np.array(inst.p, dtype=np.float64)
    desc = np.sort(p)[::-1]
    lam = math.fsum(desc)
    lam2 = math.fsum(desc * desc)
    lam3 = math.fsum(desc * desc * desc)
    var = math.fsum(desc * (1.0 - desc))
    kappa = lam2 / lam if lam > 0 else None
    F = max(1.0, lam) / max(1.0, var)
    return InstanceStats(
        n=inst.n, lam=lam, lam2=lam2, lam3=lam3, variance=var,
        max_p=float(desc[0]), kappa_eff=kappa, F=F, _p=_readonly(p),
    )


class TaylorS(NamedTuple):
    value: float
    remainder_bound: float
    s_max: int


def taylor_S_detail(instance, s_max: Optional[int] = None, *, tol: float = 1e-17) -> TaylorS:
    """S = sum_{s>=2} lambda_s / s truncated at s_max, with a bound on the rest.

    If s_max is omitted the smallest order whose remainder bound is at most
    ``tol`` times lambda_2 is used.
    """
    inst = as_instance(instance)
    st = inst.stats
    m = st.max_p
    if m >= 1.0:
        raise DomainError("the series for S diverges when some p_j = 1")
    if st.lam2 == 0.0:
        return TaylorS(0.0, 0.0, 2 if s_max is None else int(s_max))
    if s_max is None:
        if m == 0.0:
            s_max = 2
        else:
            # m^(s-1)/(1-m) <= tol
            need = math.log(tol * (1.0 - m)) / math.log(m) + 1.0
            s_max = max(2, int(math.ceil(need)))
    s_max = int(s_max)
    if s_max < 2:
        raise DomainError("s_max must be >= 2")
    desc = np.sort(np.asarray(inst.p, dtype=np.float64))[::-1]
    desc = desc[desc > 0]
    terms = []
    pw = desc * desc
    for s in range(2, s_max + 1):
        terms.extend((pw / s).tolist())
        pw = pw * desc
        if not pw.any():
            break
    value = math.fsum(terms)
    rem = m ** (s_max - 1) * st.lam2 / (1.0 - m)
    if m <= 0.5 and value > st.lam2 * (1.0 + 1e-12):
        raise NumericalFailure(f"S = {value!r} exceeds lambda_2 = {st.lam2!r} with max p <= 1/2")
    return TaylorS(value, rem, s_max)


def taylor_S(instance, s_max: Optional[int] = None) -> float:
    """S with prod_j (1 - p_j) = exp(-lam - S)."""
    return taylor_S_detail(instance, s_max).value


def log1m_plus(p: float) -> float:
    """-log(1-p) - p without cancellation for small p."""
    if p < 0.1:
        t = p * p
        s = 0.0
        k = 2
        pk = t
        while True:
            s1 = s + pk / k
            if s1 == s:
                return s1
            s = s1
            k += 1
            pk *= p
    return -math.log1p(-p) - p


__all__ = [
    "BernoulliInstance", "InstanceStats", "Pmf", "PoissonLaw", "GaussianEnvelope",
    "MomentFacts", "TaylorS", "as_instance", "poisson_log_pmf", "poisson_pmf",
    "poisson_tail", "poisson_interval", "stirling_envelope", "stirling_log_envelope",
    "gaussian_envelope", "poisson_tail_moment_bound", "poisson_tail_moment",
    "poisson_moment_facts", "pb_pmf", "pb_pmf_bruteforce", "pb_stats",
    "taylor_S", "taylor_S_detail", "log1m_plus",
]
