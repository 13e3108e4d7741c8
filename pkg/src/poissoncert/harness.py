"""Seeded instance generation, corpus-wide certificate verification and sweeps.

Instances are drawn per regime so that each generated instance satisfies the
regime's defining predicate exactly; the predicate is re-checked after
generation.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, asdict
from typing import Iterable, Optional, Sequence

import numpy as np

from .bounds import (SLACK, CertArrays, certificate_ids, evaluate_arrays, hr_iid_interval,
                     lyapunov_ratio, resolve_kappa, REPORTED_ONLY)
from .distributions import BernoulliInstance
from .divergences import ExactComparison, kolmogorov_normal
from .errors import DomainError

KINDS = ("small_lambda", "half_capped", "kappa_capped", "iid", "sqrt_decay", "dominant")
N_MAX = 200

DEFAULT_COUNTS = {
    "small_lambda": 2000,
    "half_capped": 2200,
    "kappa_capped": 2200,
    "iid": 1700,
    "dominant": 1700,
    "sqrt_decay": 200,
}


@dataclass(frozen=True)
class Regime:
    """One instance recipe. Unset parameters are drawn from the seed."""

    kind: str
    n: Optional[int] = None
    seed: int = 0
    lam: Optional[float] = None
    kappa: Optional[float] = None
    p1: Optional[float] = None
    lam_max: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown regime kind {self.kind!r}; expected one of {KINDS}")
        if self.n is not None and int(self.n) < 1:
            raise DomainError("n must be >= 1")

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_json(cls, obj: dict) -> "Regime":
        return cls(**obj)


# ---------------------------------------------------------------- predicates


def regime_predicate(regime: Regime, inst: BernoulliInstance) -> bool:
    st = inst.stats
    kind = regime.kind
    if kind == "small_lambda":
        return st.lam <= (regime.lam_max if regime.lam_max is not None else 0.5)
    if kind == "half_capped":
        return st.max_p <= 0.5
    if kind == "kappa_capped":
        kappa = regime.kappa if regime.kappa is not None else 0.9
        return st.lam > 0 and st.lam2 <= kappa * st.lam
    if kind == "iid":
        return inst.is_iid
    if kind == "sqrt_decay":
        return all(p == 0.5 / math.sqrt(j + 1) for j, p in enumerate(inst.p))
    if kind == "dominant":
        return inst.p[0] == st.max_p
    return False


# ---------------------------------------------------------------- generation


def _rng(regime: Regime) -> np.random.Generator:
    return np.random.default_rng([int(regime.seed) & 0xFFFFFFFF, KINDS.index(regime.kind)])


def _log_uniform(rng, lo, hi) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _draw_n(rng, lo=1, hi=N_MAX) -> int:
    return int(min(hi, max(lo, round(_log_uniform(rng, lo, hi + 0.999)))))


def _waterfill(u: np.ndarray, total: float, cap: float) -> np.ndarray:
    """Scale u to sum ``total`` with entries capped at ``cap`` (needs total <= cap*len)."""
    p = u * (total / u.sum())
    for _ in range(200):
        over = p > cap
        if not over.any():
            break
        p[over] = cap
        free = ~over & (p > 0)
        rest = total - cap * over.sum()
        if not free.any() or rest <= 0:
            break
        p[free] *= rest / p[free].sum()
    return np.minimum(p, cap)


def _sparsify(rng, u: np.ndarray) -> np.ndarray:
    # a third of the draws get a block of exact zeros (padding structure)
    if u.size > 2 and rng.uniform() < 1.0 / 3.0:
        z = rng.uniform(size=u.size) < rng.uniform(0.1, 0.6)
        z[0] = False
        u = np.where(z, 0.0, u)
    return u


def gen_instance(regime: Regime) -> BernoulliInstance:
    """Deterministic in (kind, parameters, seed); asserts the regime predicate."""
    rng = _rng(regime)
    kind = regime.kind
    n = regime.n

    if kind == "iid":
        n = n if n is not None else _draw_n(rng)
        lam = regime.lam if regime.lam is not None else _log_uniform(rng, 0.01, min(0.95 * n, 40.0))
        if lam <= 0 or lam / n > 1.0:
            raise DomainError(f"iid regime needs 0 < lam/n <= 1 (lam={lam}, n={n})")
        p = np.full(n, lam / n)

    elif kind == "sqrt_decay":
        n = n if n is not None else _draw_n(rng)
        p = 0.5 / np.sqrt(np.arange(1, n + 1, dtype=np.float64))

    elif kind == "small_lambda":
        cap = regime.lam_max if regime.lam_max is not None else 0.5
        n = n if n is not None else _draw_n(rng)
        lam = regime.lam if regime.lam is not None else _log_uniform(rng, 1e-3, cap)
        if not 0 < lam <= cap:
            raise DomainError("small_lambda needs 0 < lam <= lam_max")
        u = _sparsify(rng, rng.uniform(size=n) ** rng.uniform(0.5, 4.0))
        p = u * (lam / u.sum())
        while p.sum() > cap:  # guard against one-ulp overshoot
            p = p * (1.0 - 1e-15)

    elif kind == "half_capped":
        lam = regime.lam if regime.lam is not None else float(rng.uniform(0.5, 8.0))
        lo = max(1, int(math.ceil(2.0 * lam)))
        n = n if n is not None else _draw_n(rng, lo, N_MAX)
        if lam > 0.5 * n:
            raise DomainError(f"half_capped needs lam <= n/2 (lam={lam}, n={n})")
        u = _sparsify(rng, rng.uniform(size=n) ** rng.uniform(0.5, 3.0))
        if np.count_nonzero(u) * 0.5 < lam:
            u = rng.uniform(size=n) + 1e-3
        p = _waterfill(u, lam, 0.5)

    elif kind == "kappa_capped":
        kappa = regime.kappa if regime.kappa is not None else float(rng.choice([0.5, 0.75, 0.9]))
        n = n if n is not None else _draw_n(rng, 4, N_MAX)
        u = _sparsify(rng, rng.uniform(size=n))
        p = u * kappa
        if p.sum() < 0.5:
            p = np.full(n, min(kappa, max(0.5 / n, p.max())))
        st_l = p.sum()
        st_l2 = float(np.dot(p, p))
        if st_l2 > kappa * st_l:
            p = p * (kappa * st_l / st_l2) * (1 - 1e-12)

    elif kind == "dominant":
        n = n if n is not None else _draw_n(rng, 1, N_MAX)
        p1 = regime.p1 if regime.p1 is not None else float(rng.uniform(0.3, 1.0))
        if not 0 <= p1 <= 1:
            raise DomainError("p1 must lie in [0, 1]")
        rest = rng.uniform(0.0, min(p1, rng.choice([0.01, 0.05, 0.2])), size=n - 1)
        p = np.concatenate(([p1], rest))

    inst = BernoulliInstance(tuple(float(x) for x in p))
    if not regime_predicate(regime, inst):
        raise AssertionError(f"generated instance violates the {kind} predicate")
    return inst


def default_corpus(seed: int = 42, counts: Optional[dict] = None) -> list:
    """The standard 10^4-instance verification corpus (n <= 200)."""
    counts = counts or DEFAULT_COUNTS
    out = []
    for kind in KINDS:
        for i in range(counts.get(kind, 0)):
            if kind == "sqrt_decay":
                out.append(Regime(kind, n=1 + (i % N_MAX), seed=seed * 1000003 + i))
            else:
                out.append(Regime(kind, seed=seed * 1000003 + i))
    return out


# ---------------------------------------------------------------- verification


@dataclass
class CertSummary:
    id: str
    evaluations: int = 0
    applicable: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    worst_rel_margin: float = math.inf
    worst_instance: Optional[int] = None
    worst_k: Optional[int] = None
    reported_only: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("worst_margin", "worst_rel_margin"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d


@dataclass
class VerificationReport:
    n_instances: int
    slack: float
    summaries: dict
    violations: list
    reported: list
    chi2_scaled_sup: dict
    seconds: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "slack": self.slack,
            "ok": self.ok,
            "summaries": [self.summaries[k].to_json() for k in sorted(self.summaries)],
            "violations": self.violations,
            "reported": self.reported,
            "chi2_scaled_sup": self.chi2_scaled_sup,
            "seconds": self.seconds,
        }


def _verify_one(args):
    idx, regime, ids, slack = args
    inst = gen_instance(regime)
    cmp_ = ExactComparison(inst)
    arrs = evaluate_arrays(inst, ids, comparison=cmp_)
    st = inst.stats
    chi_scaled = None
    if st.lam > 0 and st.lam2 > 0:
        chi_scaled = cmp_.chi2 * (st.lam / st.lam2) ** 2
    rows = []
    for a in arrs:
        app = a.applicable
        napp = int(app.sum())
        bad = a.violations(slack)
        # rows where bound and actual both underflow to 0 carry no information
        live = app & (np.maximum(np.abs(a.bound), np.abs(a.actual)) > 0)
        if live.any():
            scale = np.maximum(np.maximum(np.abs(a.bound), np.abs(a.actual)), 1e-300)
            rel = np.where(live, a.margin / scale, np.inf)
            j = int(np.argmin(rel))
            worst = (float(a.margin[j]), float(rel[j]), int(a.ks[j]))
        else:
            worst = None
        viol = []
        for j in np.flatnonzero(bad):
            viol.append({
                "instance": idx, "regime": regime.to_json(), "id": a.id,
                "k": int(a.ks[j]) if a.per_k or a.ks[j] >= 0 else None,
                "d": a.d, "kappa": a.kappa,
                "bound": float(a.bound[j]), "actual": float(a.actual[j]),
                "margin": float(a.margin[j]), "flags": list(a.flags),
            })
        rows.append((a.id, a.ks.size, napp, a.reported_only, worst, viol))
    return idx, rows, (st.lam, st.lam2, st.max_p, chi_scaled)


def run_verification(regimes: Optional[Sequence[Regime]] = None, ids: Optional[Iterable[str]] = None,
                     slack: float = SLACK, workers: Optional[int] = None,
                     seed: int = 42) -> VerificationReport:
    """Verify every requested certificate on every instance of the corpus.

    The report keeps per-certificate counts and worst margins plus the full
    list of violations; reported-only certificates are tallied separately and
    never count as violations.
    """
    t0 = time.perf_counter()
    if regimes is None:
        regimes = default_corpus(seed)
    ids = list(ids) if ids is not None else certificate_ids()
    jobs = [(i, r, ids, slack) for i, r in enumerate(regimes)]
    if workers and workers > 1:
        from multiprocessing import Pool
        with Pool(workers) as pool:
            results = pool.map(_verify_one, jobs, chunksize=64)
    else:
        results = [_verify_one(j) for j in jobs]
    results.sort(key=lambda t: t[0])

    summaries = {}
    violations, reported = [], []
    chi_small = 0.0
    chi_large = 0.0
    for idx, rows, (lam, lam2, max_p, chi_scaled) in results:
        if chi_scaled is not None and max_p <= 0.5:
            if lam <= 0.5:
                chi_small = max(chi_small, chi_scaled)
            elif lam2 <= 0.5 * lam:
                chi_large = max(chi_large, chi_scaled)
        for cid, nev, napp, rep_only, worst, viol in rows:
            s = summaries.setdefault(cid, CertSummary(cid))
            s.evaluations += nev
            s.applicable += napp
            if worst is not None and worst[1] < s.worst_rel_margin:
                s.worst_margin, s.worst_rel_margin, s.worst_k = worst
                s.worst_instance = idx
            for v in viol:
                if rep_only or REPORTED_ONLY in v["flags"]:
                    s.reported_only += 1
                    reported.append(v)
                else:
                    s.violations += 1
                    violations.append(v)
    key = lambda v: (v["instance"], v["id"], -1 if v["k"] is None else v["k"], v["d"] or 0)
    violations.sort(key=key)
    reported.sort(key=key)
    return VerificationReport(
        n_instances=len(regimes), slack=slack, summaries=summaries,
        violations=violations, reported=reported,
        chi2_scaled_sup={"lam_le_half": chi_small, "lam_gt_half_lam2_le_half_lam": chi_large},
        seconds=time.perf_counter() - t0,
    )


def chi2_scaled_sup(regimes: Sequence[Regime], *, lam_max: float = 0.5) -> float:
    """sup of chi^2 (lambda/lambda_2)^2 over corpus instances with lambda <= lam_max, max p <= 1/2."""
    best = 0.0
    for r in regimes:
        inst = gen_instance(r)
        st = inst.stats
        if 0 < st.lam <= lam_max and st.max_p <= 0.5:
            c = ExactComparison(inst)
            best = max(best, c.chi2 * (st.lam / st.lam2) ** 2)
    return best


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepTable:
    name: str
    parameter: str
    columns: list
    rows: list
    definitions: dict
    checks: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.rows]

    def to_json(self) -> dict:
        return {
            "name": self.name, "parameter": self.parameter, "columns": self.columns,
            "rows": [{c: _jsonable(r.get(c)) for c in self.columns} for r in self.rows],
            "definitions": self.definitions, "checks": self.checks,
        }


def sweep_iid_rate(lam: float, n_list: Sequence[int]) -> SweepTable:
    """Exact D for p_j = lam/n against the i.i.d. interval and the lam^2/(4n^2) rate."""
    lam = float(lam)
    ns = sorted(int(n) for n in n_list)
    if not ns or lam <= 0 or lam / ns[0] > 1.0:
        raise DomainError("sweep_iid_rate needs lam > 0 and lam/n <= 1 for every n")
    rows = []
    for n in ns:
        p = lam / n
        inst = BernoulliInstance((p,) * n)
        d = ExactComparison(inst).kl
        row = {"n": n, "p": p, "lam": lam, "D": d, "ratio": 4.0 * n * n * d / (lam * lam)}
        row["ratio_dev"] = abs(row["ratio"] - 1.0)
        if p < 1.0:
            iv = hr_iid_interval(p, n)
            row.update(hr_lower=iv.lower, hr_upper=iv.upper, hr_lower_clamped=iv.clamped,
                       in_hr_interval=iv.lower <= d <= iv.upper, hr_applicable=True)
        else:
            row.update(hr_lower=None, hr_upper=None, hr_lower_clamped=None,
                       in_hr_interval=None, hr_applicable=False)
        rows.append(row)
    doubling = [i for i in range(1, len(ns)) if ns[i] == 2 * ns[i - 1]]
    mono = all(rows[i]["ratio_dev"] <= rows[i - 1]["ratio_dev"] for i in doubling)
    in_iv = [r["in_hr_interval"] for r in rows if r["hr_applicable"]]
    cols = ["n", "p", "lam", "D", "hr_lower", "hr_upper", "in_hr_interval", "hr_lower_clamped",
            "hr_applicable", "ratio", "ratio_dev"]
    return SweepTable(
        name="iid-rate", parameter="n", columns=cols, rows=rows,
        definitions={
            "D": "relative entropy D(W||Z) in nats, p_j = lam/n",
            "hr_lower": "(-log(1-p)-p)/2 - 14 p^2/(n (1-p)^3), clamped at 0",
            "hr_upper": "(-log(1-p)-p)/2 - (1+p) p^2/(4 n (1-p)^3)",
            "ratio": "4 n^2 D / lam^2",
            "ratio_dev": "|4 n^2 D / lam^2 - 1|",
        },
        checks={"all_in_hr_interval": all(in_iv) if in_iv else None,
                "ratio_dev_nonincreasing_on_doubling": mono},
    )


def sweep_normal_comparison(n_list: Sequence[int]) -> SweepTable:
    """p_j = 1/(2 sqrt j): exact M, K, D against the density bound and normal reference curves."""
    ns = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError("n_list must be increasing")
    rows = []
    sqrt2e = math.sqrt(2.0 * math.e) * math.pi ** 2 / 3.0
    for n in ns:
        inst = gen_instance(Regime("sqrt_decay", n=n))
        st = inst.stats
        c = ExactComparison(inst)
        applicable = st.lam2 <= 0.5 * st.lam
        b72 = sqrt2e * st.lam2 / st.lam ** 1.5 if applicable else None
        l3 = lyapunov_ratio(inst)
        logn = math.log(n) if n > 1 else math.nan
        rows.append({
            "n": n, "lam": st.lam, "lam2": st.lam2, "kappa_eff": st.kappa_eff,
            "M": c.sup_density, "K": c.kolmogorov, "D": c.kl,
            "thm71_simple": b72, "thm71_simple_applicable": applicable,
            "inv_sqrt_lam": 1.0 / math.sqrt(st.lam),
            "L3": l3, "be_ref": 0.56 * l3,
            "K_normal": kolmogorov_normal(inst, variance="lambda"),
            "M_scaled": c.sup_density * n ** 0.75 / logn if n > 1 else None,
            "D_scaled": c.kl * n / logn ** 2 if n > 1 else None,
            "bound_vs_normal": b72 * math.sqrt(st.lam) if applicable else None,
        })
    cols = ["n", "lam", "lam2", "kappa_eff", "M", "K", "D", "thm71_simple",
            "thm71_simple_applicable", "inv_sqrt_lam", "L3", "be_ref", "K_normal",
            "M_scaled", "D_scaled", "bound_vs_normal"]
    return SweepTable(
        name="normal-comparison", parameter="n", columns=cols, rows=rows,
        definitions={
            "M": "sup_k |P{W=k} - P{Z=k}|",
            "K": "sup_k |P{W<=k} - P{Z<=k}|",
            "thm71_simple": "(sqrt(2e) pi^2/3) lam2 / lam^1.5, when lam2 <= lam/2",
            "inv_sqrt_lam": "1/sqrt(lam), normal-approximation scale",
            "L3": "sum (p^2+q^2) p q / (lam - lam2)^1.5",
            "be_ref": "0.56 * L3",
            "K_normal": "sup_x |P{W<=x} - Phi((x-lam)/sqrt(lam))|, no continuity correction",
            "M_scaled": "M * n^(3/4) / log n",
            "D_scaled": "D * n / (log n)^2",
            "bound_vs_normal": "thm71_simple / (1/sqrt(lam))",
        },
    )


# ---------------------------------------------------------------- output


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, (np.integer,)):
        v = int(v)
    if isinstance(v, (np.bool_,)):
        v = bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _jsonable(obj)


def _csv_cell(v) -> str:
    v = _jsonable(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_report(obj, fmt: str) -> str:
    """Text for a SweepTable, VerificationReport or list of certificates.

    Formats: ``json`` (one document), ``jsonl`` (one record per line) and ``csv``.
    Floats use the shortest round-trip representation.
    """
    from .bounds import BoundCertificate
    if fmt not in ("json", "jsonl", "csv"):
        raise ValueError(f"unknown report format {fmt!r}; use json, jsonl or csv")
    if isinstance(obj, SweepTable):
        if fmt == "json":
            return json.dumps(_clean(obj.to_json()), sort_keys=False) + "\n"
        if fmt == "jsonl":
            return "".join(json.dumps(_clean({c: r.get(c) for c in obj.columns})) + "\n"
                           for r in obj.rows)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(obj.columns)
        for r in obj.rows:
            w.writerow([_csv_cell(r.get(c)) for c in obj.columns])
        return buf.getvalue()
    if isinstance(obj, VerificationReport):
        if fmt == "json":
            return json.dumps(_clean(obj.to_json())) + "\n"
        if fmt == "jsonl":
            lines = [json.dumps(_clean({"record": "summary", **obj.summaries[k].to_json()}))
                     for k in sorted(obj.summaries)]
            lines += [json.dumps(_clean({"record": "violation", **v})) for v in obj.violations]
            lines += [json.dumps(_clean({"record": "reported", **v})) for v in obj.reported]
            return "".join(line + "\n" for line in lines)
        cols = ["id", "evaluations", "applicable", "violations", "reported_only",
                "worst_margin", "worst_rel_margin", "worst_instance", "worst_k"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for k in sorted(obj.summaries):
            d = obj.summaries[k].to_json()
            w.writerow([_csv_cell(d[c]) for c in cols])
        return buf.getvalue()
    if isinstance(obj, (list, tuple)) and all(isinstance(c, BoundCertificate) for c in obj):
        if fmt in ("json",):
            return json.dumps(_clean([c.to_dict() for c in obj])) + "\n"
        if fmt == "jsonl":
            return "".join(json.dumps(_clean(c.to_dict())) + "\n" for c in obj)
        cols = ["id", "k", "kappa", "d", "target", "direction", "applicable", "bound",
                "actual", "margin", "flags"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for c in obj:
            d = c.to_dict()
            d["flags"] = ";".join(d["flags"])
            w.writerow([_csv_cell(d[k]) for k in cols])
        return buf.getvalue()
    raise TypeError(f"cannot render {type(obj).__name__}")


def emit_report(obj, fmt: str, destination=None) -> None:
    """Write a report to a path, a text stream, or stdout when destination is None."""
    text = render_report(obj, fmt)
    if destination is None:
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


__all__ = [
    "Regime", "KINDS", "DEFAULT_COUNTS", "gen_instance", "regime_predicate", "default_corpus",
    "run_verification", "VerificationReport", "CertSummary", "chi2_scaled_sup",
    "SweepTable", "sweep_iid_rate", "sweep_normal_comparison", "emit_report", "render_report",
]
