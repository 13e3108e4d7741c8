"""Command-line interface.

Exit codes: 0 success, 1 usage or input error, 2 certificate violations,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .bounds import (REGISTRY, certificate_ids, evaluate_arrays, verify_instance, violations,
                     SLACK, resolve_kappa)
from .contour import ContourConfig, pb_pmf_via_dft
from .distributions import BernoulliInstance, pb_pmf, pb_stats, taylor_S_detail
from .divergences import ExactComparison, divergence_report, delta_sequence, default_k_max
from .errors import DomainError, InapplicableError, NumericalFailure
from .harness import (KINDS, DEFAULT_COUNTS, Regime, default_corpus, render_report, run_verification,
                      sweep_iid_rate, sweep_normal_comparison)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------- formatting


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _table(cols, rows) -> str:
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    for row in cells:
        lines.append("  ".join(x.ljust(w) for x, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _emit_rows(cols, rows, fmt, out) -> None:
    if fmt == "json":
        out.write(json.dumps([_jsonable({c: r.get(c) for c in cols}) for r in rows]) + "\n")
    elif fmt == "csv":
        import csv
        w = csv.writer(out, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow(["" if r.get(c) is None else _fmt(r.get(c)) for c in cols])
    else:
        out.write(_table(cols, rows))


def _emit_mapping(obj: dict, fmt, out) -> None:
    if fmt == "json":
        out.write(json.dumps(_jsonable(obj)) + "\n")
    elif fmt == "csv":
        import csv
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(obj))
        w.writerow(["" if v is None else _fmt(v) for v in obj.values()])
    else:
        width = max(len(k) for k in obj)
        for k, v in obj.items():
            out.write(f"{k.ljust(width)}  {_fmt(v)}\n")


# ---------------------------------------------------------------- inputs


def _load_instance(args) -> BernoulliInstance:
    if (args.p is None) == (args.file is None):
        raise UsageError("give exactly one of --p or --file")
    if args.p is not None:
        parts = [s.strip() for s in args.p.split(",") if s.strip()]
        if not parts:
            raise UsageError("--p needs at least one probability")
        try:
            vals = [float(s) for s in parts]
        except ValueError as exc:
            raise UsageError(f"--p: {exc}") from None
        return BernoulliInstance(tuple(vals))
    with open(args.file, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.file}: invalid JSON: {exc}") from None
    return BernoulliInstance.from_json(obj)


def _int_list(s: str) -> list:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {s!r}") from None


def _default_seed() -> int:
    env = os.environ.get("POISSONCERT_SEED")
    if env is None or env == "":
        return 42
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"POISSONCERT_SEED must be an integer, got {env!r}") from None


# ---------------------------------------------------------------- commands


def cmd_pmf(args, out) -> int:
    inst = _load_instance(args)
    w = pb_pmf(inst).weights
    cmp_ = ExactComparison(inst)
    v = np.exp(cmp_.logf(np.arange(inst.n + 1)))
    rows = [{"k": k, "w_k": float(w[k]), "v_k": float(v[k]), "delta": float(w[k] - v[k])}
            for k in range(inst.n + 1)]
    _emit_rows(["k", "w_k", "v_k", "delta"], rows, args.format, out)
    return EXIT_OK


def cmd_stats(args, out) -> int:
    inst = _load_instance(args)
    st = pb_stats(inst)
    d = {"n": st.n, "lam": st.lam, "lam2": st.lam2, "lam3": st.lam3, "variance": st.variance,
         "max_p": st.max_p, "kappa_eff": st.kappa_eff, "F": st.F}
    if st.max_p < 1.0:
        ts = taylor_S_detail(inst)
        d.update(S=ts.value, S_remainder_bound=ts.remainder_bound)
    else:
        d.update(S=None, S_remainder_bound=None)
    d["digest"] = inst.digest
    _emit_mapping(d, args.format, out)
    return EXIT_OK


def cmd_distances(args, out) -> int:
    inst = _load_instance(args)
    r = divergence_report(inst)
    d = {"n": r.n, "lam": r.lam, "tv": r.tv, "kl": r.kl, "chi2": r.chi2,
         "kolmogorov": r.kolmogorov, "sup_density": r.sup_density,
         "at_floor": ";".join(r.at_floor) if args.format != "json" else list(r.at_floor),
         "k_max": r.k_max, "digest": r.instance_digest}
    _emit_mapping(d, args.format, out)
    return EXIT_OK


def cmd_delta(args, out) -> int:
    inst = _load_instance(args)
    ds = delta_sequence(inst, args.k_max)
    rows = [{"k": k, "delta": float(x)} for k, x in enumerate(ds)]
    _emit_rows(["k", "delta"], rows, args.format, out)
    return EXIT_OK


def _parse_ids(s: Optional[str]) -> Optional[list]:
    if s is None:
        return None
    ids = [x.strip() for x in s.split(",") if x.strip()]
    bad = [i for i in ids if i not in REGISTRY]
    if bad:
        raise UsageError(f"unknown certificate id(s) {', '.join(bad)}; valid ids: "
                         + ", ".join(certificate_ids(include_opt_in=True)))
    return ids


def cmd_bounds(args, out) -> int:
    inst = _load_instance(args)
    ids = _parse_ids(args.ids)
    if args.kappa is not None and not 0 < args.kappa < 1:
        raise UsageError("--kappa must lie in (0, 1)")
    ds = tuple(_int_list(args.d)) if args.d else (1, 6)
    if args.k is not None:
        certs = verify_instance(inst, ids, args.slack, kappa=args.kappa, ds=ds, k_max=args.k)
        certs = [c for c in certs if not REGISTRY[c.id].per_k or c.k == args.k]
    else:
        certs = verify_instance(inst, ids, args.slack, kappa=args.kappa, ds=ds, k_max=args.k_max)
    if args.format == "table":
        cols = ["id", "k", "d", "kappa", "applicable", "bound", "actual", "margin", "flags"]
        rows = []
        for c in certs:
            d = c.to_dict()
            d["flags"] = ",".join(d["flags"])
            rows.append(d)
        out.write(_table(cols, rows))
    else:
        out.write(render_report(certs, args.format))
    return EXIT_VIOLATION if violations(certs, args.slack) else EXIT_OK


def cmd_verify(args, out) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.corpus == "default":
        counts = None
        if args.per_kind is not None:
            counts = {k: args.per_kind for k in DEFAULT_COUNTS}
        regimes = default_corpus(seed, counts)
    else:
        with open(args.corpus, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        items = cfg["regimes"] if isinstance(cfg, dict) else cfg
        regimes = [Regime.from_json(r) for r in items]
    ids = _parse_ids(args.ids)
    rep = run_verification(regimes, ids, slack=args.slack, workers=args.workers)
    fmt = args.format
    if fmt == "table":
        rows = [rep.summaries[k].to_json() for k in sorted(rep.summaries)]
        cols = ["id", "applicable", "violations", "reported_only", "worst_rel_margin"]
        text = _table(cols, rows)
        text += (f"instances {rep.n_instances}  violations {len(rep.violations)}  "
                 f"reported-only {len(rep.reported)}\n")
    else:
        text = render_report(rep, fmt)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_sweep(args, out) -> int:
    if args.kind == "iid-rate":
        table = sweep_iid_rate(args.lam, _int_list(args.n))
    else:
        table = sweep_normal_comparison(_int_list(args.n))
    fmt = args.format
    if fmt == "table":
        out.write(_table(table.columns, table.rows))
    else:
        out.write(render_report(table, fmt))
    return EXIT_OK


def cmd_contour_check(args, out) -> int:
    inst = _load_instance(args)
    cfg = ContourConfig(r=args.r, m=args.m, precision=args.precision)
    w_dft = pb_pmf_via_dft(inst, cfg).weights
    w_dp = pb_pmf(inst).weights
    diff = float(np.max(np.abs(w_dft - w_dp)))
    d = {"n": inst.n, "r": cfg.r, "m": cfg.points(inst.n), "max_abs_diff": diff,
         "tolerance": args.tol, "agree": diff <= args.tol}
    _emit_mapping(d, args.format, out)
    return EXIT_OK if diff <= args.tol else EXIT_NUMERIC


# ---------------------------------------------------------------- parser


def _add_instance(p):
    p.add_argument("--p", help="comma-separated probabilities, e.g. 0.1,0.2")
    p.add_argument("--file", help='JSON file {"p": [...]}; decimal strings accepted')


def _add_format(p, default="table", choices=("table", "json", "csv")):
    p.add_argument("--format", default=default, choices=choices)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="poissoncert",
                 description="Exact Poisson-binomial vs Poisson distances and bound certificates.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("pmf", help="exact law of W next to Poisson(lambda)")
    _add_instance(p); _add_format(p)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("stats", help="power sums and derived statistics")
    _add_instance(p); _add_format(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("distances", help="tv, kl, chi2, Kolmogorov and sup-density distances")
    _add_instance(p); _add_format(p)
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("delta", help="Delta_k = w_k - f(k)")
    _add_instance(p); _add_format(p)
    p.add_argument("--k-max", type=int, default=None)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("bounds", help="evaluate bound certificates on one instance")
    _add_instance(p); _add_format(p, choices=("table", "json", "jsonl", "csv"))
    p.add_argument("--ids", help="comma-separated certificate ids (default: all standard ones)")
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="evaluate per-k certificates at this k only")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--d", default=None, help="moment orders for TAIL_MOMENT, e.g. 1,6")
    p.add_argument("--slack", type=float, default=SLACK)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run certificates over a seeded corpus")
    p.add_argument("--corpus", default="default", help="'default' or a JSON regime list")
    p.add_argument("--seed", type=int, default=None, help="default: $POISSONCERT_SEED or 42")
    p.add_argument("--per-kind", type=int, default=None, help="instances per regime kind")
    p.add_argument("--ids", default=None)
    p.add_argument("--slack", type=float, default=SLACK)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", default=None)
    _add_format(p, choices=("table", "json", "jsonl", "csv"))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="rate and comparison experiments")
    p.add_argument("kind", choices=("iid-rate", "normal-comparison"))
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--n", required=True, help="comma-separated n values")
    _add_format(p, default="csv", choices=("table", "json", "jsonl", "csv"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("contour-check", help="compare DFT inversion with the direct convolution")
    _add_instance(p); _add_format(p)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--precision", default="auto", choices=("auto", "double", "mp"))
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_contour_check)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (UsageError, DomainError, InapplicableError) as exc:
        sys.stderr.write(f"poissoncert: error: {exc}\n")
        return EXIT_USAGE
    except NumericalFailure as exc:
        sys.stderr.write(f"poissoncert: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        sys.stderr.write(f"poissoncert: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
