"""Compare the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--json]
"""
import argparse
import json
import sys
import timeit

import numpy as np

from poissoncert import _kernels_py as pure

try:
    from poissoncert import _kernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    out = []
    for n in (16, 200, 2000):
        p = rng.uniform(0, 0.5, n)
        out.append((f"pb_pmf n={n}", "pb_pmf", (p,)))
    for lam, m in ((5.0, 100), (1e3, 5000), (1e6, 20000)):
        ks = np.arange(max(0, int(lam) - m // 2), int(lam) + m // 2, dtype=np.float64)
        out.append((f"poisson_logpmf lam={lam:g} m={m}", "poisson_logpmf", (lam, ks)))
    for n in (200, 2000):
        p = rng.uniform(0, 0.5, n)
        w = pure.pb_pmf(p)
        ks = np.arange(w.size, dtype=np.float64)
        logv = pure.poisson_logpmf(float(p.sum()), ks)
        out.append((f"divergence_core n={n}", "divergence_core", (w, logv)))
    return out


def bench(fn, args, repeat):
    t = timeit.Timer(lambda: fn(*args))
    number, _ = t.autorange()
    return min(t.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled kernels not built; run pip install -e . first", file=sys.stderr)
        return 1
    rows = []
    for label, name, fargs in cases(np.random.default_rng(0)):
        tc = bench(getattr(compiled, name), fargs, args.repeat)
        tp = bench(getattr(pure, name), fargs, args.repeat)
        # results must agree before timings mean anything
        a, b = getattr(compiled, name)(*fargs), getattr(pure, name)(*fargs)
        diff = float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
        rows.append({"case": label, "cython_s": tc, "python_s": tp, "speedup": tp / tc,
                     "max_abs_diff": diff})
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'case':<36} {'cython':>11} {'python':>11} {'speedup':>8} {'max|diff|':>10}")
        for r in rows:
            print(f"{r['case']:<36} {r['cython_s']:>10.3e}s {r['python_s']:>10.3e}s "
                  f"{r['speedup']:>7.1f}x {r['max_abs_diff']:>10.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
