"""Independent extended-precision reference values (mpmath, exact rationals).

Nothing here imports the package under test.
"""

from fractions import Fraction

import mpmath


def rational_pb(p):
    """Exact Poisson-binomial weights for rational (or float) p via Fraction convolution."""
    w = [Fraction(1)]
    for x in p:
        x = Fraction(x)
        nw = [Fraction(0)] * (len(w) + 1)
        for k, a in enumerate(w):
            nw[k] += a * (1 - x)
            nw[k + 1] += a * x
        w = nw
    return w


def mp_distances(p, dps=50, tail_terms=None):
    """(tv, kl, chi2, K, M) as mpf values; p entries are converted exactly."""
    with mpmath.workdps(dps):
        w = [mpmath.mpf(a.numerator) / a.denominator for a in rational_pb(p)]
        lam = mpmath.fsum(mpmath.mpf(Fraction(x).numerator) / Fraction(x).denominator for x in p)
        n = len(p)
        if tail_terms is None:
            tail_terms = n + 60 + int(20 * mpmath.sqrt(lam + 1))
        v = []
        f = mpmath.exp(-lam)
        for k in range(tail_terms + 1):
            if k:
                f = f * lam / k
            v.append(f)
        tail = 1 - mpmath.fsum(v[: n + 1])
        tv = mpmath.fsum(abs(w[k] - v[k]) for k in range(n + 1)) + tail
        kl = mpmath.fsum(w[k] * mpmath.log(w[k] / v[k]) for k in range(n + 1) if w[k] > 0)
        chi2 = mpmath.fsum(w[k] ** 2 / v[k] for k in range(n + 1)) - 1
        cw = cv = mpmath.mpf(0)
        K = mpmath.mpf(0)
        for k in range(n + 1):
            cw += w[k]
            cv += v[k]
            K = max(K, abs(cw - cv))
        K = max(K, tail)
        M = max(max(abs(w[k] - v[k]) for k in range(n + 1)), max(v[n + 1:]))
        return tv, kl, chi2, K, M


def mp_iid_kl(p, n, dps=60):
    """D(Bin(n,p) || Poisson(np)) with the binomial weights evaluated in mpmath."""
    with mpmath.workdps(dps):
        p = mpmath.mpf(Fraction(p).numerator) / Fraction(p).denominator
        lam = n * p
        q = 1 - p
        terms = []
        for k in range(n + 1):
            lw = mpmath.log(mpmath.binomial(n, k)) + k * mpmath.log(p) + (n - k) * mpmath.log(q)
            lv = k * mpmath.log(lam) - mpmath.loggamma(k + 1) - lam
            terms.append(mpmath.exp(lw) * (lw - lv))
        return mpmath.fsum(terms)
