"""Pure numpy implementations of the numerical kernels.

This module mirrors ``_kernels.pyx`` function for function and is used when the
compiled extension is unavailable (or when ``POISSONCERT_PURE_PYTHON`` is set).
"""

import math

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LD = np.longdouble
LOG_SQRT_2PI_L = _LD(0.5) * np.log(_LD(2.0) * np.arccos(_LD(-1.0)))

# log(n!) - log(sqrt(2 pi n) (n/e)^n) for n = 0..15; index 0 is a placeholder.
SFERR = np.array([
    0.0,
    0.08106146679532725822,
    0.041340695955409294094,
    0.027677925684998339149,
    0.020790672103765093112,
    0.016644691189821192163,
    0.013876128823070747999,
    0.011896709945891770095,
    0.010411265261972096497,
    0.0092554621827127329177,
    0.0083305634333628712565,
    0.007573675487951840795,
    0.0069428401072095298657,
    0.0064089941880042070684,
    0.0059513701127588477356,
    0.005554733551962801371,
])

_S0 = 1.0 / 12.0
_S1 = 1.0 / 360.0
_S2 = 1.0 / 1260.0
_S3 = 1.0 / 1680.0
_S4 = 1.0 / 1188.0


def stirlerr(n):
    """Stirling-formula error log(n!) - log(sqrt(2 pi n) (n/e)^n) for integers n >= 1."""
    n = np.asarray(n, dtype=np.float64)
    out = np.empty_like(n)
    small = n <= 15
    out[small] = SFERR[n[small].astype(np.int64)]
    big = ~small
    x = n[big]
    nn = x * x
    r = np.where(
        x > 500, (_S0 - _S1 / nn) / x,
        np.where(
            x > 80, (_S0 - (_S1 - _S2 / nn) / nn) / x,
            np.where(
                x > 35, (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / x,
                (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / x,
            ),
        ),
    )
    out[big] = r
    return out


def bd0(x, mu):
    """Deviance term x log(x/mu) + mu - x, evaluated without cancellation."""
    return _bd0_ext(x, mu).astype(np.float64)


def _bd0_ext(x, mu):
    # extended precision: x log(x/mu) can be far larger than the deviance itself
    x = np.asarray(x, dtype=_LD)
    mu = np.broadcast_to(np.asarray(mu, dtype=_LD), x.shape)
    out = np.empty_like(x)
    close = np.abs(x - mu) < 0.1 * (x + mu)

    far = ~close
    xf = x[far]
    mf = mu[far]
    out[far] = xf * np.log(xf / mf) + mf - xf

    idx = np.nonzero(close)[0]
    if idx.size:
        xc = x[idx]
        mc = mu[idx]
        v = (xc - mc) / (xc + mc)
        s = (xc - mc) * v
        ej = 2.0 * xc * v
        v = v * v
        j = 1
        active = np.arange(idx.size)
        res = np.empty(idx.size, dtype=_LD)
        while active.size:
            ej[active] = ej[active] * v[active]
            s1 = s[active] + ej[active] / (2 * j + 1)
            done = s1 == s[active]
            res[active[done]] = s1[done]
            s[active] = s1
            active = active[~done]
            j += 1
        out[idx] = res
    return out


def poisson_logpmf(lam, ks):
    """log P{Z = k} for Z ~ Poisson(lam), lam > 0, integer ks >= 0 (saddle-point form)."""
    ks = np.asarray(ks, dtype=np.int64)
    out = np.empty(ks.shape, dtype=np.float64)
    zero = ks == 0
    out[zero] = -lam
    pos = ~zero
    if np.any(pos):
        kp = ks[pos].astype(np.float64)
        kl = kp.astype(_LD)
        tot = -stirlerr(kp).astype(_LD) - _bd0_ext(kl, lam) - LOG_SQRT_2PI_L - _LD(0.5) * np.log(kl)
        out[pos] = tot.astype(np.float64)
    return out


def pb_pmf(p):
    """Exact Poisson-binomial law by iterated convolution with each Bernoulli factor."""
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    w = np.zeros(n + 1)
    w[0] = 1.0
    for j in range(n):
        pj = p[j]
        qj = 1.0 - pj
        m = j + 1
        w[1:m + 1] = w[1:m + 1] * qj + w[0:m] * pj
        w[0] = w[0] * qj
    return w


def _h_series(L):
    # sum_{j>=2} (j-1) L^j / j!  ==  L e^L - (e^L - 1)
    t = L * L / 2.0
    s = t
    j = 2
    while True:
        j += 1
        t = t * L / j
        add = (j - 1) * t
        s1 = s + add
        if s1 == s or j > 60:
            return s1
        s = s1


def divergence_core(w, logv):
    """Head sums over k = 0..n of the five distances.

    Returns ``(tv, kl, chi2, kolmogorov, sup_density)`` where the first three are
    partial sums over k <= n (callers add the Poisson tail mass), ``kolmogorov``
    is the max CDF gap over k < n and ``sup_density`` the max |w_k - v_k| over k <= n.
    """
    w = np.asarray(w, dtype=np.float64)
    logv = np.asarray(logv, dtype=np.float64)
    n1 = w.size
    v = np.exp(logv)
    tv_terms = []
    kl_terms = []
    chi_terms = []
    kolm = 0.0
    msup = 0.0
    cs = 0.0
    cc = 0.0
    for k in range(n1):
        wk = float(w[k])
        vk = float(v[k])
        d = wk - vk
        ad = abs(d)
        tv_terms.append(ad)
        if ad > msup:
            msup = ad
        if wk == 0.0:
            kl_terms.append(vk)
            chi_terms.append(vk)
        else:
            L = math.log(wk) - float(logv[k])
            if abs(L) <= 0.5:
                kl_terms.append(vk * _h_series(L))
            else:
                kl_terms.append(wk * (L - 1.0) + vk)
            em = math.expm1(L) if L < 709.0 else math.inf
            if logv[k] > -700.0:
                chi_terms.append(vk * em * em)
            else:
                chi_terms.append(em * (wk - vk))
        if k < n1 - 1:
            t = cs + d
            if abs(cs) >= abs(d):
                cc += (cs - t) + d
            else:
                cc += (d - t) + cs
            cs = t
            g = abs(cs + cc)
            if g > kolm:
                kolm = g
    return (math.fsum(tv_terms), math.fsum(kl_terms), math.fsum(chi_terms), kolm, msup)
