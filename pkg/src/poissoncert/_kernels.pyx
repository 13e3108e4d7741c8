# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Poisson-binomial convolution, Poisson log-pmf, divergence sums.

Same contracts as ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, expm1, fabs, INFINITY, logl, fabsl, acosl

cnp.import_array()

cdef double LOG_SQRT_2PI = 0.91893853320467274178

cdef double[16] SFERR
SFERR[:] = [
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
]

cdef double S0 = 1.0 / 12.0
cdef double S1 = 1.0 / 360.0
cdef double S2 = 1.0 / 1260.0
cdef double S3 = 1.0 / 1680.0
cdef double S4 = 1.0 / 1188.0


cdef inline double _stirlerr(double n) nogil:
    cdef double nn
    if n <= 15.0:
        return SFERR[<int>n]
    nn = n * n
    if n > 500.0:
        return (S0 - S1 / nn) / n
    if n > 80.0:
        return (S0 - (S1 - S2 / nn) / nn) / n
    if n > 35.0:
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    return (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n


cdef long double LOG_SQRT_2PI_L = 0.5 * logl(2.0 * acosl(<long double>-1.0))


# extended precision: x log(x/mu) can be far larger than the deviance itself
cdef inline long double _bd0(long double x, long double mu) nogil:
    cdef long double v, s, ej, s1
    cdef int j
    if fabsl(x - mu) < 0.1 * (x + mu):
        v = (x - mu) / (x + mu)
        s = (x - mu) * v
        ej = 2.0 * x * v
        v = v * v
        j = 1
        while True:
            ej = ej * v
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
    return x * logl(x / mu) + mu - x


def stirlerr(n):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(np.atleast_1d(n), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(a.shape[0])
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        out[i] = _stirlerr(a[i])
    return out


def bd0(x, mu):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m = np.ascontiguousarray(
        np.broadcast_to(np.asarray(mu, dtype=np.float64), (a.shape[0],)))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(a.shape[0])
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        out[i] = <double>_bd0(a[i], m[i])
    return out


def poisson_logpmf(double lam, ks):
    arr = np.asarray(ks, dtype=np.int64)
    shape = arr.shape
    cdef cnp.ndarray[cnp.int64_t, ndim=1] k = np.ascontiguousarray(arr.reshape(-1))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(k.shape[0])
    cdef Py_ssize_t i
    cdef long double x
    with nogil:
        for i in range(k.shape[0]):
            if k[i] == 0:
                out[i] = -lam
            else:
                x = <long double>k[i]
                out[i] = <double>(-<long double>_stirlerr(<double>x) - _bd0(x, lam)
                                  - LOG_SQRT_2PI_L - 0.5 * logl(x))
    return out.reshape(shape)


def pb_pmf(p):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = pa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.zeros(n + 1)
    cdef Py_ssize_t j, k
    cdef double pj, qj
    w[0] = 1.0
    with nogil:
        for j in range(n):
            pj = pa[j]
            qj = 1.0 - pj
            k = j + 1
            while k >= 1:
                w[k] = w[k] * qj + w[k - 1] * pj
                k -= 1
            w[0] = w[0] * qj
    return w


cdef inline double _h_series(double L) nogil:
    cdef double t = L * L / 2.0
    cdef double s = t, s1
    cdef int j = 2
    while True:
        j += 1
        t = t * L / j
        s1 = s + (j - 1) * t
        if s1 == s or j > 60:
            return s1
        s = s1


cdef inline void _neumaier(double* s, double* c, double x) nogil:
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def divergence_core(w, logv):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] la = np.ascontiguousarray(logv, dtype=np.float64)
    cdef Py_ssize_t n1 = wa.shape[0]
    cdef Py_ssize_t k
    cdef double tv_s = 0.0, tv_c = 0.0
    cdef double kl_s = 0.0, kl_c = 0.0
    cdef double ch_s = 0.0, ch_c = 0.0
    cdef double cs = 0.0, cc = 0.0
    cdef double kolm = 0.0, msup = 0.0
    cdef double wk, vk, d, ad, L, em, g
    with nogil:
        for k in range(n1):
            wk = wa[k]
            vk = exp(la[k])
            d = wk - vk
            ad = fabs(d)
            _neumaier(&tv_s, &tv_c, ad)
            if ad > msup:
                msup = ad
            if wk == 0.0:
                _neumaier(&kl_s, &kl_c, vk)
                _neumaier(&ch_s, &ch_c, vk)
            else:
                L = log(wk) - la[k]
                if fabs(L) <= 0.5:
                    _neumaier(&kl_s, &kl_c, vk * _h_series(L))
                else:
                    _neumaier(&kl_s, &kl_c, wk * (L - 1.0) + vk)
                if L < 709.0:
                    em = expm1(L)
                else:
                    em = INFINITY
                if la[k] > -700.0:
                    _neumaier(&ch_s, &ch_c, vk * em * em)
                else:
                    _neumaier(&ch_s, &ch_c, em * (wk - vk))
            if k < n1 - 1:
                _neumaier(&cs, &cc, d)
                g = fabs(cs + cc)
                if g > kolm:
                    kolm = g
    return (tv_s + tv_c, kl_s + kl_c, ch_s + ch_c, kolm, msup)
