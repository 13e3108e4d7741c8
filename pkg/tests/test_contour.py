import cmath
import math

import numpy as np
import pytest

from poissoncert.contour import (
    ContourConfig, best_r_bound, bound_5_6, bound_5_6_k0_limit, g_eval, log_bound_5_6,
    pb_pmf_via_dft, phi_eval, psi, radius_grid, rho,
)
from poissoncert.distributions import InstanceStats, pb_pmf
from poissoncert.divergences import ExactComparison
from poissoncert.errors import DomainError, NumericalFailure
from poissoncert.harness import Regime, gen_instance

SQE = math.sqrt(math.e)


def fake_stats(lam, lam2):
    return InstanceStats(n=0, lam=lam, lam2=lam2, lam3=0.0, variance=lam - lam2, max_p=0.0,
                         kappa_eff=lam2 / lam, F=1.0, _p=np.zeros(0))


def thm71_value(lam, lam2):
    v = lam - lam2
    return SQE * math.pi ** 2 / 6 * lam2 * min(1.0, v ** -1.5 if v > 0 else 1.0)


def test_generating_function_examples():
    assert g_eval([0.5, 0.5], 1) == 1
    assert g_eval([0.3], -1) == pytest.approx(0.4, abs=1e-16)
    assert g_eval([0.1, 0.2], 0) == pytest.approx(0.72, abs=2e-16)
    assert phi_eval(1.0, 1) == 1
    assert phi_eval(1.0, 0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert phi_eval(2.0, 1j) == pytest.approx(cmath.exp(-2) * cmath.exp(2j), rel=1e-15)
    rng = np.random.default_rng(0)
    p = rng.uniform(0, 1, 300)
    assert abs(g_eval(p, 1.0) - 1) <= 1e-13
    with pytest.raises(DomainError):
        phi_eval(0.0, 1)


def test_dft_examples():
    w = pb_pmf_via_dft([0.1, 0.2], ContourConfig(r=1, m=4)).tolist()
    np.testing.assert_allclose(w, [0.72, 0.26, 0.02], atol=1e-15)
    w = pb_pmf_via_dft([0.5] * 8, ContourConfig(m=16)).tolist()
    np.testing.assert_allclose(w, [math.comb(8, k) / 256 for k in range(9)], atol=1e-15)
    rng = np.random.default_rng(1)
    p = rng.uniform(0, 1, 64)
    w = pb_pmf_via_dft(p, ContourConfig(r=1, m=128)).tolist()
    assert np.max(np.abs(np.array(w) - np.array(pb_pmf(p).tolist()))) <= 1e-10


def test_dft_default_points():
    assert ContourConfig().points(64) == 128
    assert ContourConfig().points(63) == 64
    assert ContourConfig(m=10).points(3) == 10


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_dft_matches_dp(r):
    rng = np.random.default_rng(int(r * 10))
    for _ in range(10):
        p = rng.uniform(0, 1, int(rng.integers(1, 65)))
        w = np.array(pb_pmf_via_dft(p, ContourConfig(r=r)).tolist())
        assert np.max(np.abs(w - np.array(pb_pmf(p).tolist()))) <= 1e-10


def test_radius_invariance():
    rng = np.random.default_rng(6)
    p = rng.uniform(0, 0.7, 40)
    ref = np.array(pb_pmf_via_dft(p, ContourConfig(r=1.0)).tolist())
    for r in (0.5, 0.7, 1.3, 2.0):
        w = np.array(pb_pmf_via_dft(p, ContourConfig(r=r)).tolist())
        assert np.max(np.abs(w - ref)) <= 1e-9


def test_dft_errors():
    with pytest.raises(DomainError):
        pb_pmf_via_dft([0.1, 0.2, 0.3], ContourConfig(m=3))
    with pytest.raises(DomainError):
        ContourConfig(r=0)
    with pytest.raises(DomainError):
        ContourConfig(r=-1.0)
    with pytest.raises(DomainError):
        ContourConfig(precision="quad")


def test_extreme_radius_needs_extended_precision():
    rng = np.random.default_rng(12)
    p = rng.uniform(0, 0.5, 64)
    dp = np.array(pb_pmf(p).tolist())
    cfg = dict(r=0.05)
    try:
        w = np.array(pb_pmf_via_dft(p, ContourConfig(precision="double", **cfg)).tolist())
        bad = np.max(np.abs(w - dp)) > 1e-10
    except NumericalFailure:
        bad = True
    assert bad
    w = np.array(pb_pmf_via_dft(p, ContourConfig(precision="auto", **cfg)).tolist())
    assert np.max(np.abs(w - dp)) <= 1e-12


def test_bound_at_r1_is_thm71():
    rng = np.random.default_rng(100)
    for _ in range(100):
        lam = float(np.exp(rng.uniform(math.log(0.01), math.log(100))))
        lam2 = lam * float(rng.uniform(0.001, 1.0))
        k = int(rng.integers(0, 200))
        got = bound_5_6(fake_stats(lam, lam2), k, 1.0)
        assert got == pytest.approx(thm71_value(lam, lam2), rel=1e-12)


def test_psi_at_k_over_lambda_is_rho():
    rng = np.random.default_rng(101)
    for _ in range(100):
        lam = float(np.exp(rng.uniform(math.log(0.01), math.log(100))))
        st = fake_stats(lam, lam * float(rng.uniform(0, 1)))
        k = int(rng.integers(1, 300))
        assert psi(st, k / lam) == pytest.approx(rho(st, k), rel=1e-12, abs=1e-300)
    with pytest.raises(DomainError):
        rho(fake_stats(1.0, 0.5), 0)


def test_k0_limit():
    st = fake_stats(2.0, 0.7)
    lim = bound_5_6_k0_limit(st)
    assert lim == pytest.approx(math.e * SQE / 2 * 0.7 * math.exp(-2), rel=1e-15)
    assert lim / (0.7 * math.exp(-2)) == pytest.approx(2.2408, abs=1e-4)
    assert lim < 3 * 0.7 * math.exp(-2)
    # approaching r -> 0 from the bound itself
    assert bound_5_6(st, 0, 1e-9) == pytest.approx(lim, rel=1e-6)


def test_bound_errors():
    st = fake_stats(1.0, 0.1)
    for r in (0.0, -1.0, math.inf):
        with pytest.raises(DomainError):
            bound_5_6(st, 1, r)
    with pytest.raises(DomainError):
        bound_5_6(st, -1, 1.0)
    assert bound_5_6(st, 0, 0.3) > 0


def test_rk_radius_below_nonunif_form():
    # the r = k/lambda value never exceeds the Stirling-step form of the non-uniform bound
    rng = np.random.default_rng(7)
    for _ in range(100):
        lam = float(rng.uniform(0.2, 50))
        lam2 = lam * float(rng.uniform(0.01, 0.9))
        st = fake_stats(lam, lam2)
        k = int(rng.integers(1, int(3 * lam) + 5))
        r = k / lam
        val = bound_5_6(st, k, r)
        rh = rho(st, k)
        f = math.exp(k * math.log(lam) - math.lgamma(k + 1) - lam)
        nonunif = 7 * math.sqrt(k) * ((k - lam) / lam) ** 2 * lam2 * min(1, rh ** -0.5 if rh else 1) * f \
            + 21 * k ** 1.5 * (lam2 / lam) * min(1, rh ** -1.5 if rh else 1) * f
        assert val <= nonunif * (1 + 1e-12)


def test_best_r_never_worse_than_special_radii():
    rng = np.random.default_rng(8)
    for _ in range(60):
        lam = float(np.exp(rng.uniform(math.log(0.05), math.log(60))))
        st = fake_stats(lam, lam * float(rng.uniform(0.01, 0.95)))
        k = int(rng.integers(0, int(3 * lam) + 10))
        r_star, val = best_r_bound(st, k)
        refs = [bound_5_6(st, k, 1.0)]
        refs.append(bound_5_6(st, k, k / lam) if k >= 1 else bound_5_6_k0_limit(st))
        for ref in refs:
            assert val <= ref * (1 + 1e-12)


def test_best_r_examples():
    st = fake_stats(5.0, 1.0)
    r0, v0 = best_r_bound(st, 0)
    assert v0 <= bound_5_6_k0_limit(st) * (1 + 1e-12)
    r5, v5 = best_r_bound(st, 5)
    assert v5 <= bound_5_6(st, 5, 1.0) * (1 + 1e-12)
    r15, v15 = best_r_bound(st, 15)
    assert 2.0 <= r15 <= 4.5
    assert v15 <= min(bound_5_6(st, 15, 1.0), bound_5_6(st, 15, 3.0)) * (1 + 1e-12)
    grid = radius_grid(st, 15)
    assert grid.size == 129 and grid[0] == pytest.approx(1e-6) and grid[-1] == pytest.approx(12.0)


def test_grid_bound_sound_on_corpus_subset():
    checked = 0
    for kind in ("small_lambda", "half_capped", "kappa_capped", "iid", "dominant"):
        for s in range(12):
            inst = gen_instance(Regime(kind, int(20 + 7 * s), 1000 + s))
            cmp_ = ExactComparison(inst)
            st = inst.stats
            if st.lam == 0:
                continue
            ks = np.arange(inst.n + 21)
            absd = np.abs(cmp_.delta(ks))
            for k in ks:
                lb = log_bound_5_6(st, float(k), radius_grid(st, int(k)))
                worst = np.exp(lb.min())
                assert worst >= absd[k] * (1 - 1e-9), (kind, s, k)
                checked += 1
    assert checked > 1000
