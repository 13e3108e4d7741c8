import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import mp_distances, mp_iid_kl
from poissoncert.divergences import (
    ExactComparison, FLOOR, chi_squared, chi_squared_direct, default_k_max, delta_sequence,
    divergence_report, kolmogorov_distance, kolmogorov_normal, relative_entropy,
    sup_density_distance, total_variation,
)
from poissoncert.errors import DomainError

probs = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=40)


def closed_single(p):
    """Closed forms for one Bernoulli(p) against Poisson(p)."""
    q = 1 - p
    tv = 2 * p * (1 - math.exp(-p))
    kl = q * math.log(q) + p * q + p * p if p < 1 else 1.0
    chi2 = math.exp(p) * (1 - p + p * p) - 1
    return tv, kl, chi2


def test_delta_examples():
    d = delta_sequence([0.3], 2)
    assert d[0] == pytest.approx(0.7 - math.exp(-0.3), abs=1e-16)
    assert d[0] == pytest.approx(-0.0408182, abs=1e-7)
    assert d[1] == pytest.approx(0.0777545, abs=1e-7)
    assert d[2] == pytest.approx(-0.0333368, abs=1e-7)
    assert delta_sequence([0.1, 0.2], 0)[0] == pytest.approx(0.72 - math.exp(-0.3), abs=1e-15)
    assert delta_sequence([0.1, 0.2], 0)[0] == pytest.approx(-0.0208182, abs=1e-7)


def test_delta_beyond_support_and_default_length():
    d = delta_sequence([0.4, 0.6])
    assert len(d) == default_k_max(2, 1.0) + 1 == 2 + 10 + 10 + 1
    for k in range(3, len(d)):
        assert d[k] == pytest.approx(-math.exp(-1) / math.factorial(k), rel=1e-13)
    with pytest.raises(DomainError):
        delta_sequence([0.3], -1)


@pytest.mark.parametrize("p", [0.01, 0.1, 0.3, 0.5, 0.77, 1.0])
def test_single_bernoulli_closed_forms(p):
    tv, kl, chi2 = closed_single(p)
    assert total_variation([p]) == pytest.approx(tv, abs=1e-15)
    assert relative_entropy([p]) == pytest.approx(kl, rel=1e-13, abs=1e-16)
    assert chi_squared([p]) == pytest.approx(chi2, rel=1e-13, abs=1e-16)


def test_stated_single_values():
    assert total_variation([0.3]) == pytest.approx(0.1555091, abs=1e-7)
    assert total_variation([1.0]) == pytest.approx(1.2642411, abs=1e-7)
    assert relative_entropy([0.1]) == pytest.approx(0.0051755, abs=1e-7)
    assert chi_squared([0.1]) == pytest.approx(0.0057055, abs=1e-7)
    assert kolmogorov_distance([0.3]) == pytest.approx(0.0408182, abs=1e-7)
    assert sup_density_distance([0.3]) == pytest.approx(0.0777545, abs=1e-7)
    assert sup_density_distance([0.3]) <= 2 * kolmogorov_distance([0.3])
    assert sup_density_distance([0.3]) <= 0.09


def test_frozen_reference_values():
    # 50-digit values for the two-point instance (0.1, 0.2), frozen from the rational oracle
    tv, kl, chi2, K, M = (float(x) for x in mp_distances([0.1, 0.2]))
    assert total_variation([0.1, 0.2]) == pytest.approx(tv, rel=1e-13)
    assert relative_entropy([0.1, 0.2]) == pytest.approx(kl, rel=1e-12)
    assert chi_squared([0.1, 0.2]) == pytest.approx(chi2, rel=1e-12)
    assert kolmogorov_distance([0.1, 0.2]) == pytest.approx(K, rel=1e-13)
    assert sup_density_distance([0.1, 0.2]) == pytest.approx(M, rel=1e-13)


@pytest.mark.parametrize("seed", range(12))
def test_against_mpmath_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    p = rng.uniform(0, rng.choice([0.05, 0.3, 0.5, 1.0]), n).tolist()
    tv, kl, chi2, K, M = (float(x) for x in mp_distances(p))
    cmp_ = ExactComparison(p)
    assert abs(cmp_.tv - tv) <= 1e-12
    assert abs(cmp_.kl - kl) <= 1e-12 + 1e-12 * kl
    assert abs(cmp_.chi2 - chi2) <= 1e-12 + 1e-12 * chi2
    assert abs(cmp_.kolmogorov - K) <= 1e-13
    assert abs(cmp_.sup_density - M) <= 1e-13


def test_degenerate_all_zero():
    r = divergence_report([0.0, 0.0])
    assert (r.tv, r.kl, r.chi2, r.kolmogorov, r.sup_density) == (0.0,) * 5
    assert set(r.at_floor) == {"tv", "kl", "chi2", "kolmogorov", "sup_density"}
    assert delta_sequence([0.0]).tolist() == [0.0] * len(delta_sequence([0.0]))


def test_bh_equality_case():
    for lam in np.arange(1, 11) / 10:
        assert abs(total_variation([lam]) - 2 * lam * (1 - math.exp(-lam))) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(probs)
def test_distance_chain(p):
    c = ExactComparison(p)
    tv, kl, chi2, K, M = c.tv, c.kl, c.chi2, c.kolmogorov, c.sup_density
    tol = 1e-12
    assert 0 <= tv <= 2 + tol
    assert kl >= -tol and chi2 >= kl - tol * max(1, chi2)
    assert kl >= tv * tv / 2 - tol
    assert M <= 2 * K + tol
    assert K <= tv + tol


@settings(max_examples=100, deadline=None)
@given(probs, st.integers(1, 6), st.randoms(use_true_random=False))
def test_padding_and_permutation_invariance(p, extra, rnd):
    base = ExactComparison(p)
    q = list(p) + [0.0] * extra
    rnd.shuffle(q)
    other = ExactComparison(q)
    for name in ("tv", "kl", "chi2", "kolmogorov", "sup_density"):
        a, b = getattr(base, name), getattr(other, name)
        assert abs(a - b) <= 1e-14 * max(1.0, abs(a)), name


def test_iid_monotone_decrease():
    kls = [relative_entropy([1.0 / n] * n) for n in (25, 50, 100, 200, 400)]
    chis = [chi_squared([1.0 / n] * n) for n in (25, 50, 100, 200, 400)]
    assert all(a > b for a, b in zip(kls, kls[1:]))
    assert all(a > b for a, b in zip(chis, chis[1:]))


def test_chi_squared_direct_cross_check():
    rng = np.random.default_rng(4)
    for _ in range(40):
        p = rng.uniform(0, 0.6, int(rng.integers(1, 150)))
        a, b = chi_squared(p), chi_squared_direct(p)
        # the direct form cancels O(1) terms, so agreement is absolute near eps
        assert abs(a - b) <= 1e-13 * max(1.0, a)


def test_kl_small_values_are_accurate():
    # tiny divergences, where naive w log(w/v) summation cancels badly
    p = [1e-4] * 1000
    assert relative_entropy(p) == pytest.approx(float(mp_iid_kl(1e-4, 1000)), rel=1e-9)
    p = [0.002] * 30
    tv, kl, chi2, K, M = (float(x) for x in mp_distances(p))
    assert relative_entropy(p) == pytest.approx(kl, rel=1e-9)
    assert chi_squared(p) == pytest.approx(chi2, rel=1e-9)


def test_report_json_and_floor():
    r = divergence_report([0.3], k_max=5)
    j = r.to_json()
    assert j["k_max"] == 5 and len(j["deltas"]) == 6
    assert j["instance_digest"] == r.instance_digest
    assert j["at_floor"] == []
    # tv ~ 2p^2 = 1.8e-13 sits above the floor, kl ~ p^2/2 below it
    tiny = divergence_report([3e-7])
    assert "kl" in tiny.at_floor and "tv" not in tiny.at_floor
    assert FLOOR == 1e-13


def test_kolmogorov_normal_bounds_and_variants():
    p = [1 / (2 * math.sqrt(j)) for j in range(1, 257)]
    k_lam = kolmogorov_normal(p)
    k_var = kolmogorov_normal(p, variance="var")
    assert 0 < k_var < 1 and 0 < k_lam < 1 and k_var != k_lam
    assert math.isnan(kolmogorov_normal([0.0, 0.0]))
    with pytest.raises(DomainError):
        kolmogorov_normal(p, variance="other")
