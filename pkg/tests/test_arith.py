import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mobius_sums import arith
from mobius_sums.config import Budget, BudgetExceeded, NotSquarefree


def trial_division(n):
    """Independent oracle: plain trial division by every integer."""
    out = []
    p = 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        if e:
            out.append((p, e))
        p += 1
    if n > 1:
        out.append((n, 1))
    return out


def brute_mobius(n):
    fac = trial_division(n)
    return 0 if any(e > 1 for _, e in fac) else (-1) ** len(fac)


# ---------------------------------------------------------------- tables


def test_table_mu_first_ten():
    t = arith.build_factor_table(1, 10)
    assert t.mu.tolist() == [1, -1, -1, 0, -1, 1, -1, 0, 0, 1]


def test_table_single_entry_at_one():
    t = arith.build_factor_table(1, 1)
    assert t.mobius(1) == 1
    assert t.spf.tolist() == [0]


def test_table_far_from_origin_matches_trial_division():
    lo, hi = 10**8 - 10, 10**8
    t = arith.build_factor_table(lo, hi)
    for n in range(lo, hi + 1):
        fac = trial_division(n)
        assert t.mobius(n) == brute_mobius(n)
        assert t.spf[n - lo] == fac[0][0]
        assert arith.factorize(n, t) == fac


def test_table_invariants_small_blocks():
    # tiny blocks force many segment boundaries
    t = arith.build_factor_table(2, 5000, Budget(block_size=97))
    for n in range(2, 5001):
        p = int(t.spf[n - 2])
        fac = trial_division(n)
        assert p == fac[0][0]
        assert t.mobius(n) == brute_mobius(n)


def test_table_errors():
    with pytest.raises(ValueError):
        arith.build_factor_table(5, 4)
    with pytest.raises(ValueError):
        arith.build_factor_table(0, 4)
    with pytest.raises(BudgetExceeded):
        arith.build_factor_table(1, 1000, Budget(max_table_entries=100))


def test_table_arrays_match_scalars():
    t = arith.build_factor_table(990, 1210)
    for n, k, ps, ph in zip(t.integers(), t.kernel_array(), t.psi_array(), t.phi_array()):
        assert k == arith.kernel(int(n))
        assert ps == arith.psi(int(n))
        assert ph == arith.phi(int(n))


def test_factorize_out_of_table_range():
    t = arith.build_factor_table(10, 20)
    with pytest.raises(ValueError):
        arith.factorize(21, t)


# ---------------------------------------------------------------- factorize


@pytest.mark.parametrize(
    "n, fac",
    [(12, [(2, 2), (3, 1)]), (1, []), (2310, [(2, 1), (3, 1), (5, 1), (7, 1), (11, 1)])],
)
def test_factorize_examples(n, fac):
    assert arith.factorize(n) == fac


@given(st.integers(1, 10**9))
def test_factorize_reconstructs(n):
    fac = arith.factorize(n)
    assert math.prod(p**e for p, e in fac) == n
    ps = [p for p, _ in fac]
    assert ps == sorted(set(ps))
    assert fac == trial_division(n) if n < 10**7 else True


def test_factorize_with_table_finishes_below_range():
    # 60 -> 30 drops below lo = 50, so trial division takes over
    t = arith.build_factor_table(50, 100)
    for n in range(50, 101):
        assert arith.factorize(n, t) == trial_division(n)


# ---------------------------------------------------------------- scalar functions


@pytest.mark.parametrize("n, k", [(12, 6), (1, 1), (360, 30)])
def test_kernel_examples(n, k):
    assert arith.kernel(n) == k


def test_psi_alpha_r_examples():
    assert arith.psi(12) == 12
    assert arith.psi(30) == 72
    assert arith.alpha(2, exact=True) == Fraction(9, 11)
    assert arith.alpha(2) == pytest.approx(9 / 11, rel=1e-15)
    assert arith.r(2) == pytest.approx(1 + 2 / math.sqrt(2), rel=1e-15)
    for fn in (arith.phi, arith.psi, arith.r, arith.alpha):
        assert fn(1) == 1


@pytest.mark.parametrize("n, m, v", [(6, 2, 4), (6, 1, 12), (4, 2, 1)])
def test_psi_m_examples(n, m, v):
    assert arith.psi_m(n, m) == v


@given(st.integers(1, 10**5), st.integers(1, 10**5))
def test_psi_m_coprime_reduces_to_psi(n, m):
    if math.gcd(n, m) == 1:
        assert arith.psi_m(n, m) == arith.psi(n)


def test_f_examples():
    assert arith.f(1, 0.3 + 7j) == 1.0
    assert arith.f(2, 0j) == 0.0
    assert arith.f(2, arith.ComplexPoint(0.0, math.pi / math.log(2))) == pytest.approx(4.0, abs=1e-14)


@given(st.integers(2, 10**4), st.floats(-50, 50))
def test_f_on_imaginary_axis(p_index, tau):
    p = int(arith.primes_upto(10**5)[p_index % 9592])
    assert arith.f(p, complex(0, tau)) == pytest.approx(2 - 2 * math.cos(tau * math.log(p)), abs=1e-12)


def test_f_vectorized_matches_scalar():
    taus = np.linspace(-5, 5, 11)
    arr = arith.f(30, 0.7 + 1j * taus)
    assert arr.shape == taus.shape
    for t, v in zip(taus, arr):
        assert v == pytest.approx(arith.f(30, complex(0.7, t)), rel=1e-14)


coprime_pairs = st.tuples(st.integers(1, 10**6), st.integers(1, 10**6)).filter(
    lambda ab: math.gcd(*ab) == 1
)


@given(coprime_pairs, st.floats(0.1, 2.0), st.floats(-20, 20))
def test_multiplicativity(ab, sigma, tau):
    a, b = ab
    assert arith.phi(a * b) == arith.phi(a) * arith.phi(b)
    assert arith.psi(a * b) == arith.psi(a) * arith.psi(b)
    assert arith.r(a * b) == pytest.approx(arith.r(a) * arith.r(b), rel=1e-13)
    assert arith.alpha(a * b) == pytest.approx(arith.alpha(a) * arith.alpha(b), rel=1e-13)
    assert arith.alpha(a * b, exact=True) == arith.alpha(a, exact=True) * arith.alpha(b, exact=True)
    s = complex(sigma, tau)
    assert arith.f(a * b, s) == pytest.approx(arith.f(a, s) * arith.f(b, s), rel=1e-10, abs=1e-13)


def test_strong_multiplicativity_upto_1e4():
    ker = arith.kernel_upto(10**4)
    psi = arith.psi_upto(10**4)
    for n in range(1, 10**4 + 1):
        k = int(ker[n])
        assert psi[n] == psi[k] == arith.psi(n)
    s = complex(0.4, 3.0)
    for n in range(1, 2001):
        k = int(ker[n])
        assert arith.f(n, s) == arith.f(k, s)
        assert arith.r(n) == arith.r(k)
        assert arith.alpha(n) == arith.alpha(k)


@given(st.integers(1, 10**9))
def test_kernel_properties(n):
    k = arith.kernel(n)
    assert arith.kernel(k) == k
    assert n % k == 0
    assert arith.is_squarefree(k)


def test_mobius_divisor_sum_vanishes():
    mu = arith.mobius_upto(10**4)
    total = np.zeros(10**4 + 1, dtype=np.int64)
    for d in range(1, 10**4 + 1):
        if mu[d]:
            total[d::d] += mu[d]
    assert total[1] == 1
    assert not total[2:].any()


def test_array_builders_match_scalars():
    n = 3000
    mu, psi, ker, phi, spf = (arith.mobius_upto(n), arith.psi_upto(n), arith.kernel_upto(n),
                              arith.phi_upto(n), arith.spf_upto(n))
    psim = arith.psi_m_upto(n, 30)
    for k in range(1, n + 1):
        assert mu[k] == brute_mobius(k)
        assert psi[k] == arith.psi(k)
        assert ker[k] == arith.kernel(k)
        assert phi[k] == arith.phi(k)
        if k > 1:
            assert spf[k] == trial_division(k)[0][0]
        if mu[k]:
            assert psim[k] == arith.psi_m(k, 30)


def test_primes_upto():
    assert arith.primes_upto(1).tolist() == []
    assert arith.primes_upto(30).tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert len(arith.primes_upto(10**6)) == 78498


# ---------------------------------------------------------------- squarefree counts


def brute_count(y, h):
    mu = arith.mobius_upto(y)
    k = np.arange(1, y + 1)
    return int(np.sum((mu[1:] != 0) & (np.gcd(k, h) == 1)))


def test_squarefree_count_examples():
    assert arith.squarefree_coprime_count(10, 1) == 7
    assert arith.squarefree_coprime_count(10, 2) == 4


@given(st.integers(1, 5000), st.sampled_from([1, 2, 3, 6, 10, 30, 77, 210, 2310]))
def test_squarefree_count_matches_sieve(y, h):
    assert arith.squarefree_coprime_count(y, h) == brute_count(y, h)


def test_squarefree_count_at_1e6():
    count = arith.squarefree_coprime_count(10**6, 30)
    assert count == brute_count(10**6, 30)
    main = 6 / math.pi**2 * 10**6 * 30 / 72
    assert abs(count - main) <= 5 * arith.r(30) * 10**3


def test_squarefree_count_rejects_non_squarefree():
    with pytest.raises(NotSquarefree):
        arith.squarefree_coprime_count(10, 4)


def test_squarefree_count_scaling():
    worst = 0.0
    for h in (1, 2, 3, 5, 6, 30, 210):
        for y in (10**3, 10**4, 10**5, 10**6, 10**7):
            count = arith.squarefree_coprime_count(y, h)
            main = 6 / math.pi**2 * y * h / arith.psi(h)
            worst = max(worst, abs(count - main) / (arith.r(h) * math.sqrt(y)))
    assert worst <= 5
