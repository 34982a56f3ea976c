import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mobius_sums import arith, engines
from mobius_sums.config import Budget, BudgetExceeded, NotSquarefree
from mobius_sums.constants import big_B

SIX = 6 / math.pi**2


# ---------------------------------------------------------------- independent oracles


def mu_brute(n):
    out, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            out = -out
        p += 1
    return -out if n > 1 else out


def psi_brute(n):
    """prod over primes p | n of (p + 1)."""
    out, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            out *= p + 1
            while n % p == 0:
                n //= p
        p += 1
    return out * (n + 1) if n > 1 else out


def M_brute(n, z):
    return sum(mu_brute(d) for d in range(1, min(n, z) + 1) if n % d == 0)


def S_brute(x, z):
    return sum(M_brute(n, z) ** 2 for n in range(1, x + 1))


def window_terms(y, m):
    """delta/psi(delta)^2 (sum_{d <= y/delta} mu(d delta)/psi_m(d))^2 for delta <= y coprime to m."""
    out = {}
    for delta in range(1, y + 1):
        if math.gcd(delta, m) != 1 or mu_brute(delta) == 0:
            continue
        inner = sum(Fraction(mu_brute(d * delta), arith.psi_m(d, m)) for d in range(1, y // delta + 1))
        out[delta] = Fraction(delta, psi_brute(delta) ** 2) * inner**2
    return out


# ---------------------------------------------------------------- S(x, z)

ENGINES = (engines.s_xz_direct, engines.s_xz_floor, engines.s_xz_kernel)


@pytest.mark.parametrize("engine", ENGINES)
def test_s_xz_examples(engine):
    assert engine(4, 2) == 2
    assert engine(1, 1) == 1
    assert engine(10, 1) == 10
    assert engine(1, 17) == 1
    assert engine(100, 10) == S_brute(100, 10)
    assert engine(500, 23) == S_brute(500, 23)


def test_engines_agree_on_full_grid():
    for x in range(1, 301):
        ref = [S_brute(x, z) for z in range(1, 301)] if x <= 60 else None
        for z in range(1, 301):
            a = engines.s_xz_direct(x, z)
            assert a == engines.s_xz_floor(x, z) == engines.s_xz_kernel(x, z), (x, z)
            if ref is not None:
                assert a == ref[z - 1]


def test_engines_agree_on_random_points():
    rng = random.Random(7)
    for _ in range(100):
        x = rng.randint(1, 10**5)
        z = rng.randint(1, x)
        a = engines.s_xz_direct(x, z)
        assert a == engines.s_xz_floor(x, z) == engines.s_xz_kernel(x, z), (x, z)


@given(st.integers(1, 10**4))
def test_trivial_bounds(x):
    assert engines.s_xz_direct(x, 1) == x
    assert engines.s_xz_direct(x, x) >= 1


def test_z_beyond_x_is_clamped():
    for engine in ENGINES:
        assert engine(50, 10**6) == engine(50, 50)


def test_direct_segments_do_not_change_the_value():
    small = Budget(block_size=101)
    for x, z in ((1000, 31), (2345, 400), (777, 777)):
        assert engines.s_xz_direct(x, z, small) == engines.s_xz_direct(x, z)


def test_s_xz_errors():
    for engine in ENGINES:
        with pytest.raises(ValueError):
            engine(0, 1)
        with pytest.raises(ValueError):
            engine(5, 0)
    with pytest.raises(BudgetExceeded):
        engines.s_xz_direct(1000, 10, Budget(max_direct_x=999))
    with pytest.raises(BudgetExceeded):
        engines.s_xz_floor(1000, 100, Budget(max_floor_z=99))
    with pytest.raises(BudgetExceeded):
        engines.s_xz_kernel(1000, 10, Budget(max_kernel_x=999))


def test_mean_value_envelope():
    # |S(x,z) - x S(z)| <= 2 z^2 wherever z^2 <= x, and S(x,z)/x stays below 3
    worst_ratio = 0.0
    worst_sup = 0.0
    for x in (10**3, 10**4, 10**5, 10**6):
        for z in (1, 2, 5, 10, 31, 100, 316, 1000):
            s = engines.s_xz_direct(x, z)
            worst_sup = max(worst_sup, s / x)
            if z * z <= x:
                worst_ratio = max(worst_ratio, abs(s - x * engines.s_z(z)) / z**2)
    assert worst_ratio <= 2
    assert worst_sup <= 3


# ---------------------------------------------------------------- S(z)


def test_s_z_examples():
    assert engines.s_z(1) == 1
    assert engines.s_z(1, exact=True) == 1
    assert engines.s_z(2, exact=True) == Fraction(1, 2)
    assert engines.s_z(3, exact=True) == Fraction(1, 2)
    assert engines.s_z_fast(1) == 1
    assert engines.s_z_fast(3) == pytest.approx(0.5, abs=1e-12)


def test_s_z_exact_matches_brute_rationals():
    for z in range(1, 31):
        ref = sum(
            Fraction(mu_brute(a) * mu_brute(b), math.lcm(a, b))
            for a in range(1, z + 1)
            for b in range(1, z + 1)
        )
        assert engines.s_z(z, exact=True) == ref


def test_s_z_engines_agree():
    for z in list(range(1, 60)) + [97, 256, 500, 999, 1000]:
        exact = float(engines.s_z(z, exact=True))
        assert engines.s_z(z) == pytest.approx(exact, rel=1e-12)
        assert engines.s_z_fast(z) == pytest.approx(exact, rel=1e-10)


def test_s_z_large():
    v = engines.s_z_fast(10**6)
    assert 0 < v < 2
    with pytest.raises(BudgetExceeded):
        engines.s_z(1001, exact=True)
    with pytest.raises(ValueError):
        engines.s_z_fast(0)


# ---------------------------------------------------------------- T(y; m)


def test_t_examples():
    assert engines.t_ym_naive(1, 1) == pytest.approx(SIX, rel=1e-15)
    assert engines.t_ym_naive(2, 1, exact=True) == Fraction(2, 3)
    assert engines.t_ym_naive(2, 1) == pytest.approx(4 / math.pi**2, rel=1e-14)
    assert engines.t_ym_rearranged(1, 1) == pytest.approx(SIX, rel=1e-15)
    assert engines.t_ym_rearranged(2, 1) == pytest.approx(4 / math.pi**2, abs=1e-14)
    assert engines.t_ym_naive(60, 6, exact=True) == engines.t_ym_rearranged(60, 6, exact=True)


def test_t_naive_exact_matches_brute():
    for y, m in ((7, 1), (12, 6), (10, 4), (15, 35)):
        ref = sum(
            Fraction(mu_brute(d) * mu_brute(t), psi_brute(math.lcm(d, t, m)))
            for d in range(1, y + 1)
            for t in range(1, y + 1)
        )
        assert engines.t_ym_naive(y, m, exact=True) == ref


def test_t_engines_agree_exactly():
    for m in range(1, 31):
        for y in range(1, 61):
            assert engines.t_ym_naive(y, m, exact=True) == engines.t_ym_rearranged(y, m, exact=True), (y, m)


def test_t_engines_agree_in_floating_point():
    for m in (1, 2, 6, 7, 30, 210):
        for y in (1, 10, 99, 500, 1000):
            a = engines.t_ym_naive(y, m)
            b = engines.t_ym_rearranged(y, m)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_t_table_matches_rearranged():
    for m in (1, 6, 35):
        table = engines.t_ym_table(400, m)
        assert len(table) == 400
        for y in (1, 2, 3, 17, 100, 210, 400):
            assert table[y - 1] == pytest.approx(engines.t_ym_rearranged(y, m), rel=1e-12, abs=1e-15)


def test_t_errors():
    with pytest.raises(BudgetExceeded):
        engines.t_ym_naive(61, 1, exact=True)
    with pytest.raises(BudgetExceeded):
        engines.t_ym_naive(1001, 1)
    with pytest.raises(ValueError):
        engines.t_ym_rearranged(0, 1)
    with pytest.raises(ValueError):
        engines.t_ym_rearranged(5, 0)


# ---------------------------------------------------------------- windows and remainder


def test_a_m_examples():
    assert engines.a_m_diagnostic(1, 1, 1) == pytest.approx(1.0, rel=1e-15)
    assert engines.a_m_diagnostic(1, 2, 1) == pytest.approx(2 / 9, rel=1e-15)
    with pytest.raises(ValueError):
        engines.a_m_diagnostic(0, 10, 1)


@pytest.mark.parametrize("j, y, m", [(2, 100, 6), (1, 100, 6), (3, 81, 1), (1, 50, 35)])
def test_a_m_matches_brute_force(j, y, m):
    terms = window_terms(y, m)
    ref = sum(v for d, v in terms.items() if y / (j + 1) < d <= y / j)
    assert engines.a_m_diagnostic(j, y, m) == pytest.approx(float(ref), rel=1e-13)


def test_windows_reconstruct_t():
    for y, m in ((1, 1), (100, 6), (1000, 1), (999, 30)):
        windows = engines.a_m_windows(y, m)
        assert np.all(windows >= 0)
        total = SIX / arith.psi(m) * math.fsum(windows.tolist())
        assert total == pytest.approx(engines.t_ym_rearranged(y, m), rel=1e-12)
        for j in range(1, min(y, 3) + 1):
            assert windows[j] == pytest.approx(engines.a_m_diagnostic(j, y, m), rel=1e-12, abs=1e-300)


def test_r_ym_examples():
    assert engines.r_ym_diagnostic(1, 1) == pytest.approx(1.0, rel=1e-15)
    terms = window_terms(16, 1)
    ref = sum(v for d, v in terms.items() if d <= 8)
    assert engines.r_ym_diagnostic(16, 1) == pytest.approx(float(ref), rel=1e-13)
    assert engines.r_ym_diagnostic(10**4, 1) < engines.r_ym_diagnostic(10**2, 1)
    assert engines.r_ym_diagnostic(300, 6) >= 0


def test_delta_window_examples():
    assert engines.delta_window_sum(1, 1, 1).value == pytest.approx(1.0, rel=1e-15)
    rep = engines.delta_window_sum(1, 10**6, 1)
    assert rep.reference == pytest.approx(big_B().value * math.log(2), rel=1e-14)
    assert abs(rep.residual) <= 0.01 * rep.reference
    rep = engines.delta_window_sum(3, 10**6, 6)
    alpha6 = (1 - 2 / 11) * (1 - 3 / 19)
    assert rep.reference == pytest.approx(big_B().value * math.log(4 / 3) * alpha6, rel=1e-14)
    assert abs(rep.residual) <= 0.02 * rep.reference


def test_delta_window_matches_brute():
    lo, hi = 1000 // 3 + 1, 1000 // 2
    ref = math.fsum(
        d / psi_brute(d) ** 2 for d in range(lo, hi + 1) if mu_brute(d) and math.gcd(d, 10) == 1
    )
    assert engines.delta_window_sum(2, 1000, 10).value == pytest.approx(ref, rel=1e-14)


# ---------------------------------------------------------------- congruence sum and identity


def test_congruence_examples():
    ref = sum(M_brute(n, 1) ** 2 for n in range(1, 11) if mu_brute(n))
    assert engines.congruence_sum(10, 1, 1).value == ref
    for x, z, h in ((200, 7, 6), (300, 20, 5), (150, 150, 1)):
        ref = sum(M_brute(n, z) ** 2 for n in range(h, x + 1, h) if mu_brute(n))
        assert engines.congruence_sum(x, z, h).value == ref
    assert engines.congruence_sum(10, 3, 11).value == 0


def test_congruence_reference_and_envelope():
    rep = engines.congruence_sum(10**6, 10**2, 6)
    assert rep.reference == pytest.approx(10**6 * engines.t_ym_rearranged(100, 6), rel=1e-14)
    assert abs(rep.residual) <= 20 * 100 * 1000


def test_congruence_errors():
    with pytest.raises(NotSquarefree):
        engines.congruence_sum(100, 10, 12)
    with pytest.raises(ValueError):
        engines.congruence_sum(100, 10, 0)


def test_identity_examples():
    assert engines.symmetry_decomposition_check(4, 2) == (1, 1)
    assert engines.symmetry_decomposition_check(1, 1) == (0, 0)
    lhs, rhs = engines.symmetry_decomposition_check(500, 10)
    assert lhs == rhs == S_brute(500, 10) - 1


def test_identity_holds_on_a_grid():
    for x in (10, 99, 256, 1000, 10**4):
        for z in (1, 2, 3, 10, 50, 99):
            if z <= x:
                lhs, rhs = engines.symmetry_decomposition_check(x, z)
                assert lhs == rhs, (x, z)


def test_identity_errors():
    with pytest.raises(ValueError):
        engines.symmetry_decomposition_check(5, 6)
    with pytest.raises(BudgetExceeded):
        engines.symmetry_decomposition_check(10**4 + 1, 2)


# ---------------------------------------------------------------- query record


def test_sum_query_validation():
    engines.SumQuery(x=10**4, z=100, xi=10)
    engines.SumQuery(x=10**4, z=1000, xi=10)
    with pytest.raises(ValueError):
        engines.SumQuery(x=10**4, z=9, xi=10)
    with pytest.raises(ValueError):
        engines.SumQuery(x=10**4, z=1001, xi=10)
    with pytest.raises(ValueError):
        engines.SumQuery(m=0)


def test_identity_check_alias():
    assert engines.identity_2_7_check is engines.symmetry_decomposition_check
