"""Engines for S(x, z), S(z), T(y; m) and the diagnostic sums around them.

Each quantity has at least two unrelated routes so that each checks the other:

* S(x, z): additive sieve (``s_xz_direct``), floor double sum over divisor
  pairs (``s_xz_floor``) and the n = m k decomposition with k the squarefree
  kernel (``s_xz_kernel``).
* S(z): the lcm double sum (``s_z``) and the gcd rearrangement
  S(z) = sum_delta phi(delta) (sum_{delta | m <= z} mu(m)/m)^2 (``s_z_fast``).
* T(y; m): the double sum over (d, t) (``t_ym_naive``), the delta-decomposed
  form (``t_ym_rearranged``) and an incremental table over all y
  (``t_ym_table``).

Exact modes return :class:`fractions.Fraction`; for T the returned fraction is
the rational part c with T = (6 / pi^2) c, so no floating pi enters.
Whenever z > x the engines use z = x, which changes nothing since divisors of
n <= x never exceed x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numba
import numpy as np

from . import arith
from .config import DEFAULT_BUDGET, Budget, NotSquarefree, check_budget

SIX_OVER_PI2 = 6.0 / math.pi**2


# --------------------------------------------------------------------------
# query record
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SumQuery:
    """Parameters naming one sum; unused fields stay None."""

    x: int | None = None
    z: int | None = None
    y: int | None = None
    m: int | None = None
    h: int | None = None
    xi: int | None = None
    engine: str = "direct"

    def __post_init__(self) -> None:
        for name in ("x", "z", "y", "m", "h", "xi"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
        if self.xi is not None and self.x is not None and self.z is not None:
            if not self.xi <= self.z <= self.x / self.xi:
                raise ValueError(f"need xi <= z <= x/xi, got xi={self.xi} z={self.z} x={self.x}")


# --------------------------------------------------------------------------
# numba helpers
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@numba.njit(cache=True)
def _linear_sieve(n):
    """Smallest prime factor, mu and phi on [0, n] in one linear pass."""
    spf = np.zeros(n + 1, dtype=np.int32)
    mu = np.zeros(n + 1, dtype=np.int8)
    phi = np.zeros(n + 1, dtype=np.int32)
    primes = np.empty(max(16, n // 2 + 1), dtype=np.int32)
    count = 0
    if n >= 1:
        mu[1] = 1
        phi[1] = 1
    for i in range(2, n + 1):
        if spf[i] == 0:
            spf[i] = i
            mu[i] = -1
            phi[i] = i - 1
            primes[count] = i
            count += 1
        for j in range(count):
            p = primes[j]
            ip = i * p
            if p > spf[i] or ip > n:
                break
            spf[ip] = p
            if p == spf[i]:
                mu[ip] = 0
                phi[ip] = phi[i] * p
            else:
                mu[ip] = -mu[i]
                phi[ip] = phi[i] * (p - 1)
    return spf, mu, phi


@numba.njit(cache=True)
def _distinct_primes(n, spf, out):
    """Write the distinct primes of n into out; return their count, or -1 if n is not squarefree."""
    k = 0
    while n > 1:
        p = spf[n]
        n //= p
        if n % p == 0:
            return -1
        out[k] = p
        k += 1
    return k


@numba.njit(cache=True)
def _truncated_mobius(ps, k, z, divs, signs):
    """M(n, z) for squarefree n with distinct primes ps[:k]."""
    divs[0] = 1
    signs[0] = 1
    size = 1
    for i in range(k):
        p = ps[i]
        for j in range(size):
            divs[size + j] = divs[j] * p
            signs[size + j] = -signs[j]
        size *= 2
    total = 0
    for j in range(size):
        if divs[j] <= z:
            total += signs[j]
    return total


@numba.njit(cache=True)
def _count_supported(ps, k, limit, stack_v, stack_i):
    """#{m <= limit : every prime of m is among ps[:k]}, 1 included."""
    if limit < 1:
        return 0
    count = 0
    top = 0
    stack_v[0] = 1
    stack_i[0] = 0
    top = 1
    while top > 0:
        top -= 1
        v = stack_v[top]
        i0 = stack_i[top]
        count += 1
        for i in range(i0, k):
            w = v * ps[i]
            if w <= limit:
                stack_v[top] = w
                stack_i[top] = i
                top += 1
    return count


@numba.njit(cache=True)
def _neumaier_add(s, c, v):
    t = s + v
    if abs(s) >= abs(v):
        c += (s - t) + v
    else:
        c += (v - t) + s
    return t, c


# --------------------------------------------------------------------------
# S(x, z)
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _direct_kernel(x, ds, mus, block):
    acc = np.zeros(block, dtype=np.int32)
    total = 0
    lo = 1
    while lo <= x:
        hi = min(x, lo + block - 1)
        n = hi - lo + 1
        acc[:n] = 0
        for i in range(ds.shape[0]):
            d = ds[i]
            if d > hi:
                break
            mu = mus[i]
            v = (lo + d - 1) // d * d - lo
            while v < n:
                acc[v] += mu
                v += d
        for v in range(n):
            total += acc[v] * acc[v]
        lo = hi + 1
    return total


def _squarefree_upto(z: int) -> tuple[np.ndarray, np.ndarray]:
    mu = arith.mobius_upto(z)
    ds = np.nonzero(mu)[0]
    return ds.astype(np.int64), mu[ds].astype(np.int32)


def s_xz_direct(x: int, z: int, budget: Budget = DEFAULT_BUDGET) -> int:
    """S(x, z) by adding mu(d) onto the multiples of every squarefree d <= z, segment by segment."""
    _check_xz(x, z)
    check_budget(x, budget.max_direct_x, "x")
    z = min(z, x)
    ds, mus = _squarefree_upto(z)
    return int(_direct_kernel(x, ds, mus, min(budget.block_size, x)))


@numba.njit(cache=True)
def _floor_kernel(x, z, mu):
    # pairs (d, t) = (g a, g b) with gcd(a, b) = 1, so [d, t] = g a b; only a <= b is visited
    total = 0
    for g in range(1, z + 1):
        if mu[g] == 0:
            continue
        zg = z // g
        for a in range(1, zg + 1):
            ga = g * a
            if ga > x:
                break
            if mu[ga] == 0:
                continue
            bmax = min(zg, x // ga)
            for b in range(a, bmax + 1):
                gb = g * b
                if mu[gb] == 0 or _gcd(a, b) != 1:
                    continue
                term = mu[ga] * mu[gb] * (x // (ga * b))
                total += term if b == a else 2 * term
    return total


def s_xz_floor(x: int, z: int, budget: Budget = DEFAULT_BUDGET) -> int:
    """S(x, z) = sum_{d, t <= z} mu(d) mu(t) floor(x / [d, t])."""
    _check_xz(x, z)
    z = min(z, x)
    check_budget(z, budget.max_floor_z, "z")
    mu = arith.mobius_upto(z).astype(np.int64)
    return int(_floor_kernel(x, z, mu))


@numba.njit(cache=True)
def _kernel_engine(x, z, spf):
    ps = np.empty(64, dtype=np.int64)
    divs = np.empty(1 << 16, dtype=np.int64)
    signs = np.empty(1 << 16, dtype=np.int64)
    stack_v = np.empty(4096, dtype=np.int64)
    stack_i = np.empty(4096, dtype=np.int64)
    total = 1  # n = 1
    for k in range(2, x + 1):
        w = _distinct_primes(k, spf, ps)
        if w < 0:
            continue
        mz = _truncated_mobius(ps, w, z, divs, signs)
        if mz == 0:
            continue
        total += mz * mz * _count_supported(ps, w, x // k, stack_v, stack_i)
    return total


def s_xz_kernel(x: int, z: int, budget: Budget = DEFAULT_BUDGET) -> int:
    """S(x, z) = 1 + sum over squarefree k > 1 of M(k, z)^2 #{m <= x/k : k(m) | k}.

    Every n factors uniquely as m k with k = kernel(n), and M(n, z) = M(k, z).
    """
    _check_xz(x, z)
    check_budget(x, budget.max_kernel_x, "x")
    z = min(z, x)
    spf, _, _ = _linear_sieve(x)
    return int(_kernel_engine(x, z, spf))


def _check_xz(x: int, z: int) -> None:
    if x < 1 or z < 1:
        raise ValueError(f"x and z must be >= 1, got x={x} z={z}")


# --------------------------------------------------------------------------
# S(z)
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _s_z_pairs(ds, mus):
    s = 0.0
    c = 0.0
    n = ds.shape[0]
    for i in range(n):
        m = ds[i]
        row = 0.0
        rc = 0.0
        for j in range(i + 1, n):
            k = ds[j]
            g = _gcd(m, k)
            row, rc = _neumaier_add(row, rc, mus[j] * g / (m * k))
        s, c = _neumaier_add(s, c, 2.0 * mus[i] * (row + rc))
        s, c = _neumaier_add(s, c, 1.0 / m)
    return s + c


def s_z(z: int, exact: bool = False, budget: Budget = DEFAULT_BUDGET) -> float | Fraction:
    """S(z) = sum_{m, n <= z} mu(m) mu(n) / [m, n] by the double sum."""
    if z < 1:
        raise ValueError("z must be >= 1")
    ds, mus = _squarefree_upto(z)
    if not exact:
        return float(_s_z_pairs(ds, mus.astype(np.float64)))
    check_budget(z, budget.max_exact_sz_z, "z (exact)")
    den = math.lcm(*range(1, z + 1))
    dl, ml = ds.tolist(), mus.tolist()
    num = 0
    for i, (m, a) in enumerate(zip(dl, ml)):
        num += den // m  # diagonal, mu^2 = 1
        row = 0
        for k, b in zip(dl[i + 1 :], ml[i + 1 :]):
            row += b * (den // math.lcm(m, k))
        num += 2 * a * row
    return Fraction(num, den)


@numba.njit(cache=True)
def _s_z_fast_kernel(z, mu, phi):
    s = 0.0
    c = 0.0
    for delta in range(1, z + 1):
        if mu[delta] == 0:
            continue
        inner = 0.0
        ic = 0.0
        m = delta
        while m <= z:
            if mu[m] != 0:
                inner, ic = _neumaier_add(inner, ic, mu[m] / m)
            m += delta
        inner += ic
        s, c = _neumaier_add(s, c, phi[delta] * inner * inner)
    return s + c


def s_z_fast(z: int, budget: Budget = DEFAULT_BUDGET) -> float:
    """S(z) through gcd(m, n) = sum_{delta | m, n} phi(delta), in O(z log z)."""
    if z < 1:
        raise ValueError("z must be >= 1")
    check_budget(z, budget.max_sz_fast_z, "z")
    _, mu, phi = _linear_sieve(z)
    return float(_s_z_fast_kernel(z, mu, phi))


# --------------------------------------------------------------------------
# T(y; m)
# --------------------------------------------------------------------------


def _check_ym(y: int, m: int) -> None:
    if y < 1 or m < 1:
        raise ValueError(f"y and m must be >= 1, got y={y} m={m}")


@numba.njit(cache=True)
def _t_naive_kernel(ds, mus, psi, m, km):
    # psi([d, t, m]) = psi(d) psi(t) / psi((d, t)) * psi(m) / psi(([d, t], k(m)))
    s = 0.0
    c = 0.0
    n = ds.shape[0]
    for i in range(n):
        d = ds[i]
        for j in range(n):
            t = ds[j]
            g = _gcd(d, t)
            lcm = d // g * t
            shared = _gcd(lcm, km)
            den = psi[d] * psi[t] // psi[g] * psi[m] // psi[shared]
            s, c = _neumaier_add(s, c, mus[i] * mus[j] / den)
    return s + c


def t_ym_naive(y: int, m: int, exact: bool = False,
               budget: Budget = DEFAULT_BUDGET) -> float | Fraction:
    """T(y; m) = (6/pi^2) sum_{d, t <= y} mu(d) mu(t) / psi([d, t, m]).

    In exact mode the rational sum (without 6/pi^2) is returned.
    """
    _check_ym(y, m)
    ds, mus = _squarefree_upto(y)
    if exact:
        check_budget(y, budget.max_exact_t_y, "y (exact)")
        total = Fraction(0)
        for d, a in zip(ds.tolist(), mus.tolist()):
            for t, b in zip(ds.tolist(), mus.tolist()):
                total += Fraction(a * b, arith.psi(math.lcm(d, t, m)))
        return total
    check_budget(y, budget.max_naive_t_y, "y")
    psi = arith.psi_upto(max(y, m))
    return SIX_OVER_PI2 * float(
        _t_naive_kernel(ds, mus.astype(np.float64), psi, m, arith.kernel(m))
    )


@numba.njit(cache=True)
def _delta_terms(y, m, mu, psi, psim):
    """delta/psi(delta)^2 (sum_{d <= y/delta} mu(d delta)/psi_m(d))^2 for delta = 0..y."""
    out = np.zeros(y + 1)
    for delta in range(1, y + 1):
        if mu[delta] == 0 or _gcd(delta, m) != 1:
            continue
        inner = 0.0
        ic = 0.0
        for d in range(1, y // delta + 1):
            v = mu[d * delta]
            if v != 0:
                inner, ic = _neumaier_add(inner, ic, v / psim[d])
        inner += ic
        out[delta] = delta / (psi[delta] * psi[delta]) * inner * inner
    return out


@numba.njit(cache=True)
def _compensated_sum(a):
    s = 0.0
    c = 0.0
    for v in a:
        s, c = _neumaier_add(s, c, v)
    return s + c


def _tables_for_t(y: int, m: int):
    _, mu, _ = _linear_sieve(y)
    psi = arith.psi_upto(y).astype(np.float64)
    psim = arith.psi_m_upto(y, m).astype(np.float64)
    return mu, psi, psim


def _delta_term_array(y: int, m: int) -> np.ndarray:
    mu, psi, psim = _tables_for_t(y, m)
    return _delta_terms(y, m, mu, psi, psim)


def _t_rearranged_exact(y: int, m: int) -> Fraction:
    total = Fraction(0)
    for delta in range(1, y + 1):
        if not arith.is_squarefree(delta) or math.gcd(delta, m) != 1:
            continue
        inner = Fraction(0)
        for d in range(1, y // delta + 1):
            mu = arith.mobius(d * delta)
            if mu:
                inner += Fraction(mu, arith.psi_m(d, m))
        total += Fraction(delta, arith.psi(delta) ** 2) * inner * inner
    return total / arith.psi(m)


def t_ym_rearranged(y: int, m: int, exact: bool = False,
                    budget: Budget = DEFAULT_BUDGET) -> float | Fraction:
    """T(y; m) as 6/(pi^2 psi(m)) sum_{delta <= y, (delta, m) = 1} delta/psi(delta)^2 (inner sum)^2.

    The inner sum is sum_{d <= y/delta} mu(d delta)/psi_m(d).  Exact mode
    returns the rational part, as in :func:`t_ym_naive`.
    """
    _check_ym(y, m)
    if exact:
        check_budget(y, budget.max_exact_t_y, "y (exact)")
        return _t_rearranged_exact(y, m)
    check_budget(y, budget.max_window_y, "y")
    terms = _delta_term_array(y, m)
    return SIX_OVER_PI2 * float(_compensated_sum(terms)) / arith.psi(m)


@numba.njit(cache=True)
def _t_table_kernel(y_max, m, spf, mu, psi, psim):
    # when y is squarefree every delta | y gains the term mu(y)/psi_m(y/delta)
    inner = np.zeros(y_max + 1)
    out = np.empty(y_max)
    ps = np.empty(64, dtype=np.int64)
    divs = np.empty(1 << 16, dtype=np.int64)
    s = 0.0
    c = 0.0
    for y in range(1, y_max + 1):
        if mu[y] != 0:
            k = 0
            n = y
            while n > 1:
                p = spf[n]
                ps[k] = p
                k += 1
                n //= p
            divs[0] = 1
            size = 1
            for i in range(k):
                for j in range(size):
                    divs[size + j] = divs[j] * ps[i]
                size *= 2
            for j in range(size):
                delta = divs[j]
                if _gcd(delta, m) != 1:
                    continue
                old = inner[delta]
                new = old + mu[y] / psim[y // delta]
                inner[delta] = new
                w = delta / (psi[delta] * psi[delta])
                s, c = _neumaier_add(s, c, w * (new * new - old * old))
        out[y - 1] = s + c
    return out


def t_ym_table(y_max: int, m: int, budget: Budget = DEFAULT_BUDGET) -> np.ndarray:
    """T(y; m) for y = 1..y_max (entry y - 1), updated incrementally in O(y_max log y_max)."""
    _check_ym(y_max, m)
    check_budget(y_max, budget.max_window_y, "y_max")
    spf, mu, _ = _linear_sieve(y_max)
    psi = arith.psi_upto(y_max).astype(np.float64)
    psim = arith.psi_m_upto(y_max, m).astype(np.float64)
    raw = _t_table_kernel(y_max, m, spf, mu, psi, psim)
    return SIX_OVER_PI2 * raw / arith.psi(m)


# --------------------------------------------------------------------------
# diagnostics around T
# --------------------------------------------------------------------------


def a_m_windows(y: int, m: int, budget: Budget = DEFAULT_BUDGET) -> np.ndarray:
    """a_m(j, y) for j = 0..y (index j; entry 0 unused), in one pass over delta.

    delta lies in the window (y/(j+1), y/j] exactly when floor(y/delta) = j.
    """
    _check_ym(y, m)
    check_budget(y, budget.max_window_y, "y")
    terms = _delta_term_array(y, m)
    deltas = np.arange(1, y + 1)
    return np.bincount(y // deltas, weights=terms[1:], minlength=y + 1)


def a_m_diagnostic(j: int, y: int, m: int, budget: Budget = DEFAULT_BUDGET) -> float:
    """sum over y/(j+1) < delta <= y/j, (delta, m) = 1 of delta mu(delta)^2/psi(delta)^2 (sum_{d <= j} mu(d delta)/psi_m(d))^2."""
    if j < 1:
        raise ValueError("j must be >= 1")
    _check_ym(y, m)
    if j > y:
        return 0.0
    lo, hi = y // (j + 1), y // j
    mu, psi, psim = _tables_for_t(y, m)
    terms = _delta_terms_window(lo, hi, j, m, mu, psi, psim)
    return float(_compensated_sum(terms))


@numba.njit(cache=True)
def _delta_terms_window(lo, hi, j, m, mu, psi, psim):
    out = np.zeros(hi - lo)
    for delta in range(lo + 1, hi + 1):
        if mu[delta] == 0 or _gcd(delta, m) != 1:
            continue
        inner = 0.0
        for d in range(1, j + 1):
            v = mu[d * delta]
            if v != 0:
                inner += v / psim[d]
        out[delta - lo - 1] = delta / (psi[delta] * psi[delta]) * inner * inner
    return out


def r_ym_diagnostic(y: int, m: int, budget: Budget = DEFAULT_BUDGET) -> float:
    """R(y; m): 1/psi(m) times the delta-terms of T over delta <= y^{3/4}."""
    _check_ym(y, m)
    check_budget(y, budget.max_window_y, "y")
    cut = math.isqrt(math.isqrt(y**3))  # floor(y^{3/4})
    terms = _delta_term_array(y, m)
    return float(_compensated_sum(terms[: cut + 1])) / arith.psi(m)


@dataclass(frozen=True)
class WindowReport:
    value: float
    reference: float
    residual: float


def delta_window_sum(j: int, y: int, q: int, budget: Budget = DEFAULT_BUDGET) -> WindowReport:
    """sum over y/(j+1) < delta <= y/j, (delta, q) = 1 of delta mu(delta)^2/psi(delta)^2.

    Reported next to B log(1 + 1/j) alpha(q).
    """
    from .constants import big_B

    if j < 1 or y < 1 or q < 1:
        raise ValueError("j, y and q must be >= 1")
    lo, hi = y // (j + 1) + 1, y // j
    value = 0.0
    if lo <= hi:
        check_budget(hi - lo + 1, budget.max_table_entries, "window length")
        table = arith.build_factor_table(lo, hi, budget)
        n = table.integers()
        keep = (table.mu != 0) & (np.gcd(n, q) == 1)
        psi = table.psi_array().astype(np.float64)
        value = math.fsum((n[keep] / psi[keep] ** 2).tolist())
    reference = big_B().value * math.log1p(1.0 / j) * arith.alpha(q)
    return WindowReport(value, reference, value - reference)


# --------------------------------------------------------------------------
# congruence sum and the symmetry identity
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _congruence_kernel(x, z, h, spf):
    ps = np.empty(64, dtype=np.int64)
    divs = np.empty(1 << 16, dtype=np.int64)
    signs = np.empty(1 << 16, dtype=np.int64)
    total = 0
    n = h
    while n <= x:
        w = _distinct_primes(n, spf, ps)
        if w >= 0:
            mz = _truncated_mobius(ps, w, z, divs, signs)
            total += mz * mz
        n += h
    return total


@dataclass(frozen=True)
class CongruenceReport:
    value: int
    reference: float
    residual: float


def congruence_sum(x: int, z: int, h: int, budget: Budget = DEFAULT_BUDGET) -> CongruenceReport:
    """sum_{n <= x, h | n} mu(n)^2 M(n, z)^2 exactly, next to x T(z; h)."""
    _check_xz(x, z)
    if h < 1:
        raise ValueError("h must be >= 1")
    if not arith.is_squarefree(h):
        raise NotSquarefree(f"h={h} is not squarefree")
    check_budget(x, budget.max_kernel_x, "x")
    value = 0
    if h <= x:
        spf, _, _ = _linear_sieve(x)
        value = int(_congruence_kernel(x, min(z, x), h, spf))
    reference = x * t_ym_rearranged(z, h, budget=budget)
    return CongruenceReport(value, reference, value - reference)


@numba.njit(cache=True)
def _identity_rhs(x, z, mu, ker):
    # sum_{m <= x/z} sum_{d, t} mu(d) mu(t) #{z max(d,t)/H < k <= x/(m H) : mu(H k)^2 = 1}
    total = 0
    for m in range(1, x // z + 1):
        km = ker[m]
        top = x // (m * z)
        for d in range(1, top + 1):
            if mu[d] == 0:
                continue
            hd = km // _gcd(km, d) * d
            if hd > x // m:
                continue
            for t in range(1, top + 1):
                if mu[t] == 0:
                    continue
                hh = hd // _gcd(hd, t) * t
                if hh > x // m:
                    continue
                lo = z * max(d, t) // hh
                hi = x // (m * hh)
                cnt = 0
                for k in range(lo + 1, hi + 1):
                    if mu[hh * k] != 0:
                        cnt += 1
                total += mu[d] * mu[t] * cnt
    return total


class IdentityPair(NamedTuple):
    lhs: int
    rhs: int


def symmetry_decomposition_check(x: int, z: int, budget: Budget = DEFAULT_BUDGET) -> IdentityPair:
    """(S(x, z) - 1, the lcm-grouped triple sum) for the divisor-symmetry identity.

    The right side counts, for m <= x/z and squarefree d, t <= x/(m z), the
    k in (z max(d, t)/H, x/(m H)] with H k squarefree, H = [k(m), d, t].
    """
    _check_xz(x, z)
    if z > x:
        raise ValueError("need z <= x")
    check_budget(x, budget.max_identity_x, "x")
    mu = arith.mobius_upto(x).astype(np.int64)
    ker = arith.kernel_upto(x)
    return IdentityPair(s_xz_direct(x, z, budget) - 1, int(_identity_rhs(x, z, mu, ker)))


identity_2_7_check = symmetry_decomposition_check
