"""Factorization tables and the multiplicative functions used throughout.

The sieve tables are built block by block over ``[lo, hi]`` so that ranges far
from the origin (``hi`` up to ~1e9) fit in bounded memory.  Scalar helpers
(``kernel``, ``psi``, ``alpha`` ...) factor their argument by trial division
with sieved primes and are meant for isolated inputs; bulk work should go
through the array builders at the bottom of the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .config import DEFAULT_BUDGET, Budget, BudgetExceeded, NotSquarefree

Factorization = list[tuple[int, int]]


@dataclass(frozen=True)
class ComplexPoint:
    """The point s = sigma + i*tau."""

    sigma: float
    tau: float

    def __complex__(self) -> complex:
        return complex(self.sigma, self.tau)


SLike = Union[complex, float, ComplexPoint, np.ndarray]


# --------------------------------------------------------------------------
# sieves
# --------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _primes_upto_cached(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    is_prime = np.ones(n + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    primes = np.flatnonzero(is_prime).astype(np.int64)
    primes.flags.writeable = False
    return primes


def primes_upto(n: int) -> np.ndarray:
    """All primes <= n as a read-only int64 array."""
    # round up so that nearby requests share one cached sieve
    size = 1 << max(4, int(n).bit_length())
    primes = _primes_upto_cached(size)
    return primes[: np.searchsorted(primes, n, side="right")]


@dataclass(frozen=True)
class FactorTable:
    """Smallest prime factor and Möbius values for every n in [lo, hi].

    ``spf[i]`` and ``mu[i]`` refer to ``n = lo + i``.  ``spf`` is 0 for n = 1,
    where it is undefined.  ``base_primes`` holds every prime up to sqrt(hi),
    which is all the trial division needed to finish a factorization whose
    cofactor leaves the range.
    """

    lo: int
    hi: int
    spf: np.ndarray
    mu: np.ndarray
    base_primes: np.ndarray

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, n: int) -> bool:
        return self.lo <= n <= self.hi

    def index(self, n: int) -> int:
        if n not in self:
            raise ValueError(f"{n} outside table range [{self.lo}, {self.hi}]")
        return n - self.lo

    def mobius(self, n: int) -> int:
        return int(self.mu[self.index(n)])

    def integers(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1, dtype=np.int64)

    def strong_product(self, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Array of prod_{p | n} g(p) over the range, for integer-valued ``g``."""
        return _strong_product_segment(self.lo, self.hi, self.base_primes, g)

    def kernel_array(self) -> np.ndarray:
        return self.strong_product(lambda p: p)

    def psi_array(self) -> np.ndarray:
        return self.strong_product(lambda p: p + 1)

    def phi_array(self) -> np.ndarray:
        rad = self.kernel_array()
        return (self.integers() // rad) * self.strong_product(lambda p: p - 1)


def _sieve_block(lo: int, hi: int, base: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    size = hi - lo + 1
    rem = np.arange(lo, hi + 1, dtype=np.int64)
    spf = np.zeros(size, dtype=np.int64)
    mu = np.ones(size, dtype=np.int8)
    for p in base.tolist():
        if p * p > hi:
            break
        start = (-lo) % p
        if start >= size:
            continue
        view = spf[start::p]
        view[view == 0] = p
        mu[start::p] *= -1
        pp = p * p
        start2 = (-lo) % pp
        if start2 < size:
            mu[start2::pp] = 0
        pk = p
        while pk <= hi:
            st = (-lo) % pk
            if st >= size:
                break
            rem[st::pk] //= p
            pk *= p
    big = rem > 1
    unset = big & (spf == 0)
    spf[unset] = rem[unset]
    mu[big] *= -1
    return spf, mu


def _strong_product_segment(
    lo: int, hi: int, base: np.ndarray, g: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    size = hi - lo + 1
    rem = np.arange(lo, hi + 1, dtype=np.int64)
    out = np.ones(size, dtype=np.int64)
    for p in base.tolist():
        if p * p > hi:
            break
        start = (-lo) % p
        if start >= size:
            continue
        out[start::p] *= int(g(np.int64(p)))
        pk = p
        while pk <= hi:
            st = (-lo) % pk
            if st >= size:
                break
            rem[st::pk] //= p
            pk *= p
    big = rem > 1
    out[big] *= g(rem[big])
    return out


def build_factor_table(lo: int, hi: int, budget: Budget = DEFAULT_BUDGET) -> FactorTable:
    """Sieve smallest prime factors and Möbius values over [lo, hi]."""
    if lo < 1 or hi < lo:
        raise ValueError(f"empty or invalid range [{lo}, {hi}]")
    size = hi - lo + 1
    if size > budget.max_table_entries:
        raise BudgetExceeded(f"table of {size} entries exceeds budget {budget.max_table_entries}")
    base = primes_upto(math.isqrt(hi))
    block = budget.block_size
    spf_parts, mu_parts = [], []
    for a in range(lo, hi + 1, block):
        b = min(hi, a + block - 1)
        s, m = _sieve_block(a, b, base)
        spf_parts.append(s)
        mu_parts.append(m)
    spf = np.concatenate(spf_parts)
    mu = np.concatenate(mu_parts)
    spf.flags.writeable = False
    mu.flags.writeable = False
    return FactorTable(lo, hi, spf, mu, base)


# --------------------------------------------------------------------------
# scalar multiplicative functions
# --------------------------------------------------------------------------


def _trial_factor(n: int, start_prime: int = 2) -> Factorization:
    out: Factorization = []
    for p in primes_upto(math.isqrt(n)).tolist():
        if p < start_prime:
            continue
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
    if n > 1:
        out.append((n, 1))
    return out


def factorize(n: int, table: FactorTable | None = None) -> Factorization:
    """Prime factorization of ``n`` as increasing (prime, exponent) pairs.

    With a table, smallest prime factors are read from it while the cofactor
    stays in range; what is left is finished by trial division.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"factorize needs n >= 1, got {n}")
    if table is None:
        return _trial_factor(n)
    table.index(n)
    out: Factorization = []
    while n > 1 and n in table:
        p = int(table.spf[n - table.lo])
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        out.append((p, e))
    if n > 1:
        out.extend(_trial_factor(n, out[-1][0] + 1 if out else 2))
    return out


def prime_divisors(n: int) -> list[int]:
    return [p for p, _ in factorize(n)]


def kernel(n: int) -> int:
    """Squarefree kernel: the product of the distinct primes dividing n."""
    return math.prod(prime_divisors(n))


def is_squarefree(n: int) -> bool:
    return all(e == 1 for _, e in factorize(n))


def mobius(n: int) -> int:
    fac = factorize(n)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def phi(n: int) -> int:
    """Euler's totient."""
    out = 1
    for p, e in factorize(n):
        out *= (p - 1) * p ** (e - 1)
    return out


def psi(n: int) -> int:
    """prod_{p | n} (p + 1)."""
    return math.prod(p + 1 for p in prime_divisors(n))


def psi_m(n: int, m: int) -> int:
    """prod over primes p | n with p not dividing m of (p + 1)."""
    return math.prod(p + 1 for p in prime_divisors(n) if m % p)


def r(n: int) -> float:
    """prod_{p | n} (1 + 2/sqrt(p))."""
    return math.prod(1.0 + 2.0 / math.sqrt(p) for p in prime_divisors(n))


def alpha(n: int, exact: bool = False) -> float | Fraction:
    """prod_{p | n} (1 - p/(p^2 + 3p + 1)); a reduced Fraction when ``exact``."""
    ps = prime_divisors(n)
    if exact:
        out = Fraction(1)
        for p in ps:
            out *= Fraction(p * p + 2 * p + 1, p * p + 3 * p + 1)
        return out
    return math.prod(1.0 - p / (p * p + 3 * p + 1) for p in ps)


def _as_complex(s: SLike) -> complex | np.ndarray:
    if isinstance(s, ComplexPoint):
        return complex(s)
    return s


def f(n: int, s: SLike) -> float | np.ndarray:
    """f(n; s) = prod_{p | n} |1 - p^{-s}|^2.

    ``s`` may be a complex array, in which case the result is an array of the
    same shape.
    """
    s = _as_complex(s)
    sigma = np.real(s)
    tau = np.imag(s)
    out = np.ones_like(np.asarray(sigma, dtype=float))
    for p in prime_divisors(n):
        lp = math.log(p)
        a = np.exp(-sigma * lp)
        out = out * (1.0 - 2.0 * a * np.cos(tau * lp) + a * a)
    return float(out) if np.ndim(out) == 0 else out


def omega(n: int) -> int:
    """Number of distinct prime factors."""
    return len(prime_divisors(n))


def squarefree_divisors(n: int) -> list[int]:
    """Squarefree divisors of n in increasing order."""
    divs = [1]
    for p in prime_divisors(n):
        divs += [d * p for d in divs]
    return sorted(divs)


# --------------------------------------------------------------------------
# squarefree counts
# --------------------------------------------------------------------------


def squarefree_coprime_count(y: int, h: int) -> int:
    """Exact count of squarefree k <= y with gcd(k, h) = 1, i.e. sum_{k<=y} mu(hk)^2.

    Uses sum_{d <= sqrt(y), (d,h)=1} mu(d) * #{k <= y/d^2 : (k, h) = 1}, with
    the coprime count expanded over the divisors of h.  Cost is
    O(sqrt(y) * 2^omega(h)).
    """
    y, h = int(y), int(h)
    if h < 1:
        raise ValueError("h must be >= 1")
    if not is_squarefree(h):
        raise NotSquarefree(f"h={h} is not squarefree")
    if y < 1:
        return 0
    root = math.isqrt(y)
    d = np.arange(1, root + 1, dtype=np.int64)
    mu_d = mobius_upto(root)[1:].astype(np.int64)
    keep = (mu_d != 0) & (np.gcd(d, h) == 1)
    d, mu_d = d[keep], mu_d[keep]
    t = y // (d * d)
    coprime = np.zeros_like(t)
    for e in squarefree_divisors(h):
        coprime += mobius(e) * (t // e)
    return int(np.dot(mu_d, coprime))


# --------------------------------------------------------------------------
# array builders over [0, n]
# --------------------------------------------------------------------------


def mobius_upto(n: int) -> np.ndarray:
    """mu[0..n] as int8 (mu[0] = 0)."""
    mu = np.ones(n + 1, dtype=np.int8)
    mu[0] = 0
    for p in primes_upto(n).tolist():
        mu[p::p] *= -1
        if p * p <= n:
            mu[p * p :: p * p] = 0
    return mu


def strong_upto(n: int, g: Callable[[int], int]) -> np.ndarray:
    """prod_{p | k} g(p) for k = 0..n as int64 (index 0 is meaningless)."""
    out = np.ones(n + 1, dtype=np.int64)
    for p in primes_upto(n).tolist():
        out[p::p] *= g(p)
    return out


def psi_upto(n: int) -> np.ndarray:
    return strong_upto(n, lambda p: p + 1)


def kernel_upto(n: int) -> np.ndarray:
    return strong_upto(n, lambda p: p)


def phi_upto(n: int) -> np.ndarray:
    out = np.arange(n + 1, dtype=np.int64)
    for p in primes_upto(n).tolist():
        out[p::p] -= out[p::p] // p
    return out


def psi_m_upto(n: int, m: int) -> np.ndarray:
    """psi_m(k) for k = 0..n, valid at squarefree k (the only entries ever used)."""
    out = psi_upto(n)
    for p in prime_divisors(m):
        if p <= n:
            out[p::p] //= p + 1
    return out


def spf_upto(n: int) -> np.ndarray:
    """Smallest prime factor for k = 0..n (0 at k = 0, 1)."""
    spf = np.zeros(n + 1, dtype=np.int64)
    for p in primes_upto(n).tolist()[::-1]:
        spf[p::p] = p
    return spf
