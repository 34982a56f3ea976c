"""Truncated Möbius divisor sums M(n, z) and M*(n, z), and per-integer identities.

Only squarefree divisors carry a nonzero Möbius value, so every routine works
from the 2^omega(n) squarefree divisors generated from the distinct primes.
Thresholds are compared exactly: integers and Fractions natively, floats via
their exact binary value.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational

import numpy as np

from . import arith
from .config import NotSquarefree
from .quadrature import integrate_panels


@lru_cache(maxsize=4096)
def _signed_divisors(n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Sorted squarefree divisors of n and the running sums of their Möbius values."""
    ps = arith.prime_divisors(n)
    pairs = [(1, 1)]
    for p in ps:
        pairs += [(d * p, -s) for d, s in pairs]
    pairs.sort()
    divs = tuple(d for d, _ in pairs)
    cum = tuple(int(c) for c in np.cumsum([s for _, s in pairs]))
    return divs, cum


def _exact(z) -> Rational | int:
    if isinstance(z, (int, Rational)):
        return z
    return Fraction(z)


@dataclass(frozen=True)
class BalanceQuery:
    n: int
    z: float
    strict: bool = False

    def value(self) -> int:
        return balance_strict(self.n, self.z) if self.strict else balance(self.n, self.z)


def balance(n: int, z) -> int:
    """M(n, z): sum of mu(d) over divisors d <= z of n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    divs, cum = _signed_divisors(int(n))
    i = bisect.bisect_right(divs, _exact(z))
    return cum[i - 1] if i else 0


def balance_strict(n: int, z) -> int:
    """M*(n, z): sum of mu(d) over divisors d < z of n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    divs, cum = _signed_divisors(int(n))
    i = bisect.bisect_left(divs, _exact(z))
    return cum[i - 1] if i else 0


def balance_many(n: int, zs: np.ndarray) -> np.ndarray:
    """M(n, z) for an integer array of thresholds."""
    divs, cum = _signed_divisors(int(n))
    cum0 = np.concatenate(([0], np.asarray(cum, dtype=np.int64)))
    return cum0[np.searchsorted(np.asarray(divs, dtype=np.int64), zs, side="right")]


def complement_many(k: int, zs: np.ndarray) -> np.ndarray:
    """M*(k, k/z) for an integer array z >= 1, using d < k/z  <=>  d <= (k-1)//z."""
    zs = np.asarray(zs, dtype=np.int64)
    return balance_many(k, (k - 1) // zs)


@dataclass(frozen=True)
class StepProfile:
    """u -> M(n, e^u) as a right-continuous step function on [0, inf)."""

    divisors: tuple[int, ...]
    levels: tuple[int, ...]

    @property
    def breakpoints(self) -> list[float]:
        return [math.log(d) for d in self.divisors[1:]]

    def at(self, u: float) -> int:
        i = bisect.bisect_right(self.breakpoints, u)
        return self.levels[i]


def step_profile(n: int) -> StepProfile:
    divs, cum = _signed_divisors(int(n))
    return StepProfile(divs, cum)


def symmetry_pair(k: int, z) -> tuple[int, int]:
    """(M(k, z), -mu(k) * M*(k, k/z)) for squarefree k > 1; the two agree."""
    if k <= 1:
        raise ValueError("k must be > 1")
    if not arith.is_squarefree(k):
        raise NotSquarefree(f"k={k} is not squarefree")
    zq = _exact(z)
    return balance(k, zq), -arith.mobius(k) * balance_strict(k, Fraction(k) / zq)


def plancherel_lhs(n: int, sigma: float) -> float:
    """Closed form of int_0^inf M(n, e^u)^2 e^{-2 sigma u} du from the step profile."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    prof = step_profile(n)
    divs, levels = prof.divisors, prof.levels
    two_s = 2.0 * sigma
    terms = []
    for i, lev in enumerate(levels):
        if lev == 0:
            continue
        left = divs[i] ** -two_s
        right = divs[i + 1] ** -two_s if i + 1 < len(divs) else 0.0
        terms.append(lev * lev * (left - right))
    return math.fsum(terms) / two_s


@dataclass(frozen=True)
class PlancherelResult:
    value: float
    error: float
    tau_max: float
    panels: int


def plancherel_rhs(n: int, sigma: float, spec=None) -> PlancherelResult:
    """(1/2pi) int_R f(n; sigma + i tau) dtau / (sigma^2 + tau^2), numerically.

    f(n; s) is a trigonometric polynomial in tau whose constant part is
    prod_{p|n} (1 + p^{-2 sigma}); that part's tail beyond the cutoff is
    integrated exactly, and the oscillating remainder's tail is bounded by
    integration by parts using its coefficient mass (<= 4^omega(n)) and the
    smallest frequency log(d/e) between divisors.  The cutoff grows past
    ``spec.tau_max`` until that bound is below a tenth of ``spec.abs_tol``.
    """
    from .constants import QuadratureSpec

    spec = spec or QuadratureSpec()
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    ps = arith.prime_divisors(n)
    mean = math.prod(1.0 + p ** (-2.0 * sigma) for p in ps)
    # mass of the off-diagonal coefficients, and the slowest nonzero frequency
    mass = math.prod((1.0 + p**-sigma) ** 2 for p in ps) - mean
    divs = arith.squarefree_divisors(n)
    if len(divs) > 1:
        ratios = sorted(divs)
        min_freq = min(math.log(b / a) for a, b in zip(ratios, ratios[1:]))
        max_freq = math.log(arith.kernel(n))
    else:
        min_freq, max_freq = 1.0, 1.0
    tail_budget = spec.abs_tol / 10.0
    tau_max = float(spec.tau_max)
    if mass > 0:
        needed = math.sqrt(2.0 * mass / (math.pi * min_freq * tail_budget))
        tau_max = max(tau_max, needed)
    tail_bound = mass * 2.0 / (math.pi * min_freq * (sigma * sigma + tau_max * tau_max))

    log_p = np.array([math.log(p) for p in ps])
    amp = np.exp(-sigma * log_p)

    def panel_fn(nodes: np.ndarray) -> np.ndarray:
        val = np.ones_like(nodes)
        for lp, a in zip(log_p, amp):
            val *= 1.0 - 2.0 * a * np.cos(nodes * lp) + a * a
        return val / (sigma * sigma + nodes * nodes)

    width = math.pi / max(max_freq, 1.0)
    res = integrate_panels(
        panel_fn,
        0.0,
        tau_max,
        width=width,
        abs_tol=spec.abs_tol / 10.0,
        max_panels=spec.max_subdivisions,
    )
    tail_mean = mean * (math.pi / 2.0 - math.atan(tau_max / sigma)) / sigma
    value = (float(res.value) + tail_mean) / math.pi
    error = float(res.error) / math.pi + tail_bound
    return PlancherelResult(value, error, tau_max, res.panels)
