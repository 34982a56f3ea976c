"""Limit constants L, L(m), lambda(h; sigma) and B.

Every tau-integral here has an integrand of the shape

    compensator(tau) * prod_{p <= prime_max} u_p(tau) * sum_k coef[k] * prod_{p | k} w_p(tau)

The raw Euler factors are 1 - 2 cos(tau log p) / p + O(1/p^2), and that
product converges far too slowly.  Each factor is divided by the matching
factor of |zeta(1 + s)|^{-2} (and of zeta(1 + 2 sigma) off the 1-line), so
u_p = 1 + O(1/p^2), and the zeta values are put back once per tau as the
compensator.  The kernel sum carries the part that depends on m or h: w_p
swaps the generic factor at p for f(p; s).

Error budgets have three parts:

* quadrature: the Kronrod estimate, plus the residual of the quadratic patch
  on [0, zero_eps);
* tail: beyond ``tau_max`` the integrand is replaced by its mean value (each
  Euler factor is linear in cos(tau log p), and these decorrelate); the tail
  is added to the value and its full size is booked as error;
* truncation: |value| * 4 * sum_{p > prime_max} 1/p^2, with the prime sum
  taken from the prime-counting density, E1(log prime_max).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numba
import numpy as np
from scipy.special import exp1

from . import arith
from .config import DEFAULT_BUDGET, Budget, NotSquarefree, check_budget
from .quadrature import KRONROD_NODES, integrate_panel_fn
from .zeta import s1zeta_panels, zeta

FAMILY_INTRO = 0
FAMILY_LOCAL = 1
FAMILY_LAMBDA = 2


@dataclass(frozen=True)
class QuadratureSpec:
    tau_max: float = 1.0e4
    prime_max: int = 10**5
    abs_tol: float = 1.0e-8
    max_subdivisions: int = 4_000_000
    zero_eps: float = 1.0e-3

    def __post_init__(self) -> None:
        if not self.tau_max > 0:
            raise ValueError("tau_max must be > 0")
        if self.prime_max < 2:
            raise ValueError("prime_max must be >= 2")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if not 0 < self.zero_eps < self.tau_max / 3:
            raise ValueError("zero_eps must lie in (0, tau_max / 3)")

    def refined(self) -> QuadratureSpec:
        """Half the tolerance, twice the cutoffs."""
        return QuadratureSpec(
            tau_max=2 * self.tau_max,
            prime_max=2 * self.prime_max,
            abs_tol=self.abs_tol / 2,
            max_subdivisions=2 * self.max_subdivisions,
            zero_eps=self.zero_eps,
        )


@dataclass(frozen=True)
class Estimate:
    """A computed constant with its error budget broken down."""

    value: float
    error: float
    quadrature_error: float = 0.0
    tail: float = 0.0
    truncation_error: float = 0.0

    def __float__(self) -> float:
        return self.value


def prime_tail_inverse_square(prime_max: int) -> float:
    """sum_{p > P} 1/p^2 from the density 1/log t: int_P^inf dt/(t^2 log t) = E1(log P)."""
    return float(exp1(math.log(prime_max)))


def script_L(y: float) -> float:
    """exp{(log y)^{3/5} / (log log y)^{1/5}} for y > e."""
    if not y > math.e:
        raise ValueError(f"script_L needs y > e, got {y}")
    ly = math.log(y)
    return math.exp(ly**0.6 / math.log(ly) ** 0.2)


def big_B(spec: QuadratureSpec | None = None, tail_corrected: bool = False) -> Estimate:
    """prod_p (1 - (3p+1)/(p(p+1)^2)) truncated at prime_max.

    The omitted factors multiply to about exp(-3 sum_{p > P} 1/p^2), a 2e-7
    shift at P = 10^6.  ``tail_corrected`` applies that estimate; the bound
    4 sum 1/p^2 on the log error covers both forms.
    """
    spec = spec or QuadratureSpec()
    p = arith.primes_upto(spec.prime_max).astype(float)
    logs = np.log1p(-(3 * p + 1) / (p * (p + 1) ** 2))
    tail = prime_tail_inverse_square(spec.prime_max)
    log_value = math.fsum(logs.tolist()) - (3.0 * tail if tail_corrected else 0.0)
    value = math.exp(log_value)
    err = value * math.expm1(4.0 * tail)
    return Estimate(value, err, truncation_error=err)


# --------------------------------------------------------------------------
# Euler-product kernel
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _euler_panels(mids, half, xk, primes, in_product, n_kernel_primes, family, sigma,
                  kern_parent, kern_pidx, row_ptr, row_idx, row_val, out):
    """out[i, j, c] = prod_q u_q(t) * sum_k coef[c, k] h_k(t) at t = mids[i] + half xk[j].

    The coefficients come in compressed rows: component c uses kernels
    ``row_idx[row_ptr[c]:row_ptr[c + 1]]`` with weights from ``row_val``.

    Primes in ``primes[:n_kernel_primes]`` may divide a kernel; h_k is built
    as h[parent] * w[pidx].  Primes flagged out of the product still get a
    w value, relative to the generic factor's zeta proxy.
    """
    nn = xk.shape[0]
    nprime = primes.shape[0]
    nkern = kern_parent.shape[0]
    ncomp = row_ptr.shape[0] - 1
    nw = max(n_kernel_primes, 1)
    logp = np.log(primes)
    inv = 1.0 / primes
    amp = np.exp(-sigma * logp)
    ch = np.empty((nprime, nn))
    sh = np.empty((nprime, nn))
    for q in range(nprime):
        for j in range(nn):
            ang = half * xk[j] * logp[q]
            ch[q, j] = math.cos(ang)
            sh[q, j] = math.sin(ang)
    prod = np.empty(nn)
    w = np.ones((nw, nn))
    h = np.empty(nkern)
    for i in range(mids.shape[0]):
        mid = mids[i]
        prod[:] = 1.0
        for q in range(nprime):
            ang = mid * logp[q]
            cm = math.cos(ang)
            sm = math.sin(ang)
            ip = inv[q]
            a = amp[q]
            for j in range(nn):
                c = cm * ch[q, j] - sm * sh[q, j]
                if family == 2:
                    f = 1.0 - 2.0 * a * c + a * a
                    fac = (1.0 - ip) * (1.0 + f * ip)
                    base = (1.0 - 2.0 * a * ip * c + a * a * ip * ip) / (1.0 - a * a * ip)
                else:
                    f = 2.0 - 2.0 * c
                    if family == 0:
                        fac = (1.0 - ip) * (1.0 + (f - 1.0) * ip)
                    else:
                        fac = (1.0 - ip) * (1.0 - ip) * (1.0 + f * ip)
                    base = 1.0 - 2.0 * c * ip + ip * ip
                if in_product[q]:
                    prod[j] *= fac / base
                    if q < n_kernel_primes:
                        w[q, j] = f / fac
                elif q < n_kernel_primes:
                    w[q, j] = f / base
        for j in range(nn):
            h[0] = 1.0
            for k in range(1, nkern):
                h[k] = h[kern_parent[k]] * w[kern_pidx[k], j]
            for cidx in range(ncomp):
                acc = 0.0
                for e in range(row_ptr[cidx], row_ptr[cidx + 1]):
                    acc += row_val[e] * h[row_idx[e]]
                out[i, j, cidx] = prod[j] * acc


class _EulerIntegrand:
    """Panel function for one family and a list of kernel-weighted components.

    ``rows[c]`` maps squarefree kernels to coefficients; component c of the
    integrand is compensator * prod u_p * sum_k rows[c][k] * prod_{p|k} w_p.
    """

    def __init__(self, family: int, sigma: float, spec: QuadratureSpec,
                 rows: list[dict[int, float]]):
        self.family = family
        self.sigma = float(sigma)
        kernels = sorted({k for row in rows for k in row} | {1})
        kernel_primes = sorted({p for k in kernels for p in arith.prime_divisors(k)})
        taken = set(kernel_primes)
        rest = [p for p in arith.primes_upto(spec.prime_max).tolist() if p not in taken]
        order = kernel_primes + rest
        self.primes = np.array(order, dtype=np.float64)
        self.in_product = np.array([p <= spec.prime_max for p in order], dtype=np.bool_)
        self.n_kernel_primes = len(kernel_primes)
        self.max_log_p = math.log(max(order))

        # close the kernel set under dropping the largest prime, so h[k] = h[k/p] * w_p
        closed = {1}
        for k in kernels:
            acc = 1
            for p in arith.prime_divisors(k):
                acc *= p
                closed.add(acc)
        ks = sorted(closed)
        pos = {k: i for i, k in enumerate(ks)}
        ppos = {p: i for i, p in enumerate(kernel_primes)}
        self.parent = np.zeros(len(ks), dtype=np.int64)
        self.pidx = np.zeros(len(ks), dtype=np.int64)
        for i, k in enumerate(ks[1:], start=1):
            big = arith.prime_divisors(k)[-1]
            self.parent[i] = pos[k // big]
            self.pidx[i] = ppos[big]
        ptr, idx, val = [0], [], []
        for row in rows:
            for k, v in sorted(row.items()):
                idx.append(pos[k])
                val.append(float(v))
            ptr.append(len(idx))
        self.row_ptr = np.array(ptr, dtype=np.int64)
        self.row_idx = np.array(idx, dtype=np.int64)
        self.row_val = np.array(val, dtype=np.float64)
        self.ncomp = len(rows)
        self.zeta_2sigma = zeta(1.0 + 2.0 * sigma).real if family == FAMILY_LAMBDA else 1.0

    def __call__(self, mids: np.ndarray, half: float) -> np.ndarray:
        mids = np.ascontiguousarray(mids, dtype=float)
        out = np.empty((len(mids), len(KRONROD_NODES), self.ncomp))
        _euler_panels(mids, float(half), KRONROD_NODES, self.primes, self.in_product,
                      self.n_kernel_primes, self.family, self.sigma,
                      self.parent, self.pidx, self.row_ptr, self.row_idx, self.row_val, out)
        # s1zeta at 1 + s is s * zeta(1 + s), whose |.|^{-2} already holds the 1/|s|^2 weight
        z = s1zeta_panels(mids, half, KRONROD_NODES, 1.0 + self.sigma)
        return out * (self.zeta_2sigma / (z.real**2 + z.imag**2))[:, :, None]

    def at(self, taus: np.ndarray) -> np.ndarray:
        """Pointwise values, shape (len(taus), ncomp)."""
        taus = np.asarray(taus, dtype=float)
        # a zero-width panel evaluates every node at its midpoint
        return self(taus, 0.0)[:, 0, :]


@dataclass(frozen=True)
class _HalfLine:
    value: np.ndarray
    quadrature_error: np.ndarray
    panels: int


def _half_line(fn: _EulerIntegrand, spec: QuadratureSpec) -> _HalfLine:
    """int_0^tau_max of every component: quadratic patch on [0, eps), then Kronrod."""
    eps = spec.zero_eps
    g1, g2, g3 = fn.at(np.array([eps, 2 * eps, 3 * eps]))
    # even integrand: a + b t^2 through t = eps, 2 eps
    b = (g2 - g1) / (3 * eps * eps)
    a = g1 - b * eps * eps
    patch = a * eps + b * eps**3 / 3
    patch_err = np.abs(g3 - (a + 9 * b * eps * eps)) * eps
    width = math.pi / max(fn.max_log_p, 1.0)
    # keep one batch of panel values near 32 MB however many components there are
    batch = int(min(2048, max(16, 2**22 // (len(KRONROD_NODES) * fn.ncomp))))
    res = integrate_panel_fn(
        fn, eps, spec.tau_max,
        width=width, abs_tol=spec.abs_tol, max_panels=spec.max_subdivisions, batch=batch,
    )
    value = np.atleast_1d(res.value) + patch
    err = np.atleast_1d(res.error) + patch_err
    return _HalfLine(value, err, res.panels)


def _estimate(integral: float, quad_err: float, tail: float, prefactor: float,
              spec: QuadratureSpec) -> Estimate:
    value = prefactor * (integral + tail) / math.pi
    q = prefactor * quad_err / math.pi
    t = abs(prefactor * tail / math.pi)
    trunc = 4.0 * abs(value) * prime_tail_inverse_square(spec.prime_max)
    return Estimate(value, q + t + trunc, q, t, trunc)


def _check_kernel(n: int) -> None:
    if n < 1:
        raise ValueError("argument must be >= 1")


# --------------------------------------------------------------------------
# L
# --------------------------------------------------------------------------


def constant_L(spec: QuadratureSpec | None = None) -> Estimate:
    """L = (1/2pi) int_R prod_p (1 - 1/p)(1 + (f(p; i tau) - 1)/p) dtau / tau^2."""
    spec = spec or QuadratureSpec()
    fn = _EulerIntegrand(FAMILY_INTRO, 0.0, spec, [{1: 1.0}])
    half = _half_line(fn, spec)
    mean = 6.0 / math.pi**2
    tail = mean / spec.tau_max
    return _estimate(float(half.value[0]), float(half.quadrature_error[0]), tail, 1.0, spec)


# --------------------------------------------------------------------------
# L(m)
# --------------------------------------------------------------------------


_MEAN_PRIMES = 10**6


@lru_cache(maxsize=None)
def _generic_local_mean() -> float:
    """prod_p (1-1/p)^2 (1+2/p), the tau-mean of the generic factor (2 being the mean of f)."""
    p = arith.primes_upto(_MEAN_PRIMES).astype(float)
    return math.exp(math.fsum(np.log((1 - 1 / p) ** 2 * (1 + 2 / p)).tolist()))


def _local_mean(k: int) -> float:
    """tau-mean of prod_{p nmid k}(1-1/p)^2(1+f/p) * prod_{p | k} f."""
    mean = _generic_local_mean()
    for p in arith.prime_divisors(k):
        mean *= 2.0 / ((1 - 1 / p) ** 2 * (1 + 2 / p))
    return mean


def _local_prefactor(m: int) -> float:
    k = arith.kernel(m)
    return (arith.phi(m) / m) ** 2 / k


def _local_integrals(kernels: list[int], spec: QuadratureSpec,
                     rows: list[dict[int, float]] | None = None) -> tuple[_HalfLine, list[float]]:
    rows = rows if rows is not None else [{k: 1.0} for k in kernels]
    fn = _EulerIntegrand(FAMILY_LOCAL, 0.0, spec, rows)
    half = _half_line(fn, spec)
    tails = [math.fsum(v * _local_mean(k) for k, v in row.items()) / spec.tau_max for row in rows]
    return half, tails


def local_L_many(ms: list[int], spec: QuadratureSpec | None = None) -> dict[int, Estimate]:
    """L(m) for several m in one pass; the integrand depends on kernel(m) only."""
    spec = spec or QuadratureSpec()
    for m in ms:
        _check_kernel(m)
    kernels = sorted({arith.kernel(m) for m in ms})
    half, tails = _local_integrals(kernels, spec)
    by_kernel = {k: i for i, k in enumerate(kernels)}
    out = {}
    for m in ms:
        i = by_kernel[arith.kernel(m)]
        out[m] = _estimate(float(half.value[i]), float(half.quadrature_error[i]),
                           tails[i], _local_prefactor(m), spec)
    return out


def local_L(m: int, spec: QuadratureSpec | None = None) -> Estimate:
    """L(m) = phi(m)^2/(2 pi m^2 k(m)) int f(m; i tau) prod_{p nmid m}(1-1/p)^2(1+f(p; i tau)/p) dtau/tau^2."""
    return local_L_many([m], spec)[m]


@dataclass(frozen=True)
class PartialSum:
    """sum_{m <= m_max} L(m)/m with the checkpoints used for the tail guess."""

    m_max: int
    value: float
    error: float
    tail: float
    checkpoints: dict[int, float]

    def __float__(self) -> float:
        return self.value


def sum_Lm_over_m(m_max: int, spec: QuadratureSpec | None = None,
                  budget: Budget = DEFAULT_BUDGET) -> PartialSum:
    """Partial sum of L(m)/m, grouped by kernel.

    L(m)/m = phi(m)^2/(m^3 k(m)) * I(k(m)), so one integral per squarefree
    kernel suffices; the integrals for m_max/4, m_max/2 and m_max share a
    pass.  Increments between those checkpoints shrink roughly like
    1/sqrt(m), so the remainder is guessed as the last increment / (sqrt 2 - 1)
    and booked as error (not added).
    """
    spec = spec or QuadratureSpec()
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    check_budget(m_max, budget.max_window_y, "m_max")
    marks = sorted({max(1, m_max // 4), max(1, m_max // 2), m_max})
    ker = arith.kernel_upto(m_max)
    phi = arith.phi_upto(m_max)
    m = np.arange(1, m_max + 1, dtype=float)
    weight = (phi[1:] / m) ** 2 / (m * ker[1:])
    rows = []
    for mark in marks:
        row: dict[int, float] = {}
        ks = ker[1 : mark + 1]
        sums = np.bincount(ks, weights=weight[:mark])
        for k in np.nonzero(sums)[0].tolist():
            row[int(k)] = float(sums[k])
        rows.append(row)
    half, tails = _local_integrals([], spec, rows)
    ests = [
        _estimate(float(half.value[i]), float(half.quadrature_error[i]), tails[i], 1.0, spec)
        for i in range(len(rows))
    ]
    final = ests[-1]
    if len(marks) >= 2:
        tail_guess = abs(ests[-1].value - ests[-2].value) / (math.sqrt(2) - 1)
    else:
        tail_guess = 0.0
    return PartialSum(
        m_max=m_max,
        value=final.value,
        error=final.error + tail_guess,
        tail=tail_guess,
        checkpoints={mk: e.value for mk, e in zip(marks, ests)},
    )


# --------------------------------------------------------------------------
# lambda(h; sigma)
# --------------------------------------------------------------------------


def _lambda_mean(h: int, sigma: float) -> float:
    p = arith.primes_upto(_MEAN_PRIMES).astype(float)
    a2 = p ** (-2.0 * sigma)
    logs = np.log1p(a2 / p - 1 / p**2 - a2 / p**2)
    mean = math.exp(math.fsum(logs.tolist()))
    for q in arith.prime_divisors(h):
        generic = 1 + q ** (-1 - 2 * sigma) - q**-2.0 - q ** (-2 - 2 * sigma)
        mean *= (1 + q ** (-2 * sigma)) / generic
    return mean


def lambda_h_many(hs: list[int], sigma: float,
                  spec: QuadratureSpec | None = None) -> dict[int, Estimate]:
    """lambda(h; sigma) for several squarefree h at one sigma."""
    spec = spec or QuadratureSpec()
    if not sigma > 0.5:
        raise ValueError("sigma must be > 1/2")
    for h in hs:
        _check_kernel(h)
        if not arith.is_squarefree(h):
            raise NotSquarefree(f"h={h} is not squarefree")
    uniq = sorted(set(hs))
    fn = _EulerIntegrand(FAMILY_LAMBDA, sigma, spec, [{h: 1.0} for h in uniq])
    half = _half_line(fn, spec)
    weight_tail = (math.pi / 2 - math.atan(spec.tau_max / sigma)) / sigma
    out = {}
    for i, h in enumerate(uniq):
        tail = _lambda_mean(h, sigma) * weight_tail
        out[h] = _estimate(float(half.value[i]), float(half.quadrature_error[i]), tail,
                           arith.phi(h) / h**2, spec)
    return {h: out[h] for h in hs}


def lambda_h(h: int, sigma: float, spec: QuadratureSpec | None = None) -> Estimate:
    """lambda(h; sigma) = phi(h)/(2 pi h^2) int f(h; s) prod_{p nmid h}(1-1/p)(1+f(p; s)/p) dtau/|s|^2."""
    return lambda_h_many([h], sigma, spec)[h]


# --------------------------------------------------------------------------
# Abel-weighted mean of T(y; m)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmaLimit:
    value: float
    tail_bound: float
    sup_T: float


def sigma_limit_check(m: int, sigma: float, y_max: int,
                      budget: Budget = DEFAULT_BUDGET) -> SigmaLimit:
    """sigma * int_0^{log y_max} T(e^u; m) e^{-sigma u} du, integrated exactly.

    T(e^u; m) only changes when e^u crosses an integer, so on [log y, log(y+1))
    it equals T(y; m) and the integral is sum_y T(y) (y^-sigma - (y+1)^-sigma).
    The discarded part is bounded by max_{y <= y_max} |T(y; m)| * y_max^-sigma.
    """
    from .engines import t_ym_table

    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < sigma <= 0.25:
        raise ValueError("sigma must lie in (0, 1/4]")
    if y_max < 2:
        raise ValueError("y_max must be >= 2")
    table = t_ym_table(y_max, m, budget=budget)  # T(y; m) for y = 1..y_max
    y = np.arange(1, y_max, dtype=float)
    steps = y**-sigma - (y + 1) ** -sigma
    value = math.fsum((table[: y_max - 1] * steps).tolist())
    sup = float(np.max(np.abs(table)))
    return SigmaLimit(value, sup * y_max**-sigma, sup)


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


@dataclass
class ConstantsReport:
    L: float
    B: float
    L_m: dict[int, float] = field(default_factory=dict)
    lambda_h: dict[tuple[int, float], float] = field(default_factory=dict)
    error_estimates: dict[str, float] = field(default_factory=dict)
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)

    def to_json(self) -> dict:
        from . import __version__

        return {
            "L": self.L,
            "B": self.B,
            "L_m": {str(m): v for m, v in sorted(self.L_m.items())},
            "lambda_h": {f"{h},{s!r}": v for (h, s), v in sorted(self.lambda_h.items())},
            "errors": dict(sorted(self.error_estimates.items())),
            "spec": asdict(self.spec),
            "version": __version__,
        }


def build_report(spec: QuadratureSpec | None = None, m_max: int = 100,
                 lambda_points: tuple[tuple[int, float], ...] = ((1, 1.0),)) -> ConstantsReport:
    """L, B, L(m) for m <= m_max and the requested lambda values, with error fields."""
    spec = spec or QuadratureSpec()
    big_l = constant_L(spec)
    b = big_B(spec)
    lm = local_L_many(list(range(1, m_max + 1)), spec)
    rep = ConstantsReport(L=big_l.value, B=b.value, spec=spec)
    rep.error_estimates["L"] = big_l.error
    rep.error_estimates["B"] = b.error
    for m, est in lm.items():
        rep.L_m[m] = est.value
        rep.error_estimates[f"L_m[{m}]"] = est.error
    for h, s in lambda_points:
        est = lambda_h(h, s, spec)
        rep.lambda_h[(h, s)] = est.value
        rep.error_estimates[f"lambda_h[{h},{s!r}]"] = est.error
    return rep
