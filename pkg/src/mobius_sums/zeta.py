"""Riemann zeta off the critical strip by Euler-Maclaurin summation.

The kernels return ``(s - 1) * zeta(s)`` rather than ``zeta(s)``: in that form
the pole at s = 1 cancels analytically (the N^{1-s}/(s-1) tail becomes
N^{1-s}), so values near tau = 0 on the 1-line carry no cancellation.

With N = |tau|/2 + 20 summed terms the ratio |s| / (2 pi N) stays below 1/pi
and twelve Bernoulli corrections put the truncation well under 1e-13.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from scipy.special import bernoulli

N_CORRECTIONS = 12

_COEF = np.array(
    [bernoulli(2 * k)[2 * k] / math.factorial(2 * k) for k in range(1, N_CORRECTIONS + 1)]
)


@numba.njit(cache=True)
def _n_terms(tau_abs: float) -> int:
    return int(tau_abs / 2.0) + 20


_LOG_HI = np.zeros(1)
_LOG_LO = np.zeros(1)


def _log_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """log k for k < n split as hi + lo, grown geometrically and kept."""
    global _LOG_HI, _LOG_LO
    if len(_LOG_HI) < n:
        size = max(n, 2 * len(_LOG_HI), 1024)
        exact = np.log(np.arange(size, dtype=np.longdouble).clip(1))
        _LOG_HI = exact.astype(float)
        _LOG_LO = (exact - _LOG_HI.astype(np.longdouble)).astype(float)
    return _LOG_HI, _LOG_LO


@numba.njit(cache=True)
def _split(a: float) -> tuple[float, float]:
    c = 134217729.0 * a  # 2^27 + 1
    hi = c - (c - a)
    return hi, a - hi


@numba.njit(cache=True)
def _phase(tau: float, hi: float, lo: float) -> tuple[float, float]:
    """cos and sin of tau * (hi + lo) with the product rounding compensated.

    At tau = 1e4 the plain product loses ~1e-11 of angle, which the head sum
    would pass straight into zeta.
    """
    p = tau * hi
    th, tl = _split(tau)
    hh, hl = _split(hi)
    e = ((th * hh - p) + th * hl + tl * hh) + tl * hl + tau * lo
    c = math.cos(p)
    s = math.sin(p)
    return c - e * s, s + e * c


@numba.njit(cache=True)
def _em_tail(s: complex, n: int, acc: complex, coef: np.ndarray) -> complex:
    ln = math.log(n)
    sigma, tau = s.real, s.imag
    n_ms = math.exp(-sigma * ln) * complex(math.cos(tau * ln), -math.sin(tau * ln))
    acc += 0.5 * n_ms
    term = n_ms / n
    poch = s
    for k in range(coef.shape[0]):
        acc += coef[k] * poch * term
        poch = poch * (s + 2 * k + 1) * (s + 2 * k + 2)
        term = term / (n * n)
    return (s - 1.0) * acc + n_ms * n


@numba.njit(cache=True)
def _s1zeta_scalar(sigma: float, tau: float, coef: np.ndarray, log_hi, log_lo) -> complex:
    n = _n_terms(abs(tau))
    acc_re = 0.0
    acc_im = 0.0
    for k in range(1, n):
        a = math.exp(-sigma * log_hi[k])
        c, s = _phase(tau, log_hi[k], log_lo[k])
        acc_re += a * c
        acc_im -= a * s
    return _em_tail(complex(sigma, tau), n, complex(acc_re, acc_im), coef)


@numba.njit(cache=True)
def _s1zeta_panels(mids, half, xk, sigma, coef, log_hi, log_lo, out):
    """(s-1) zeta(s) at s = sigma + i(mid + half * xk[j]) for every panel."""
    nn = xk.shape[0]
    tmax = 0.0
    for i in range(mids.shape[0]):
        tmax = max(tmax, abs(mids[i]) + half)
    nmax = _n_terms(tmax)
    amps = np.empty(nmax)
    for k in range(1, nmax):
        amps[k] = math.exp(-sigma * log_hi[k])
    rc = np.empty((nmax, nn))
    rs = np.empty((nmax, nn))
    for k in range(1, nmax):
        for j in range(nn):
            ang = half * xk[j] * log_hi[k]
            rc[k, j] = math.cos(ang)
            rs[k, j] = math.sin(ang)
    acc_re = np.empty(nn)
    acc_im = np.empty(nn)
    for i in range(mids.shape[0]):
        mid = mids[i]
        n = _n_terms(abs(mid) + half)
        acc_re[:] = 0.0
        acc_im[:] = 0.0
        for k in range(1, n):
            c, s = _phase(mid, log_hi[k], log_lo[k])
            cb = amps[k] * c
            sb = -amps[k] * s
            for j in range(nn):
                # (cb + i sb) * (rc - i rs)
                acc_re[j] += cb * rc[k, j] + sb * rs[k, j]
                acc_im[j] += sb * rc[k, j] - cb * rs[k, j]
        for j in range(nn):
            s = complex(sigma, mid + half * xk[j])
            out[i, j] = _em_tail(s, n, complex(acc_re[j], acc_im[j]), coef)


def s1zeta(sigma: float, tau) -> complex | np.ndarray:
    """(s - 1) * zeta(s) at s = sigma + i*tau, for sigma > 0; tau may be an array."""
    tau_arr = np.asarray(tau, dtype=float)
    hi, lo = _log_table(_n_terms(float(np.max(np.abs(tau_arr), initial=0.0))))
    if tau_arr.ndim == 0:
        return _s1zeta_scalar(float(sigma), float(tau_arr), _COEF, hi, lo)
    tau = tau_arr
    flat = np.array([_s1zeta_scalar(float(sigma), t, _COEF, hi, lo) for t in tau.ravel()])
    return flat.reshape(tau.shape)


def s1zeta_panels(mids: np.ndarray, half: float, nodes: np.ndarray, sigma: float) -> np.ndarray:
    out = np.empty((len(mids), len(nodes)), dtype=np.complex128)
    mids = np.ascontiguousarray(mids, dtype=float)
    hi, lo = _log_table(_n_terms(float(np.max(np.abs(mids), initial=0.0)) + half))
    _s1zeta_panels(mids, float(half), nodes, float(sigma), _COEF, hi, lo, out)
    return out


def zeta(s: complex) -> complex:
    """zeta(s) for Re s > 0, s != 1."""
    s = complex(s)
    if s == 1:
        raise ZeroDivisionError("zeta has a pole at s = 1")
    return s1zeta(s.real, s.imag) / (s - 1)


def zeta_one_line(tau):
    """zeta(1 + i*tau) for tau != 0 (scalar or array)."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr == 0):
        raise ZeroDivisionError("zeta has a pole at s = 1 (tau = 0)")
    return s1zeta(1.0, tau) / (1j * tau_arr)
