"""Experiment runners behind the command-line interface.

Every runner returns plain records; serialization lives in :mod:`.report`.
Runners never print to standard output. Progress and soft warnings go
through :mod:`logging`, which the CLI routes to standard error.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from . import arith, balance, engines
from .config import DEFAULT_BUDGET, Budget, BudgetExceeded
from .constants import QuadratureSpec, build_report, constant_L, script_L

log = logging.getLogger(__name__)

KINDS = ("engines", "identities", "convergence", "theorem-scan", "constants", "fit")
GRID_SEED = 20_081_132  # fixed: the default engine grid must not depend on --seed

T = TypeVar("T")
R = TypeVar("R")


def _ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Map in parallel, return results in input order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str
    grid: list[engines.SumQuery]
    xi: int | None = None
    output_path: str | None = None
    format: str = "csv"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.format not in ("csv", "json"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.kind == "theorem-scan":
            if self.xi is None:
                raise ValueError("theorem-scan needs xi")
            for q in self.grid:
                if not self.xi <= q.z <= q.x / self.xi:
                    raise ValueError(f"need xi <= z <= x/xi at x={q.x}, z={q.z}")


@dataclass(frozen=True)
class ConvergenceRecord:
    scale: int
    value: float
    reference: float
    abs_error: float
    script_L: float
    engine: str
    wall_time_ms: int = 0

    FIELDS = ("scale", "value", "reference", "abs_error", "script_L", "engine", "wall_time_ms")

    def __post_init__(self) -> None:
        if not self.script_L > 1:
            raise ValueError("script_L must exceed 1")
        if self.abs_error < 0:
            raise ValueError("abs_error must be >= 0")

    @classmethod
    def make(cls, scale: int, value: float, reference: float, script: float,
             engine: str, wall_time_ms: int = 0) -> ConvergenceRecord:
        return cls(scale, value, reference, abs(value - reference), script, engine, wall_time_ms)


@dataclass(frozen=True)
class FitResult:
    c_hat: float
    amplitude: float
    residual_rms: float
    points_used: int


def _script_L_at(scale: float) -> float:
    # the scale function needs y > e; smaller scales are reported at y = 3
    return script_L(max(float(scale), 3.0))


def _ms_since(t0: float, timing: bool) -> int:
    return int(round((time.perf_counter() - t0) * 1000)) if timing else 0


# --------------------------------------------------------------------------
# engines
# --------------------------------------------------------------------------

S_XZ_ENGINES: dict[str, Callable[..., int]] = {
    "direct": engines.s_xz_direct,
    "floor": engines.s_xz_floor,
    "kernel": engines.s_xz_kernel,
}


@dataclass(frozen=True)
class EngineRow:
    x: int
    z: int
    values: dict[str, int | None]
    status: str  # ok, mismatch or skipped


@dataclass
class EngineReport:
    rows: list[EngineRow]

    @property
    def mismatches(self) -> int:
        return sum(r.status == "mismatch" for r in self.rows)


def default_engine_grid(side: int = 300, n_random: int = 100, x_max: int = 10**5) -> list[engines.SumQuery]:
    """Every (x, z) with x, z <= side, then n_random seeded points with x <= x_max."""
    grid = [engines.SumQuery(x=x, z=z) for x in range(1, side + 1) for z in range(1, side + 1)]
    rng = np.random.default_rng(GRID_SEED)
    xs = rng.integers(1, x_max + 1, size=n_random)
    for x in xs.tolist():
        z = int(rng.integers(1, x + 1))
        grid.append(engines.SumQuery(x=x, z=z))
    return grid


def _engine_row(q: engines.SumQuery, budget: Budget) -> EngineRow:
    values: dict[str, int | None] = {}
    for name, fn in S_XZ_ENGINES.items():
        try:
            values[name] = fn(q.x, q.z, budget)
        except BudgetExceeded:
            values[name] = None
    got = {v for v in values.values() if v is not None}
    if len(got) > 1:
        status = "mismatch"
    elif None in values.values():
        status = "skipped"  # some engine was over budget; the rest still agree
    else:
        status = "ok"
    return EngineRow(q.x, q.z, values, status)


def run_engine_suite(plan: ExperimentPlan, budget: Budget = DEFAULT_BUDGET,
                     threads: int = 1) -> EngineReport:
    """All S(x, z) engines at every grid point; rows flag disagreements."""
    if plan.kind != "engines":
        raise ValueError("plan kind must be 'engines'")
    rows = _ordered_map(lambda q: _engine_row(q, budget), plan.grid, threads)
    report = EngineReport(rows)
    if report.mismatches:
        log.warning("%d engine mismatches", report.mismatches)
    return report


# --------------------------------------------------------------------------
# identities
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityFamily:
    name: str
    passed: bool
    worst_residual: float
    cases: int
    exact: bool  # exact families decide the exit status


@dataclass(frozen=True)
class IdentityScale:
    """Sizes of every identity family; ``full`` matches the documented scales."""

    symmetry_k: int = 10**4
    kernel_n: int = 10**4
    plancherel_n: tuple[int, ...] = (1, 2, 6, 30, 210, 2310)
    plancherel_sigma: tuple[float, ...] = (0.6, 1.0, 2.0)
    rational_y: int = 60
    rational_m: int = 30
    float_t_y: int = 1000
    float_t_m: tuple[int, ...] = (1, 2, 6, 30)
    mean_x: int = 300
    windows_y: tuple[int, ...] = (100, 1000, 10**4)
    windows_m: tuple[int, ...] = (1, 2, 6, 30)
    identity_x: int = 500
    identity_z: int = 20
    squarefree_h: tuple[int, ...] = (1, 2, 3, 5, 6, 30, 210)
    squarefree_y: tuple[int, ...] = (10**3, 10**4, 10**5, 10**6, 10**7)

    @classmethod
    def smoke(cls) -> IdentityScale:
        return cls(symmetry_k=300, kernel_n=300, plancherel_n=(1, 6, 30),
                   plancherel_sigma=(1.0,), rational_y=12, rational_m=6, float_t_y=100,
                   mean_x=60, windows_y=(100,), identity_x=80, identity_z=6,
                   squarefree_y=(10**3, 10**4))


def _symmetry_family(scale: IdentityScale) -> IdentityFamily:
    worst = 0
    cases = 0
    mu = arith.mobius_upto(scale.symmetry_k)
    for k in range(2, scale.symmetry_k + 1):
        if mu[k] == 0:
            continue
        zs = np.arange(1, k + 1)
        left = balance.balance_many(k, zs)
        right = -int(mu[k]) * balance.complement_many(k, zs)
        worst = max(worst, int(np.max(np.abs(left - right))))
        cases += k
    return IdentityFamily("symmetry", worst == 0, float(worst), cases, True)


def _kernel_family(scale: IdentityScale) -> IdentityFamily:
    worst = 0
    cases = 0
    ker = arith.kernel_upto(scale.kernel_n)
    for n in range(1, scale.kernel_n + 1):
        zs = np.arange(1, n + 1)
        diff = balance.balance_many(n, zs) - balance.balance_many(int(ker[n]), zs)
        worst = max(worst, int(np.max(np.abs(diff))))
        cases += n
    return IdentityFamily("kernel-invariance", worst == 0, float(worst), cases, True)


def _vanishing_tail_family(scale: IdentityScale) -> IdentityFamily:
    worst = 0
    cases = 0
    mu = arith.mobius_upto(scale.symmetry_k)
    for k in range(2, scale.symmetry_k + 1):
        if mu[k] == 0:
            continue
        zs = np.arange(k, min(2 * k, scale.symmetry_k) + 1)
        worst = max(worst, int(np.max(np.abs(balance.balance_many(k, zs)))))
        cases += len(zs)
    return IdentityFamily("vanishing-tail", worst == 0, float(worst), cases, True)


def _plancherel_family(scale: IdentityScale, tol: float = 1e-8) -> IdentityFamily:
    worst = 0.0
    cases = 0
    for n in scale.plancherel_n:
        for s in scale.plancherel_sigma:
            lhs = balance.plancherel_lhs(n, s)
            rhs = balance.plancherel_rhs(n, s).value
            worst = max(worst, abs(lhs - rhs))
            cases += 1
    return IdentityFamily("plancherel", worst <= tol, worst, cases, False)


def _rational_t_family(scale: IdentityScale, budget: Budget) -> IdentityFamily:
    bad = 0
    cases = 0
    for m in range(1, scale.rational_m + 1):
        for y in range(1, scale.rational_y + 1):
            a = engines.t_ym_naive(y, m, exact=True, budget=budget)
            b = engines.t_ym_rearranged(y, m, exact=True, budget=budget)
            bad += a != b
            cases += 1
    return IdentityFamily("rearrangement-rational", bad == 0, float(bad), cases, True)


def _rel(a: float, b: float) -> float:
    # T(y; m) vanishes at some small y, e.g. T(2; 2)
    return abs(a - b) / abs(b) if b else abs(a - b)


def _float_t_family(scale: IdentityScale, budget: Budget, tol: float = 1e-12) -> IdentityFamily:
    worst = 0.0
    cases = 0
    for m in scale.float_t_m:
        table = engines.t_ym_table(scale.float_t_y, m, budget)
        for y in sorted({1, 2, 10, scale.float_t_y // 2, scale.float_t_y}):
            a = engines.t_ym_naive(y, m, budget=budget)
            b = engines.t_ym_rearranged(y, m, budget=budget)
            c = float(table[y - 1])
            worst = max(worst, _rel(a, b), _rel(c, b))
            cases += 1
    return IdentityFamily("rearrangement-float", worst <= tol, worst, cases, False)


def _mean_family(scale: IdentityScale, budget: Budget) -> IdentityFamily:
    """|S(x, z) - x S(z)| <= 2 z^2 where z^2 <= x, and 1 <= S(x, z) <= 3x."""
    worst = 0.0
    cases = 0
    ok = True
    sz = {z: engines.s_z_fast(z) for z in range(1, math.isqrt(scale.mean_x) + 1)}
    for x in range(1, scale.mean_x + 1):
        for z in range(1, x + 1):
            s = engines.s_xz_direct(x, z, budget)
            ok &= 1 <= s <= 3 * x
            if z * z <= x:
                ratio = abs(s - x * sz[z]) / (z * z)
                worst = max(worst, ratio)
                cases += 1
    return IdentityFamily("mean-value", ok and worst <= 2.0, worst, cases, False)


def _window_family(scale: IdentityScale, budget: Budget, tol: float = 1e-12) -> IdentityFamily:
    """Summing a_m(j, y) over every window j = 1..y rebuilds T(y; m)."""
    worst = 0.0
    cases = 0
    for y in scale.windows_y:
        for m in scale.windows_m:
            total = float(np.sum(engines.a_m_windows(y, m, budget)))
            rebuilt = engines.SIX_OVER_PI2 * total / arith.psi(m)
            t = engines.t_ym_rearranged(y, m, budget=budget)
            worst = max(worst, _rel(rebuilt, t))
            cases += 1
    return IdentityFamily("window-reconstruction", worst <= tol, worst, cases, False)


def _symmetry_decomposition_family(scale: IdentityScale, budget: Budget) -> IdentityFamily:
    bad = 0
    cases = 0
    for z in range(1, scale.identity_z + 1):
        for x in range(z, scale.identity_x + 1):
            lhs, rhs = engines.symmetry_decomposition_check(x, z, budget)
            bad += lhs != rhs
            cases += 1
    return IdentityFamily("symmetry-decomposition", bad == 0, float(bad), cases, True)


def _squarefree_family(scale: IdentityScale, bound: float = 5.0) -> IdentityFamily:
    """|count - (6/pi^2) y h/psi(h)| / (r(h) sqrt(y)) stays below ``bound``."""
    worst = 0.0
    cases = 0
    for h in scale.squarefree_h:
        for y in scale.squarefree_y:
            count = arith.squarefree_coprime_count(y, h)
            main = engines.SIX_OVER_PI2 * y * h / arith.psi(h)
            worst = max(worst, abs(count - main) / (arith.r(h) * math.sqrt(y)))
            cases += 1
    return IdentityFamily("squarefree-count", worst <= bound, worst, cases, False)


def run_identity_suite(scale: IdentityScale | None = None,
                       budget: Budget = DEFAULT_BUDGET) -> list[IdentityFamily]:
    """Every per-integer and per-sum identity family with its worst residual."""
    scale = scale or IdentityScale()
    runners = [
        lambda: _symmetry_family(scale),
        lambda: _kernel_family(scale),
        lambda: _vanishing_tail_family(scale),
        lambda: _plancherel_family(scale),
        lambda: _rational_t_family(scale, budget),
        lambda: _float_t_family(scale, budget),
        lambda: _mean_family(scale, budget),
        lambda: _window_family(scale, budget),
        lambda: _symmetry_decomposition_family(scale, budget),
        lambda: _squarefree_family(scale),
    ]
    out = []
    for run in runners:
        fam = run()
        log.info("identity family %s: %s (worst %g over %d cases)",
                 fam.name, "pass" if fam.passed else "FAIL", fam.worst_residual, fam.cases)
        out.append(fam)
    return out


# --------------------------------------------------------------------------
# convergence and the theorem scan
# --------------------------------------------------------------------------


@dataclass
class ScanResult:
    records: list[ConvergenceRecord]
    warnings: list[str] = field(default_factory=list)


def _weakly_decreasing(errors: Iterable[float]) -> bool:
    errs = list(errors)
    return all(b <= a for a, b in zip(errs, errs[1:]))


def run_convergence(z_points: Sequence[int], spec: QuadratureSpec | None = None,
                    L_ref: float | None = None, threads: int = 1,
                    timing: bool = False) -> ScanResult:
    """S(z) by the fast engine against L at each z."""
    if not z_points:
        raise ValueError("z_points must be nonempty")
    if any(b <= a for a, b in zip(z_points, z_points[1:])):
        raise ValueError("z_points must be increasing")
    if L_ref is None:
        L_ref = constant_L(spec or QuadratureSpec()).value

    def one(z: int) -> ConvergenceRecord:
        t0 = time.perf_counter()
        v = engines.s_z_fast(z)
        log.info("S(z) at z=%d done", z)
        return ConvergenceRecord.make(z, v, L_ref, _script_L_at(z), "s_z_fast", _ms_since(t0, timing))

    records = _ordered_map(one, list(z_points), threads)
    warnings = []
    top = [r for r in records if r.scale * 10 >= records[-1].scale]
    if not _weakly_decreasing(r.abs_error for r in top):
        warnings.append("abs_error is not weakly decreasing across the top decade")
    for w in warnings:
        log.warning(w)
    return ScanResult(records, warnings)


def z_from_rule(x: int, rule: str) -> int:
    """z for the rules sqrt, fixed:<z> and ratio:<k> (z = floor(x^{1/k}))."""
    if rule == "sqrt":
        return math.isqrt(x)
    kind, _, arg = rule.partition(":")
    if kind == "fixed" and arg:
        return int(arg)
    if kind == "ratio" and arg:
        k = int(arg)
        if k < 1:
            raise ValueError("ratio needs k >= 1")
        z = int(round(x ** (1.0 / k)))
        while z**k > x:
            z -= 1
        while (z + 1) ** k <= x:
            z += 1
        return z
    raise ValueError(f"unknown z rule {rule!r}")


def regime(x: int, z: int, c_hat: float) -> str:
    """Which of the small / middle / large z ranges (x, z) falls in, for exponent c_hat."""
    width = _script_L_at(x) ** (2 * c_hat)
    root = math.sqrt(x)
    if z <= root / width:
        return "small"
    if z <= root * width:
        return "middle"
    return "large"


def run_theorem_scan(xi: int, x_points: Sequence[int], z_rule: str, L_ref: float,
                     c_hat: float, budget: Budget = DEFAULT_BUDGET, threads: int = 1,
                     timing: bool = False) -> ScanResult:
    """S(x, z)/x against L along x_points, with z from the rule and xi <= z <= x/xi."""
    if xi < 1:
        raise ValueError("xi must be >= 1")
    if not x_points:
        raise ValueError("x_points must be nonempty")
    grid = [engines.SumQuery(x=x, z=z_from_rule(x, z_rule)) for x in x_points]
    plan = ExperimentPlan("theorem-scan", grid, xi=xi)
    scale_L = _script_L_at(3 * xi)

    def one(q: engines.SumQuery) -> ConvergenceRecord:
        t0 = time.perf_counter()
        v = engines.s_xz_direct(q.x, q.z, budget) / q.x
        tag = f"direct z={q.z} {regime(q.x, q.z, c_hat)}"
        log.info("S(x, z) at x=%d, z=%d done", q.x, q.z)
        return ConvergenceRecord.make(q.x, v, L_ref, scale_L, tag, _ms_since(t0, timing))

    records = _ordered_map(one, plan.grid, threads)
    warnings = []
    if not _weakly_decreasing(r.abs_error for r in records):
        warnings.append("abs_error is not weakly decreasing along x")
    for w in warnings:
        log.warning(w)
    return ScanResult(records, warnings)


# --------------------------------------------------------------------------
# exponent fit
# --------------------------------------------------------------------------


def fit_exponent(records: Sequence[ConvergenceRecord]) -> FitResult:
    """Least squares of log(abs_error) on -c log(script_L) + log(amplitude)."""
    usable = [r for r in records if r.abs_error > 0]
    if not usable and records:
        raise ValueError("all errors are zero")
    if len(usable) < 3:
        raise ValueError(f"need at least 3 records with abs_error > 0, got {len(usable)}")
    lx = np.log([r.script_L for r in usable])
    ly = np.log([r.abs_error for r in usable])
    if np.ptp(lx) == 0:
        raise ValueError("all records share one scale")
    design = np.column_stack((-lx, np.ones_like(lx)))
    (c_hat, log_amp), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ np.array([c_hat, log_amp])
    rms = float(np.sqrt(np.mean(resid**2)))
    return FitResult(float(c_hat), float(math.exp(log_amp)), rms, len(usable))


def synthetic_records(c: float, scales: Sequence[int], noise: float = 0.0,
                      seed: int | None = None) -> list[ConvergenceRecord]:
    """Records with abs_error = script_L(scale)^-c times a uniform (1 +- noise) factor."""
    rng = np.random.default_rng(seed)
    out = []
    for s in scales:
        sl = _script_L_at(s)
        factor = 1.0 + noise * rng.uniform(-1.0, 1.0) if noise else 1.0
        err = sl**-c * factor
        out.append(ConvergenceRecord(s, err, 0.0, err, sl, "synthetic"))
    return out


# --------------------------------------------------------------------------
# constants
# --------------------------------------------------------------------------


def constants_payload(spec: QuadratureSpec, m_max: int = 100) -> dict:
    """The constants report as a json-ready dict."""
    return build_report(spec, m_max=m_max).to_json()


DEFAULT_Z_POINTS = (10**2, 10**3, 10**4, 10**5, 10**6)
DEFAULT_X_POINTS = (10**5, 10**6, 10**7)
