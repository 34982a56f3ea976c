"""Command-line front end: ``mobius-sums <subcommand> [options]``.

Data goes to ``--out`` (standard output by default); progress and warnings go
to standard error.  A json config file may supply any option by its long
name with dashes replaced by underscores; options given on the command line
win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

from . import __version__, engines, experiments, report
from .config import DEFAULT_BUDGET, Budget
from .constants import QuadratureSpec

THREADS_ENV = "MOBIUS_SUMS_THREADS"

ENGINE_COLUMNS = ("x", "z", "direct", "floor", "kernel", "status")
IDENTITY_COLUMNS = ("name", "passed", "worst_residual", "cases", "exact")
FIT_COLUMNS = ("c_hat", "amplitude", "residual_rms", "points_used")


def _int_list(text: str) -> list[int]:
    return [int(float(t)) for t in text.replace(";", ",").split(",") if t.strip()]


def _point(text: str) -> tuple[int, int]:
    x, _, z = text.partition(":")
    if not z:
        raise argparse.ArgumentTypeError("points are written x:z")
    return int(x), int(z)


def _budget(items: list[str] | None) -> Budget:
    if not items:
        return DEFAULT_BUDGET
    overrides = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise SystemExit(f"--budget expects key=value, got {item!r}")
        overrides[key.strip()] = int(float(val))
    try:
        return DEFAULT_BUDGET.with_overrides(**overrides)
    except KeyError as exc:
        raise SystemExit(str(exc)) from None


def _spec(args: argparse.Namespace) -> QuadratureSpec:
    return QuadratureSpec(tau_max=args.tau_max, prime_max=args.prime_max, abs_tol=args.tol)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get(THREADS_ENV, "1")),
                   help=f"worker threads across grid points (env {THREADS_ENV})")
    p.add_argument("--budget", action="append", metavar="KEY=VALUE",
                   help="override an engine budget, e.g. max_direct_x=1e9")
    p.add_argument("--config", default=None, help="json file of option defaults")
    p.add_argument("--timing", action="store_true",
                   help="fill wall_time_ms (output is then no longer reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_spec(p: argparse.ArgumentParser) -> None:
    d = QuadratureSpec()
    p.add_argument("--tau-max", type=float, default=d.tau_max)
    p.add_argument("--prime-max", type=int, default=d.prime_max)
    p.add_argument("--tol", type=float, default=d.abs_tol)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    """The top-level parser and its subcommand parsers by name."""
    parser = argparse.ArgumentParser(
        prog="mobius-sums",
        description="Truncated Möbius sums, their quadratic means and limit constants.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("engines", help="cross-check the S(x, z) engines")
    _add_common(p)
    p.add_argument("--point", type=_point, action="append", metavar="X:Z",
                   help="grid point; repeatable (default: exhaustive grid plus random points)")
    p.add_argument("--side", type=int, default=300, help="exhaustive grid side")
    p.add_argument("--random", type=int, default=100, help="number of random points")
    p.add_argument("--random-x-max", type=int, default=10**5)

    p = sub.add_parser("identities", help="run the identity families")
    _add_common(p)
    p.add_argument("--scale", choices=("full", "smoke"), default="full")

    p = sub.add_parser("convergence", help="S(z) against L")
    _add_common(p)
    _add_spec(p)
    p.add_argument("--z", type=_int_list, default=list(experiments.DEFAULT_Z_POINTS),
                   help="comma-separated increasing z values")
    p.add_argument("--L-ref", dest="L_ref", type=float, default=None,
                   help="reference value for L (default: computed from the quadrature options)")

    p = sub.add_parser("theorem", help="S(x, z)/x against L along x")
    _add_common(p)
    _add_spec(p)
    p.add_argument("--xi", type=int, default=10)
    p.add_argument("--x", type=_int_list, default=list(experiments.DEFAULT_X_POINTS))
    p.add_argument("--z-rule", default="sqrt", help="sqrt, fixed:<z> or ratio:<k>")
    p.add_argument("--L-ref", dest="L_ref", type=float, default=None)
    p.add_argument("--c-hat", type=float, default=None,
                   help="exponent for the regime boundaries (default: fitted from S(z) records)")

    p = sub.add_parser("constants", help="compute L, B and L(m)")
    _add_common(p)
    _add_spec(p)
    p.add_argument("--m-max", type=int, default=100)

    p = sub.add_parser("fit", help="fit the error exponent")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="convergence CSV to fit")
    src.add_argument("--synthetic", type=float, metavar="C", help="fit synthetic records with exponent C")
    p.add_argument("--scales", type=_int_list, default=[10**k for k in range(2, 13)])
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None, help="seed for the synthetic noise only")
    return parser, dict(sub.choices)


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        subs[args.command].set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _records_out(result: experiments.ScanResult, args: argparse.Namespace) -> str:
    if args.format == "json":
        return report.to_json({"records": result.records, "warnings": result.warnings})
    rows = [asdict(r) for r in result.records]
    return report.to_csv(rows, experiments.ConvergenceRecord.FIELDS)


def _cmd_engines(args: argparse.Namespace) -> int:
    if args.point:
        grid = [engines.SumQuery(x=x, z=z) for x, z in args.point]
    else:
        grid = experiments.default_engine_grid(args.side, args.random, args.random_x_max)
    plan = experiments.ExperimentPlan("engines", grid, output_path=args.out, format=args.format)
    rep = experiments.run_engine_suite(plan, _budget(args.budget), args.threads)
    rows = [{"x": r.x, "z": r.z, **r.values, "status": r.status} for r in rep.rows]
    if args.format == "json":
        text = report.to_json({"rows": rows, "mismatches": rep.mismatches})
    else:
        text = report.to_csv(rows, ENGINE_COLUMNS)
    report.write_text(text, args.out)
    return 1 if rep.mismatches else 0


def _cmd_identities(args: argparse.Namespace) -> int:
    scale = experiments.IdentityScale() if args.scale == "full" else experiments.IdentityScale.smoke()
    fams = experiments.run_identity_suite(scale, _budget(args.budget))
    rows = [asdict(f) for f in fams]
    text = report.to_json({"families": rows}) if args.format == "json" else report.to_csv(rows, IDENTITY_COLUMNS)
    report.write_text(text, args.out)
    for f in fams:
        if not f.passed and not f.exact:
            logging.warning("soft identity family %s outside tolerance", f.name)
    return 1 if any(f.exact and not f.passed for f in fams) else 0


def _cmd_convergence(args: argparse.Namespace) -> int:
    if not args.z:
        raise SystemExit("convergence needs at least one z")
    res = experiments.run_convergence(args.z, _spec(args), args.L_ref, args.threads, args.timing)
    report.write_text(_records_out(res, args), args.out)
    return 0


def _fitted_c_hat(L_ref: float) -> float:
    recs = experiments.run_convergence(list(experiments.DEFAULT_Z_POINTS), L_ref=L_ref).records
    return experiments.fit_exponent(recs).c_hat


def _cmd_theorem(args: argparse.Namespace) -> int:
    L_ref = args.L_ref
    if L_ref is None:
        from .constants import constant_L

        L_ref = constant_L(_spec(args)).value
    c_hat = args.c_hat if args.c_hat is not None else _fitted_c_hat(L_ref)
    res = experiments.run_theorem_scan(args.xi, args.x, args.z_rule, L_ref, c_hat,
                                       _budget(args.budget), args.threads, args.timing)
    report.write_text(_records_out(res, args), args.out)
    return 0


def _cmd_constants(args: argparse.Namespace) -> int:
    payload = experiments.constants_payload(_spec(args), args.m_max)
    if args.format == "json":
        text = report.to_json(payload)
    else:
        rows = [{"name": "L", "value": payload["L"], "error": payload["errors"]["L"]},
                {"name": "B", "value": payload["B"], "error": payload["errors"]["B"]}]
        for m, v in payload["L_m"].items():
            rows.append({"name": f"L_m[{m}]", "value": v, "error": payload["errors"][f"L_m[{m}]"]})
        for key, v in payload["lambda_h"].items():
            rows.append({"name": f"lambda_h[{key}]", "value": v,
                         "error": payload["errors"][f"lambda_h[{key}]"]})
        text = report.to_csv(rows, ("name", "value", "error"))
    report.write_text(text, args.out)
    return 0


def _read_records(path: str) -> list[experiments.ConvergenceRecord]:
    import csv

    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(experiments.ConvergenceRecord(
                int(row["scale"]), float(row["value"]), float(row["reference"]),
                float(row["abs_error"]), float(row["script_L"]), row["engine"],
                int(row["wall_time_ms"] or 0),
            ))
    return out


def _cmd_fit(args: argparse.Namespace) -> int:
    if args.input:
        recs = _read_records(args.input)
    else:
        recs = experiments.synthetic_records(args.synthetic, args.scales, args.noise, args.seed)
    fit = experiments.fit_exponent(recs)
    text = report.to_json(fit) if args.format == "json" else report.to_csv([asdict(fit)], FIT_COLUMNS)
    report.write_text(text, args.out)
    return 0


COMMANDS = {
    "engines": _cmd_engines,
    "identities": _cmd_identities,
    "convergence": _cmd_convergence,
    "theorem": _cmd_theorem,
    "constants": _cmd_constants,
    "fit": _cmd_fit,
}


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        logging.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
