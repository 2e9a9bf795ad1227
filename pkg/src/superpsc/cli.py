"""Command-line front end: ``superpsc {check, examples, approx, solve-radial, spectrum}``.

Exit codes: 0 success, 1 usage or input error, 2 inconclusive classification,
3 failed assertion in ``examples``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .expr import BUILTIN_NAMES, ParseError, builtin, example52_cmax, from_expression

REPORT_SCHEMA = "superpsc.report/1"
EXIT_OK, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_ASSERT = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    if ":" in text:
        a, b, h = (float(v) for v in text.split(":"))
        k = int(math.floor((b - a) / h + 1e-9))
        return [round(a + i * h, 12) for i in range(k + 1)]
    return _floats(text)


def _domain_from_args(args):
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k] = _floats(v) if "," in v else float(v)
    for key in ("a", "b"):
        if getattr(args, key, None) is not None:
            params[key] = _floats(getattr(args, key))
    for key in ("alpha", "C", "depth", "width"):
        if getattr(args, key, None) is not None:
            params[key] = getattr(args, key)
    if args.expr is not None:
        if args.domain is not None:
            raise UsageError("use either --domain or --expr, not both")
        if args.n is None:
            raise UsageError("--expr needs --n")
        interior = _floats(args.interior) if args.interior else None
        return from_expression(args.expr, args.n, interior, args.box)
    if args.domain is None:
        raise UsageError("give --domain NAME or --expr SOURCE")
    if args.n is not None and args.domain in ("ball", "ellipsoid", "example52"):
        params["n"] = args.n
    return builtin(args.domain, **params)


def _clean(value):
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, (np.floating, np.integer)):
        return _clean(value.item())
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _domain_echo(domain) -> dict:
    return {
        "name": domain.name,
        "n": domain.n,
        "expression": domain.ast.to_source(),
        "parameters": domain.parameters,
        "interior_point": domain.interior_point,
    }


# --------------------------------------------------------------- commands

def cmd_check(args) -> int:
    from .criteria import POINT_FIELDS, classify
    from .geometry import default_threads
    domain = _domain_from_args(args)
    start = time.perf_counter()
    verdict, table, samples = classify(domain, args.samples, args.seed, args.l2_variant,
                                       args.threads or default_threads(), args.tol_boundary)
    elapsed = time.perf_counter() - start
    rows = []
    for i, s in enumerate(samples.samples):
        row = {"index": s.index, "point": s.point}
        row.update({k: table[k][i] for k in POINT_FIELDS})
        rows.append(row)
    report = {
        "schema": REPORT_SCHEMA,
        "tool": f"superpsc {__version__}",
        "domain": _domain_echo(domain),
        "settings": {"samples": args.samples, "seed": args.seed, "l2_variant": args.l2_variant,
                     "tol_boundary": args.tol_boundary},
        "verdict": {
            "classification": verdict.classification,
            "margin": verdict.margin,
            "convexity": verdict.convexity,
            "worst_point": verdict.worst_point,
            "worst_index": verdict.worst_index,
            "at_tolerance": verdict.at_tolerance,
            "reason": verdict.reason,
            "shift": verdict.shift,
            "scope": "criterion evaluated for the supplied defining function only",
        },
        "notes": ["|dr|^2 in the error-term formulas is the contraction with the inverse complex Hessian"],
        "warnings": verdict.warnings,
        "rows": rows,
    }
    if args.timing:
        report["timing"] = {"seconds": elapsed}
    _emit(json.dumps(_clean(report), indent=1) + "\n", args.out)
    print(f"{domain.name}: {verdict.classification} (margin {verdict.margin:.6g}, {verdict.convexity})",
          file=sys.stderr)
    return EXIT_INCONCLUSIVE if verdict.classification == "inconclusive" else EXIT_OK


def _example51_assertions():
    from . import jets
    from .criteria import E_tilde, boundary_data, convex_sufficient, detH_rho_boundary, real_hessian_min_eig
    from .geometry import sample_boundary
    e = math.e
    d = builtin("example51")
    rjet = jets.jet_eval(d.ast, np.zeros((1, 4)), 4)
    bd = boundary_data(rjet)
    pts = sample_boundary(d, 200, 0).points
    hess_min = float(real_hessian_min_eig(jets.jet_eval(d.ast, pts, 2)).min())
    det_rho = float(detH_rho_boundary(bd)[0][0] * bd.J[0] ** (2 / 3))
    return [
        ("example51: H(r)(0) = I_2", float(np.abs(bd.w.H[0] - np.eye(2)).max()), 0.0, 1e-12),
        ("example51: d log J(0) = 0", float(np.abs(bd.logJ.gradient[0]).max()), 0.0, 1e-12),
        ("example51: r_{1 1bar 1 1bar}(0) = -32/e", float(bd.w.r_ijbklb[0, 0, 0, 0, 0].real), -32 / e, 1e-8),
        ("example51: E~(0) = -32/(6e)", float(E_tilde(bd)[0][0]), -32 / (6 * e), 1e-7),
        ("example51: det H(rho)(0) J^{2/3} = 1 - 32/(6e)", det_rho, 1 - 32 / (6 * e), 1e-6),
        ("example51: convexity certificate(0) = 1 - 2/3 - 32/(6e)", float(convex_sufficient(bd)[0]),
         1 - 2 / 3 - 32 / (6 * e), 1e-6),
        ("example51: real Hessian positive definite on 200 samples", hess_min > 0, True, None),
    ]


def _example52_assertions():
    from . import jets
    from .criteria import evaluate_points
    from .geometry import sample_boundary
    d = builtin("example52")
    alpha = d.parameters["alpha"]
    yy = float(jets.jet_eval(d.ast, np.zeros(4), 2).derivative_tensor(2)[3, 3])
    pts = sample_boundary(d, 500, 0).points
    L2 = evaluate_points(d, pts)["L2"]
    try:
        builtin("example52", C=example52_cmax(alpha) * 1.01)
        guard = False
    except ValueError:
        guard = True
    return [
        ("example52: d^2 r/dy_n^2(0) = 2 - 2 alpha", yy, 2 - 2 * alpha, 0.0),
        (f"example52: L2 > 0 on {len(pts)} samples (margin {L2.min():.6g})", bool(L2.min() > 0), True, None),
        ("example52: C above (9-8a)(1+a)/256 rejected", guard, True, None),
    ]


def _ball_assertions():
    from . import jets
    from .criteria import evaluate_points
    from .fefferman import J_bordered
    from .geometry import sample_boundary
    d = builtin("ball")
    pts = sample_boundary(d, 100, 0).points
    t = evaluate_points(d, pts)
    J = J_bordered(jets.wirtinger(jets.jet_eval(d.ast, np.array([[0.5, 0, 0, 0]]), 2)))[0]
    return [
        ("ball: J = 1 at (0.5, 0)", float(J), 1.0, 1e-14),
        ("ball: L2 = 1 on the sphere", float(np.abs(t["L2"] - 1).max()), 0.0, 1e-12),
    ]


EXAMPLE_SUITES = {"ball": _ball_assertions, "example51": _example51_assertions,
                  "example52": _example52_assertions}


def cmd_examples(args) -> int:
    names = [args.only] if args.only else list(EXAMPLE_SUITES)
    failed = []
    for name in names:
        for label, got, want, tol in EXAMPLE_SUITES[name]():
            ok = (got == want) if tol is None else abs(got - want) <= tol
            detail = "" if tol is None else f"  got {got:.12g}, want {want:.12g}, tol {tol:g}"
            print(f"{'PASS' if ok else 'FAIL'}  {label}{detail}")
            if not ok:
                failed.append(label)
    if failed:
        print(f"{len(failed)} assertion(s) failed: " + "; ".join(failed), file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def cmd_approx(args) -> int:
    from .fefferman import defect_scan
    from .geometry import sample_boundary
    domain = _domain_from_args(args)
    depths = np.array(_grid(args.depths))
    if len(depths) < 2:
        raise UsageError("--depths needs at least two values")
    samples = sample_boundary(domain, args.rays, args.seed, args.threads).samples
    rows = []
    for s in samples:
        scan = defect_scan(domain, s.point, depths)
        slope1 = float("nan") if scan.slope_rho1 is None else scan.slope_rho1
        slope0 = float("nan") if scan.slope_rho0 is None else scan.slope_rho0
        rows.append([s.index, *s.point, slope1, slope0, scan.defect_rho1.max()])
    header = ["ray"] + [f"{c}{j + 1}" for j in range(domain.n) for c in "xy"] + \
        ["slope_rho1", "slope_rho0", "max_defect_rho1"]
    _emit(_csv(header, rows), args.out)
    slopes = np.array([r[-3] for r in rows])
    if np.all(np.isnan(slopes)):
        print("defect below 1e-13 on every ray: rho_1 is exact", file=sys.stderr)
    else:
        print(f"min slope rho_1 {np.nanmin(slopes):.4f} over {len(rows)} rays", file=sys.stderr)
    return EXIT_OK


def cmd_solve_radial(args) -> int:
    from .solver import NewtonDivergence, solve_radial
    try:
        p = solve_radial(args.n, args.nodes, args.eps, args.tol, grid=args.grid)
    except NewtonDivergence as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows = zip(p.t, p.f, p.fp, p.rho, p.residual)
    _emit(_csv(["t", "f", "fp", "rho", "residual"], rows), args.out)
    print(f"max |f + log(1-t)| on t <= {1 - args.eps:g}: {p.deviation():.3e} "
          f"({p.iterations} Newton steps, max residual {p.max_residual:.2e})", file=sys.stderr)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .spectrum import rayleigh_scan
    grid = _grid(args.s)
    try:
        pts = rayleigh_scan(args.n, grid, args.eps, threads=args.threads or 1)
    except ValueError as exc:
        raise UsageError(str(exc))
    _emit(_csv(["s", "quotient", "stderr"], [(p.s, p.quotient, p.stderr) for p in pts]), args.out)
    best = min(pts, key=lambda p: p.quotient)
    print(f"min quotient {best.quotient:.6f} at s = {best.s:g} (n^2 = {args.n ** 2})", file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------- parser

def _add_domain_flags(p):
    p.add_argument("--domain", choices=BUILTIN_NAMES)
    p.add_argument("--expr", help="defining function, e.g. 'abs2(z1)+abs2(z2)-1'")
    p.add_argument("--n", type=int, help="complex dimension")
    p.add_argument("--interior", help="comma-separated interior point for --expr (default origin)")
    p.add_argument("--box", type=float, default=2.0, help="sampling half-width for --expr")
    p.add_argument("--a", help="ellipsoid x-coefficients, comma separated")
    p.add_argument("--b", help="ellipsoid y-coefficients, comma separated")
    p.add_argument("--alpha", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--depth", type=float)
    p.add_argument("--width", type=float)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superpsc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"superpsc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="classify a domain from boundary samples")
    _add_domain_flags(p)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol-boundary", type=float, default=1e-10)
    p.add_argument("--l2-variant", choices=("eq311", "def12"), default="eq311")
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--timing", action="store_true", help="include wall time (breaks byte identity)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("examples", help="run the regression assertions")
    p.add_argument("--only", choices=sorted(EXAMPLE_SUITES))
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("approx", help="defect of the approximate solution along inward normals")
    _add_domain_flags(p)
    p.add_argument("--rays", type=int, default=10)
    p.add_argument("--depths", default="0.1,0.0316227766,0.01,0.00316227766,0.001")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("solve-radial", help="radial Monge-Ampere solve on the ball")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--nodes", type=int, default=2000)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--grid", choices=("log", "graded", "uniform"), default="log")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_radial)

    p = sub.add_parser("spectrum", help="Rayleigh quotients on the ball")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--s", default="1.2,1.5,2.0,2.5,3.0", help="a:b:step or comma list")
    p.add_argument("--eps", type=float, default=1e-4, help="cutoff depth")
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_spectrum)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ParseError, ValueError) as exc:
        print(f"superpsc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
