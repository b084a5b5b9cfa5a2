"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import sys
import warnings

import numpy as np

from .direct import DirectConfig, IterationCapReached, compare, minimize_discretized
from .expr import Binary, EvaluationError, ParseError, lambdify, parse, to_string
from .identities import run_identity_suite
from .normal_form import expand
from .integration import QuadratureConfig, ToleranceNotReachedWarning, j_omega
from .operators import NotIncreasingError, OmegaFunction, omega_derivative_symbolic
from .problem import ProblemFileError, ProblemSpec, load_problem
from .variational import (MODES, SolverConfig, SolverError, build_el_residual, check_joint_convexity,
                          solve_el_bvp)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
MODE_NAMES = {"omega": "omega_paper", "classical": "weighted_classical"}
NUMERIC_WARNINGS = (ToleranceNotReachedWarning, IterationCapReached)


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(value: float, digits: int = 12) -> str:
    return f"{value:.{digits}g}"


def csv_number(value: float) -> str:
    return repr(float(value))


def render_table(columns, rows, digits: int = 12) -> str:
    cells = [[c if isinstance(c, str) else fmt(c, digits) for c in row] for row in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in cells)) if cells else len(str(h))
              for i, h in enumerate(columns)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(columns, widths)).rstrip()]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines)


def _mesh(spec: ProblemSpec | None, args, default: int = 200) -> int:
    if getattr(args, "mesh", None) is not None:
        return args.mesh
    if spec is not None and spec.mesh is not None:
        return spec.mesh
    return default


def _seed(spec: ProblemSpec | None, args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if spec is not None and spec.seed is not None:
        return spec.seed
    return 0


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(residual_tol=args.tol) if getattr(args, "tol", None) else SolverConfig()


def _describe(spec: ProblemSpec) -> str:
    (a, b), (ya, yb) = spec.interval, spec.boundary
    return (f"L = {spec.lagrangian}, Omega = {spec.omega}, [{fmt(a)}, {fmt(b)}], "
            f"y({fmt(a)}) = {fmt(ya)}, y({fmt(b)}) = {fmt(yb)}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_derive(args, out) -> int:
    spec = load_problem(args.problem)
    modes = MODES if args.mode is None else (MODE_NAMES[args.mode],)
    print(f"problem: {_describe(spec)}", file=out)
    for mode in modes:
        form = build_el_residual(spec.problem, mode)
        print(f"{mode}: {form.note}", file=out)
        print(f"  residual = {to_string(expand(form.residual))}", file=out)
        print(f"  ypp coefficient = {to_string(expand(form.ypp_coefficient))}", file=out)
        normalized = expand(Binary("div", form.residual, form.ypp_coefficient))
        print(f"  residual / ypp coefficient = {to_string(normalized)}", file=out)
    return EXIT_OK


def cmd_solve(args, out) -> int:
    spec = load_problem(args.problem)
    mode = MODE_NAMES[args.mode or "omega"]
    n = _mesh(spec, args)
    form = build_el_residual(spec.problem, mode)
    traj = solve_el_bvp(spec.problem, form, n, _solver_cfg(args))
    buf = io.StringIO(newline="")
    buf.write("x,y,yp,d_omega_y\n")
    for row in zip(traj.mesh, traj.values, traj.yprime, traj.d_omega_y):
        buf.write(",".join(csv_number(v) for v in row) + "\n")
    summary = (f"solved {mode} with n = {n}: residual {traj.residual_norm:.3e}, "
               f"{traj.newton_iterations} Newton steps"
               + ("" if traj.converged else " (stopped at the rounding floor)"))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
        print(summary, file=out)
    else:
        out.write(buf.getvalue())
        print(summary, file=sys.stderr)
    if args.strict and not traj.converged:
        raise NumericalFailure("residual tolerance not reached")
    return EXIT_OK


def build_verify_report(spec: ProblemSpec, n: int, seed: int, samples: int = 10_000,
                        solver: SolverConfig = SolverConfig()) -> tuple[str, bool]:
    """Text of the verification report and whether the ordering invariant holds."""
    p = spec.problem
    quad = QuadratureConfig(panels=spec.quad_panels or 64)
    lines = [f"problem: {_describe(spec)}",
             f"mesh: {n}  quadrature panels: {quad.panels}  seed: {seed}", ""]
    candidates, failures = [], []
    for mode in MODES:
        try:
            candidates.append((mode, solve_el_bvp(p, build_el_residual(p, mode), n, solver)))
        except SolverError as exc:
            failures.append(f"{mode}: no extremal ({type(exc).__name__}: {exc})")
    direct = minimize_discretized(p, DirectConfig(n=n))
    report = compare(p, candidates, quad=quad, direct=direct)

    rows = [[label, v, report.differences[label]] for label, v in report.candidate_values.items()]
    rows.append(["direct", report.direct_value, 0.0])
    rows.append(["direct (discrete objective)", report.direct_discrete_value,
                 report.direct_discrete_value - report.direct_value])
    lines += ["functional values", render_table(["label", "value", "minus direct"], rows), ""]
    res_rows = [[label] + [r[m] for m in MODES] for label, r in report.residuals.items()]
    lines += ["Euler-Lagrange residuals (max over interior nodes)",
              render_table(["label", *MODES], res_rows, digits=6), ""]
    lines.append("verdicts")
    lines += [f"  {v}" for v in failures + report.verdicts]
    lines.append("")

    if spec.convexity_box is not None:
        region, deltas = spec.convexity_box[:6], spec.convexity_box[6:]
    else:
        z = direct.d_omega_y
        region = (p.a, p.b, float(np.min(direct.values)), float(np.max(direct.values)),
                  float(np.min(z)), float(np.max(z)))
        deltas = (-1.0, 1.0)
    samples = spec.convexity_samples or samples
    conv = check_joint_convexity(p.lagrangian, p.omega, region, deltas, samples, seed)
    lines.append(f"joint convexity with Omega-partials (seed {seed}, {samples} samples)")
    lines.append("  box: x [{}, {}]  y [{}, {}]  z [{}, {}]  y1, z1 [{}, {}]".format(
        *(fmt(v, 6) for v in (*region, *deltas))))
    lines.append(f"  verdict: {conv.verdict} ({len(conv.violations)} violations)")
    for v in conv.violations[:5]:
        lines.append("  x={} y={} z={} y1={} z1={} lhs={} rhs={}".format(*(fmt(c, 6) for c in v)))
    return "\n".join(lines) + "\n", report.ordering_holds


def cmd_verify(args, out) -> int:
    spec = load_problem(args.problem)
    text, ordering = build_verify_report(spec, _mesh(spec, args), _seed(spec, args),
                                         solver=_solver_cfg(args))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    out.write(text)
    if not ordering:
        raise NumericalFailure("optimality ordering violated")
    return EXIT_OK


def _omega_for(args, default_domain) -> OmegaFunction:
    domain = tuple(args.domain) if args.domain else default_domain
    return OmegaFunction(parse(args.omega), domain)


def cmd_calc(args, out) -> int:
    f = parse(args.expression)
    if args.at is None and args.interval is None:
        raise UsageError("calc needs --at X (Omega-derivative) and/or --interval A B (Omega-integral)")
    if args.at is not None:
        x0 = args.at
        r = 1e-3 * max(1.0, abs(x0))
        w = _omega_for(args, (x0 - r, x0 + r))
        d = omega_derivative_symbolic(f, w)
        print(f"D_Omega f = {to_string(d)}", file=out)
        print(f"D_Omega f({fmt(x0)}) = {fmt(lambdify(d)(x0))}", file=out)
    if args.interval is not None:
        a, b = args.interval
        w = _omega_for(args, (a, b))
        res = j_omega(f, w, a, b, QuadratureConfig(panels=args.panels, tol=args.tol or 1e-10))
        print(f"J_Omega f over [{fmt(a)}, {fmt(b)}] = {fmt(res.value)} "
              f"(error estimate {res.error_estimate:.2e}, {res.panels_used} panels)", file=out)
    return EXIT_OK


def cmd_integrate(args, out) -> int:
    args.at = None
    return cmd_calc(args, out)


def cmd_props(args, out) -> int:
    omega = None
    if args.problem:
        omega = load_problem(args.problem).problem.omega
    elif args.omega:
        omega = OmegaFunction(parse(args.omega), tuple(args.domain) if args.domain else (0.5, 2.0))
    seed = args.seed if args.seed is not None else 0
    rows = run_identity_suite(seed, args.instances, omega, "product" if args.inject_fault else None)
    table = [[r.name, str(r.instances), r.max_error, r.tolerance, "PASS" if r.passed else "FAIL"]
             for r in rows]
    print(f"identity suite (seed {seed}, Omega = "
          f"{'random' if omega is None else to_string(omega.omega)})", file=out)
    print(render_table(["identity", "instances", "max error", "tolerance", "status"], table, 3),
          file=out)
    failed = [r.name for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} passed", file=out)
    if failed:
        raise NumericalFailure("identity failures: " + ", ".join(failed))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omegacv", description="Omega calculus of variations toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, problem=True, mesh=True):
        if problem:
            p.add_argument("problem", help="problem file")
        p.add_argument("--mode", choices=sorted(MODE_NAMES), default=None)
        if mesh:
            p.add_argument("--mesh", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--strict", action="store_true",
                       help="treat unmet tolerances as numerical failures")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("derive", help="print the Euler-Lagrange residuals")
    common(p)
    p.set_defaults(func=cmd_derive)
    p = sub.add_parser("solve", help="solve the Euler-Lagrange BVP and write CSV")
    common(p)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("verify", help="audit EL extremals against the direct minimizer")
    common(p)
    p.set_defaults(func=cmd_verify)

    for name, fn in (("calc", cmd_calc), ("integrate", cmd_integrate)):
        p = sub.add_parser(name, help="Omega-derivative / Omega-integral of an expression")
        p.add_argument("expression")
        p.add_argument("--omega", default="x")
        if name == "calc":
            p.add_argument("--at", type=float, default=None)
        p.add_argument("--interval", type=float, nargs=2, default=None, required=name == "integrate")
        p.add_argument("--domain", type=float, nargs=2, default=None)
        p.add_argument("--panels", type=int, default=64)
        common(p, problem=False, mesh=False)
        p.set_defaults(func=fn)

    p = sub.add_parser("props", help="run the randomized identity suite")
    p.add_argument("problem", nargs="?", default=None)
    p.add_argument("--omega", default=None)
    p.add_argument("--domain", type=float, nargs=2, default=None)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--inject-fault", action="store_true",
                   help="scale Omega' by 1.01 in one product-rule operand (self-test)")
    common(p, problem=False)
    p.set_defaults(func=cmd_props)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code = args.func(args, out)
        except (ProblemFileError, ParseError, NotIncreasingError, UsageError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except (SolverError, NumericalFailure, EvaluationError, ArithmeticError) as exc:
            print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    numeric = [w for w in caught if issubclass(w.category, NUMERIC_WARNINGS)]
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if getattr(args, "strict", False) and numeric:
        return EXIT_NUMERIC
    return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
