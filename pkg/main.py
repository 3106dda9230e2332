import argparse
import sys
from pathlib import Path

import numpy as np

from helpers import config
from helpers.cone import cone_constants
from helpers.conditions import assumption_diagnostics, bound_constants, check_I0, check_I0_star, check_I1, check_precondition
from helpers.errors import ImpulseBVPError, PreconditionError, ProblemValidationError
from helpers.grid import Grid, PiecewiseGridFunction
from helpers.impulse import verify_p_bounds
from helpers.problem import load, to_fraction
from helpers.report import computed_values, discrepancies, dumps, read_csv, residual_table, solution_summary, write_csv, write_report
from helpers.scheduler import certify, search_ladder
from helpers.sl_kernel import boundary_identities
from helpers.solver import cone_verdicts, multi_start, problem_grid, residuals

# --- Exit codes ---
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2

VERIFY_TOL = 1e-6
VERIFY_FD_TOL = 1e-5


def apply_overrides(problem, args):
    """Command-line flags win over the problem file."""
    analysis, solver = {}, {}
    if getattr(args, "rho", None):
        analysis["rho"] = list(args.rho)
    if getattr(args, "pattern", None):
        analysis["pattern"] = args.pattern
    if getattr(args, "mode", None):
        analysis["mode"] = args.mode
    if getattr(args, "grid_n", None):
        solver["grid_n"] = args.grid_n
    if getattr(args, "tol", None):
        solver["tol"] = args.tol
    update = {}
    if analysis:
        update["analysis"] = problem.analysis.model_copy(update=analysis)
    if solver:
        update["solver"] = problem.solver.model_copy(update=solver)
    return problem.model_copy(update=update) if update else problem


def _w_max(problem, cone):
    if problem.analysis.w_max is not None:
        return problem.analysis.w_max
    radii = list(problem.analysis.rho)
    if problem.analysis.search_grid is not None:
        radii += problem.analysis.search_grid.values()
    return max(radii) / cone.c if radii else 1


def _basis_section(problem):
    rows = []
    for eq in problem.equations:
        rows.append(
            {
                "equation": eq.index,
                "coefficients": eq.coeffs,
                "gamma": eq.basis.gamma,
                "delta": eq.basis.delta,
                "W": eq.basis.W,
                "identities": boundary_identities(eq.basis),
                "window": eq.interval,
                "impulse_coefficients": eq.impulse_coeffs,
            }
        )
    return rows


def _certificates(problem, constants, cone):
    """One certificate under the computed c and, when the file gives one, another under override_c."""
    analysis = problem.analysis
    if analysis.pattern is None:
        return []
    values = [("computed", cone.c)]
    if cone.override_c is not None and cone.override_c != cone.c:
        values.append(("override", cone.override_c))
    out = []
    for label, c in values:
        if analysis.rho:
            certificate = certify(problem, analysis.pattern, analysis.rho, c=c, constants=constants)
        elif analysis.search_grid is not None:
            certificate = search_ladder(problem, analysis.pattern, analysis.search_grid.values(), c=c, constants=constants)
        else:
            certificate = None
        out.append({"c_source": label, "c": c, "certificate": certificate})
    return out


def _condition_reports(problem, constants, cone, rhos):
    reports = []
    for rho in rhos:
        reports.append(
            {
                "rho": rho,
                "I1": check_I1(problem, rho, constants=constants),
                "I0": check_I0(problem, rho, cone.c, constants=constants),
                "I0*": check_I0_star(problem, rho, cone.c, constants=constants),
            }
        )
    return reports


def run_analyze(problem):
    """Constants, conditions and certificates for one problem. Returns (report, exit code)."""
    config.log(f"--- Analyzing '{problem.name}' ({problem.analysis.mode}) ---")
    failures = []

    config.log("\n[1/5] Boundary bases and cone constants...")
    cone = cone_constants(problem)
    w_max = _w_max(problem, cone)
    report = {
        "problem": {"name": problem.name, "path": problem.path, "mode": problem.analysis.mode},
        "basis": _basis_section(problem),
        "cone": cone,
    }

    config.log("[2/5] Impulse growth bounds...")
    p_bounds = [verify_p_bounds(eq.impulse, eq.impulse_coeffs, w_max) for eq in problem.equations]
    report["p_bounds"] = p_bounds
    for eq, check in zip(problem.equations, p_bounds):
        if not check.passed:
            failures.append(f"p-bounds of equation {eq.index}: {check.witness}")

    config.log("[3/5] Bound constants and precondition...")
    constants = bound_constants(problem)
    precondition = check_precondition(problem, constants)
    report["constants"] = constants
    report["precondition"] = precondition
    report["discrepancies"] = discrepancies(problem.reference_values, computed_values(constants, cone))

    config.log("[4/5] Index conditions and certificates...")
    if precondition.passed:
        certificates = _certificates(problem, constants, cone)
        rhos = sorted({rho for entry in certificates if entry["certificate"] for rho in entry["certificate"].rhos})
        rhos = rhos or sorted(set(problem.analysis.rho))
        report["conditions"] = _condition_reports(problem, constants, cone, rhos)
        report["certificates"] = certificates
        for entry in certificates:
            certificate = entry["certificate"]
            if certificate is None:
                failures.append(f"no {problem.analysis.pattern} ladder found (c from {entry['c_source']})")
            elif not certificate.valid:
                failures.append(f"certificate (c from {entry['c_source']}): {certificate.first_violation}")
    else:
        report["conditions"] = []
        report["certificates"] = []
        failures.append("precondition alpha_tilde_i[gamma_i] < 1 fails")

    config.log("[5/5] Assumption diagnostics...")
    report["diagnostics"] = assumption_diagnostics(problem, w_max)

    report["status"] = {"passed": not failures, "failures": failures}
    config.log(f"--- Analysis finished: {'PASS' if not failures else 'FAIL'} ---")
    return report, EXIT_OK if not failures else EXIT_CHECK_FAILED


def _csv_paths(base: Path, count: int):
    if count <= 1:
        return [base]
    return [base] + [base.with_name(f"{base.stem}_{k}{base.suffix}") for k in range(2, count + 1)]


def run_solve(problem, csv_path=None):
    """Multi-start Picard solve. Returns (report, exit code); exit 1 when no start converged into the cone."""
    config.log(f"--- Solving '{problem.name}' ---")
    certificate = None
    if problem.analysis.pattern is not None:
        config.log("\n[1/3] Certificate for the starting radii...")
        try:
            constants = bound_constants(problem)
            entries = _certificates(problem, constants, cone_constants(problem))
            certificate = entries[0]["certificate"] if entries else None
        except PreconditionError as e:
            config.log(f"  no certificate: {e}")

    config.log("[2/3] Multi-start iteration...")
    grid = problem_grid(problem)
    result = multi_start(problem, certificate, grid)
    for outcome in result.outcomes:
        if not outcome.converged:
            config.log(f"  start {outcome.start:g}: {outcome.message}")

    config.log("[3/3] Writing curves...")
    files = []
    if csv_path is not None and result.solutions:
        for path, solution in zip(_csv_paths(Path(csv_path), len(result.solutions)), result.solutions):
            write_csv(path, solution.u, solution.v)
            files.append(str(path))

    report = {
        "problem": {"name": problem.name, "path": problem.path},
        "grid": {"n": grid.n, "entries": len(grid.nodes), "taus": grid.taus},
        "certificate": certificate,
        "starts": result.outcomes,
        "solutions": [solution_summary(s) for s in result.solutions],
        "csv": files,
        "note": "Picard iteration only reaches attracting fixed points; certified solutions may be missed.",
    }
    passed = bool(result.solutions)
    report["status"] = {"passed": passed, "failures": [] if passed else ["no start converged to a cone member"]}
    config.log(f"--- Solve finished: {len(result.solutions)} solution(s) ---")
    return report, EXIT_OK if passed else EXIT_CHECK_FAILED


def run_verify(problem, solution_path, tol: float = VERIFY_TOL):
    """Residuals and cone membership of an exported solution. Returns (report, exit code)."""
    config.log(f"--- Verifying {solution_path} against '{problem.name}' ---")
    nodes, u_values, v_values = read_csv(solution_path)
    grid = Grid.from_nodes(nodes, problem.taus)
    u = PiecewiseGridFunction(nodes=grid.nodes, values=u_values)
    v = PiecewiseGridFunction(nodes=grid.nodes, values=v_values)

    summary = residuals(problem, grid, (u, v))
    cone = cone_verdicts(problem, u, v)
    scale = max(1.0, float(np.max(np.abs(u_values))), float(np.max(np.abs(v_values))))

    failures = []
    if summary.integral > tol * scale:
        failures.append(f"integral-equation residual {summary.integral:.3e} exceeds {tol * scale:.3e}")
    if summary.jump > tol * scale:
        failures.append(f"jump residual {summary.jump:.3e} exceeds {tol * scale:.3e}")
    if summary.jump_fd > VERIFY_FD_TOL * scale:
        failures.append(
            f"derivative jump from finite differences {summary.jump_fd:.3e} exceeds {VERIFY_FD_TOL * scale:.3e}"
        )
    if summary.bc > tol * scale:
        failures.append(f"boundary residual {summary.bc:.3e} exceeds {tol * scale:.3e}")
    for index, verdict in enumerate(cone, start=1):
        if not verdict.passed:
            failures.append(f"component {index} is not in the cone: {verdict.reason}")

    report = {
        "problem": {"name": problem.name, "path": problem.path},
        "solution": str(solution_path),
        "residuals": residual_table(summary),
        "cone": cone,
        "status": {"passed": not failures, "failures": failures},
    }
    return report, EXIT_OK if not failures else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="impulse-cert",
        description="Certificates and numerical solutions for coupled impulsive Sturm-Liouville systems.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("problem", help="problem file (JSON)")
        sub.add_argument("--out", help="write the JSON report here instead of stdout")
        mode = sub.add_mutually_exclusive_group()
        mode.add_argument("--exact", dest="mode", action="store_const", const="exact", help="exact rational constants (default)")
        mode.add_argument("--numeric", dest="mode", action="store_const", const="numeric", help="floating-point constants")

    analyze = commands.add_parser("analyze", help="constants, index conditions and certificates")
    common(analyze)
    analyze.add_argument("--rho", nargs="+", type=to_fraction, help="radius ladder, e.g. 1/8 1 11")
    analyze.add_argument("--pattern", choices=["S1", "S2", "S3", "S4", "S5", "S6"])

    solve = commands.add_parser("solve", help="multi-start Picard solve")
    common(solve)
    solve.add_argument("--rho", nargs="+", type=to_fraction)
    solve.add_argument("--pattern", choices=["S1", "S2", "S3", "S4", "S5", "S6"])
    solve.add_argument("--grid-n", type=int, help="panels per smooth piece")
    solve.add_argument("--tol", type=float, help="stopping tolerance of the iteration")
    solve.add_argument("--csv", help="write the solution curves (t,u,v) here")

    verify = commands.add_parser("verify", help="residuals and cone membership of an exported solution")
    common(verify)
    verify.add_argument("--solution", required=True, help="CSV written by solve")
    verify.add_argument("--tol", dest="residual_tol", type=float, default=VERIFY_TOL, help="residual tolerance relative to the solution scale")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        problem = apply_overrides(load(args.problem), args)
        if args.command == "analyze":
            report, code = run_analyze(problem)
        elif args.command == "solve":
            report, code = run_solve(problem, args.csv)
        else:
            report, code = run_verify(problem, args.solution, args.residual_tol)
    except ProblemValidationError as e:
        print(f"!! {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except PreconditionError as e:
        print(f"!! {e}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except ImpulseBVPError as e:
        print(f"!! input error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    if args.out:
        write_report(args.out, report)
        config.log(f"Report written to {args.out}")
    else:
        sys.stdout.write(dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
