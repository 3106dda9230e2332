"""Damped Picard iteration for the coupled integral system.

Each component is

    T(u,v)(t) = gamma(t) H(alpha[own]) + delta(t) L(beta[other]) + G(own)(t) + F(t),
    F(t)      = int_0^1 k(t,s) g(s) f(s, u(s), v(s)) ds.

Because k(t,s) = gamma(t) delta(s)/W for s <= t and gamma(s) delta(t)/W otherwise,
F on the whole grid is two cumulative trapezoid sums. Repeated grid entries at
the impulse points are zero-width panels, so the jump of the integrand there
costs nothing. The same sums give F', which feeds the jump and boundary
residuals.
"""

import asyncio
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate

from helpers import config
from helpers.cone import MembershipVerdict, cone_constants, cone_membership
from helpers.errors import ImpulseBVPError, NoConvergenceError, PreconditionError, SolverDivergenceError
from helpers.expr import evaluate
from helpers.grid import Grid, PiecewiseGridFunction, build_grid
from helpers.impulse import G_apply, G_derivative
from helpers.measures import apply_on_grid

OVERFLOW = 1e12


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class EquationResiduals(_Frozen):
    index: int
    ode: float
    jump_value: float
    jump_slope: float
    jump_slope_fd: float
    bc_left: float
    bc_right: float


class ResidualSummary(_Frozen):
    integral: float
    equations: Tuple[EquationResiduals, EquationResiduals]

    @property
    def ode(self) -> float:
        return max(e.ode for e in self.equations)

    @property
    def jump(self) -> float:
        return max(max(e.jump_value, e.jump_slope) for e in self.equations)

    @property
    def jump_fd(self) -> float:
        """Derivative jump mismatch measured by one-sided differences of the values."""
        return max(e.jump_slope_fd for e in self.equations)

    @property
    def bc(self) -> float:
        return max(max(e.bc_left, e.bc_right) for e in self.equations)


class SolutionPair(_Frozen):
    u: PiecewiseGridFunction
    v: PiecewiseGridFunction
    iterations: int
    update_norm: float
    start: Optional[float] = None
    residuals: Optional[ResidualSummary] = None
    cone: Optional[Tuple[MembershipVerdict, MembershipVerdict]] = None

    @property
    def in_cone(self) -> bool:
        return self.cone is not None and all(v.passed for v in self.cone)


class StartOutcome(_Frozen):
    start: float
    converged: bool
    iterations: int = 0
    message: Optional[str] = None


class MultiStartResult(_Frozen):
    solutions: Tuple[SolutionPair, ...]
    outcomes: Tuple[StartOutcome, ...]


class _Parts(_Frozen):
    """T(u,v) of one component with its derivative and the data that produced it."""

    values: np.ndarray
    slopes: np.ndarray
    source: np.ndarray
    H: float
    L: float


def problem_grid(problem, n: Optional[int] = None) -> Grid:
    return build_grid(problem.taus, n or problem.solver.grid_n)


def _source(equation, nodes: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        f = evaluate(equation.f, {"t": nodes, "u": u, "v": v})
        g = evaluate(equation.g, {"t": nodes, "s": nodes})
    return g * f


def _integral_term(equation, nodes: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    b = equation.basis
    gam, dl = b.gamma(nodes), b.delta(nodes)
    lower = integrate.cumulative_trapezoid(dl * h, nodes, initial=0.0)
    running = integrate.cumulative_trapezoid(gam * h, nodes, initial=0.0)
    upper = running[-1] - running
    W = float(b.W)
    values = (gam * lower + dl * upper) / W
    slopes = (float(b.gamma.slope) * lower + float(b.delta.slope) * upper) / W
    return values, slopes


def _component(equation, own: PiecewiseGridFunction, other: PiecewiseGridFunction, first, second) -> _Parts:
    nodes = own.nodes
    b = equation.basis
    H = float(evaluate(equation.H, {"w": apply_on_grid(equation.alpha, own)}))
    L = float(evaluate(equation.L, {"w": apply_on_grid(equation.beta, other)}))
    G = G_apply(b, equation.impulse, equation.impulse_coeffs, own)
    dG = G_derivative(b, equation.impulse, equation.impulse_coeffs, own)
    h = _source(equation, nodes, first.values, second.values)
    F, dF = _integral_term(equation, nodes, h)
    values = b.gamma(nodes) * H + b.delta(nodes) * L + G.values + F
    slopes = float(b.gamma.slope) * H + float(b.delta.slope) * L + dG + dF
    return _Parts(values=values, slopes=slopes, source=h, H=H, L=L)


def _clip(w: PiecewiseGridFunction, name: str) -> PiecewiseGridFunction:
    tol = 1e-9 * max(1.0, w.sup_norm())
    lowest = float(np.min(w.values))
    if lowest < -tol:
        raise PreconditionError(f"{name} takes the negative value {lowest:.3e}; the operator acts on nonnegative pairs")
    if lowest >= 0:
        return w
    return PiecewiseGridFunction(nodes=w.nodes, values=np.maximum(w.values, 0.0))


def _evaluate(problem, u: PiecewiseGridFunction, v: PiecewiseGridFunction) -> Tuple[_Parts, _Parts]:
    u, v = _clip(u, "u"), _clip(v, "v")
    first, second = problem.equations
    return _component(first, u, v, u, v), _component(second, v, u, u, v)


def apply_T(problem, grid: Grid, pair: Tuple[PiecewiseGridFunction, PiecewiseGridFunction]):
    """One application of the fixed-point operator on the grid."""
    u, v = pair
    pu, pv = _evaluate(problem, u, v)
    return (
        PiecewiseGridFunction(nodes=grid.nodes, values=pu.values),
        PiecewiseGridFunction(nodes=grid.nodes, values=pv.values),
    )


def _endpoint_slope(x: np.ndarray, y: np.ndarray, at_end: bool) -> float:
    """Derivative of the interpolating polynomial through the points, at the last (or first) one.

    Four points give a third order one-sided difference.
    """
    p = x[-1] if at_end else x[0]
    total = 0.0
    for j in range(len(x)):
        others = np.delete(x, j)
        weight = sum(np.prod(p - np.delete(others, m)) for m in range(len(others)))
        total += y[j] * weight / np.prod(x[j] - others)
    return float(total)


def _ode_residual(grid: Grid, values: np.ndarray, source: np.ndarray) -> float:
    worst = 0.0
    for start, stop in grid.pieces():
        x = grid.nodes[start:stop]
        y = values[start:stop]
        if len(x) < 3:
            continue
        h1 = x[1:-1] - x[:-2]
        h2 = x[2:] - x[1:-1]
        second = 2 * ((y[2:] - y[1:-1]) / h2 - (y[1:-1] - y[:-2]) / h1) / (h1 + h2)
        worst = max(worst, float(np.max(np.abs(second + source[start + 1 : stop - 1]))))
    return worst


def residuals(problem, grid: Grid, solution) -> ResidualSummary:
    """Residuals of the integral system and of the original boundary value problem."""
    u, v = (solution.u, solution.v) if isinstance(solution, SolutionPair) else solution
    pu, pv = _evaluate(problem, u, v)
    integral = max(float(np.max(np.abs(u.values - pu.values))), float(np.max(np.abs(v.values - pv.values))))

    rows = []
    for eq, own, parts in ((problem.equations[0], u, pu), (problem.equations[1], v, pv)):
        values = own.values
        left = grid.left_index(eq.tau)
        w_tau = values[left]
        I = float(evaluate(eq.impulse.I, {"w": w_tau}))
        N = float(evaluate(eq.impulse.N, {"w": w_tau}))
        slope_jump = parts.slopes[left + 1] - parts.slopes[left]
        piece_start = next(start for start, stop in grid.pieces() if stop == left + 1)
        piece_stop = next(stop for start, stop in grid.pieces() if start == left + 1)
        before = slice(max(piece_start, left - 3), left + 1)
        after = slice(left + 1, min(piece_stop, left + 5))
        fd_jump = _endpoint_slope(grid.nodes[after], values[after], at_end=False) - _endpoint_slope(
            grid.nodes[before], values[before], at_end=True
        )
        c = eq.coeffs
        rows.append(
            EquationResiduals(
                index=eq.index,
                ode=_ode_residual(grid, values, parts.source),
                jump_value=abs(values[left + 1] - values[left] - I),
                jump_slope=abs(slope_jump - N),
                jump_slope_fd=abs(fd_jump - N),
                bc_left=abs(float(c.a1) * values[0] - float(c.b1) * parts.slopes[0] - parts.H),
                bc_right=abs(float(c.a2) * values[-1] + float(c.b2) * parts.slopes[-1] - parts.L),
            )
        )
    return ResidualSummary(integral=integral, equations=tuple(rows))


def cone_verdicts(problem, u, v) -> Tuple[MembershipVerdict, MembershipVerdict]:
    cone = cone_constants(problem)
    verdicts = []
    for eq_cone, w in zip(cone.equations, (u, v)):
        tol = 1e-8 * max(1.0, w.sup_norm())
        verdicts.append(cone_membership(w, eq_cone.window_a, eq_cone.window_b, eq_cone.c, tol))
    return tuple(verdicts)


def solve_picard(
    problem,
    grid: Grid,
    init: Tuple[PiecewiseGridFunction, PiecewiseGridFunction],
    damping=None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> SolutionPair:
    """(u, v) <- (1 - damping)(u, v) + damping T(u, v) until the sup-norm update drops below tol."""
    damping = float(damping if damping is not None else problem.solver.damping)
    tol = tol if tol is not None else problem.solver.tol
    max_iter = max_iter if max_iter is not None else problem.solver.max_iter
    u, v = init
    if min(float(np.min(u.values)), float(np.min(v.values))) < 0:
        raise PreconditionError("initial guess must be nonnegative")

    history: List[float] = []
    for iteration in range(1, max_iter + 1):
        Tu, Tv = apply_T(problem, grid, (u, v))
        with np.errstate(over="ignore", invalid="ignore"):
            nu = (1 - damping) * u.values + damping * Tu.values
            nv = (1 - damping) * v.values + damping * Tv.values
        if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(nv))):
            raise SolverDivergenceError(f"non-finite iterate at iteration {iteration}")
        if max(np.max(np.abs(nu)), np.max(np.abs(nv))) > OVERFLOW:
            raise SolverDivergenceError(f"iterate exceeded {OVERFLOW:g} at iteration {iteration}")

        update = max(float(np.max(np.abs(nu - u.values))), float(np.max(np.abs(nv - v.values))))
        history.append(update)
        u = PiecewiseGridFunction(nodes=grid.nodes, values=nu)
        v = PiecewiseGridFunction(nodes=grid.nodes, values=nv)
        if iteration % 100 == 0:
            config.log(f"  iteration {iteration}: update {update:.3e}")
        if update < tol:
            config.log(f"  converged after {iteration} iterations (update {update:.3e})")
            break
    else:
        raise NoConvergenceError(
            f"no convergence after {max_iter} iterations (last update {history[-1]:.3e})",
            last_iterate=(u, v),
            history=history,
        )

    return SolutionPair(
        u=u,
        v=v,
        iterations=iteration,
        update_norm=update,
        residuals=residuals(problem, grid, (u, v)),
        cone=cone_verdicts(problem, u, v),
    )


def starting_values(problem, rhos: Sequence = ()) -> List[float]:
    """Constant initial guesses: each radius, geometric midpoints between them, and the file's own."""
    rhos = sorted(float(r) for r in rhos)
    starts = set(rhos)
    starts.update(math.sqrt(a * b) for a, b in zip(rhos, rhos[1:]))
    starts.update(float(x) for x in problem.solver.init)
    if not starts:
        starts.add(0.5)
    return sorted(starts)


def multi_start(problem, certificate=None, grid: Optional[Grid] = None, starts: Optional[Sequence[float]] = None) -> MultiStartResult:
    """Runs solve_picard from several constant guesses and keeps the distinct cone members.

    Picard iteration only finds attracting fixed points, so fewer solutions than
    a certificate promises may come back.
    """
    grid = grid or problem_grid(problem)
    if starts is None:
        starts = starting_values(problem, certificate.rhos if certificate is not None and certificate.valid else ())

    def attempt(start: float):
        init = (PiecewiseGridFunction.constant(grid, start), PiecewiseGridFunction.constant(grid, start))
        try:
            solution = solve_picard(problem, grid, init)
            return StartOutcome(start=start, converged=True, iterations=solution.iterations), solution.model_copy(
                update={"start": start}
            )
        except NoConvergenceError as e:
            return StartOutcome(start=start, converged=False, iterations=len(e.history), message=str(e)), None
        except ImpulseBVPError as e:
            return StartOutcome(start=start, converged=False, message=str(e)), None
        except Exception as e:
            config.log(f"  start {start:g} failed unexpectedly: {e}")
            return StartOutcome(start=start, converged=False, message=f"unexpected error: {e}"), None

    async def run_all():
        return await asyncio.gather(*(asyncio.to_thread(attempt, s) for s in starts))

    results = asyncio.run(run_all())

    kept: List[SolutionPair] = []
    outcomes = []
    for outcome, solution in results:
        outcomes.append(outcome)
        if solution is None or not solution.in_cone:
            continue
        scale = max(1.0, solution.u.sup_norm(), solution.v.sup_norm())
        distinct = all(
            max(
                float(np.max(np.abs(solution.u.values - other.u.values))),
                float(np.max(np.abs(solution.v.values - other.v.values))),
            )
            > 1e-3 * scale
            for other in kept
        )
        if distinct:
            kept.append(solution)
    return MultiStartResult(solutions=tuple(kept), outcomes=tuple(outcomes))
