"""Constants and index conditions.

Everything the three conditions need except the f-extrema is a property of
the problem alone, so bound_constants() computes it once and the per-radius
checks only add the box extrema. With g constant and atomic measures those
constants are exact rationals; otherwise they come from quadrature.
"""

import itertools
import math
from fractions import Fraction
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize

from helpers import config
from helpers.cone import cone_constants
from helpers.errors import PreconditionError
from helpers.expr import Expression, constant_value, continuity_gaps, evaluate, free_variables
from helpers.measures import (
    _quad,
    apply,
    augment_bar,
    augment_tilde,
    density_min,
    kernel_transform,
    total_mass,
    weighted_integral,
)
from helpers.sl_kernel import GreenKernel, kernel_bound_check, kernel_eval

Number = Union[Fraction, float]
Verdict = Literal["pass", "fail", "inconclusive"]
Provenance = Literal["exact", "numeric-evidence"]
Mode = Literal["exact", "numeric"]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class EquationConstants(_Frozen):
    index: int
    gamma_norm: Number
    delta_norm: Number
    c_gamma: Number
    alpha_tilde_gamma: Number
    alpha_tilde_delta: Number
    alpha_bar_gamma: Number
    beta_one: Number
    int_K_tilde: Number
    int_K_bar: Number
    one_over_m: Number
    one_over_M: Number
    int_phi_g: Number
    # Aggregated coefficients; None when the precondition fails.
    A: Optional[Number] = None
    B: Optional[Number] = None
    C: Optional[Number] = None
    provenance: Provenance

    @property
    def m(self) -> Number:
        return 1 / self.one_over_m

    @property
    def M(self) -> Number:
        return 1 / self.one_over_M


class BoundConstants(_Frozen):
    equations: Tuple[EquationConstants, EquationConstants]
    mode: Mode


class BoxExtremum(_Frozen):
    value: Number
    argpoint: Tuple[Number, Number, Number]
    box: Tuple[Tuple[Number, Number], Tuple[Number, Number], Tuple[Number, Number]]
    provenance: Provenance


class EquationCondition(_Frozen):
    index: int
    extremum: BoxExtremum
    lhs: Number
    threshold: Number
    verdict: Verdict


class ConditionReport(_Frozen):
    rho: Number
    condition: Literal["I1", "I0", "I0*"]
    c: Optional[Number] = None
    equations: Tuple[EquationCondition, ...]
    verdict: Verdict
    provenance: Provenance

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


class PreconditionVerdict(_Frozen):
    values: Tuple[Number, Number]
    passed_each: Tuple[bool, bool]
    passed: bool


class Diagnostic(_Frozen):
    name: str
    equation: Optional[int] = None
    passed: bool
    detail: str
    provenance: Provenance = "numeric-evidence"


# --- Bound constants ---
def _to_mode(value: Number, mode: Mode) -> Number:
    return float(value) if mode == "numeric" else value


def _row_extrema_exact(kernel: GreenKernel, kappa: Fraction, a: Fraction, b: Fraction) -> Tuple[Fraction, Fraction]:
    # t -> int_0^1 k(t,s) ds is a concave quadratic; t -> int_a^b k(t,s) ds is concave on [0,1]
    q0 = kernel.row_integral(Fraction(0), Fraction(0), Fraction(1))
    qh = kernel.row_integral(Fraction(1, 2), Fraction(0), Fraction(1))
    q1 = kernel.row_integral(Fraction(1), Fraction(0), Fraction(1))
    curvature = 2 * (q0 - 2 * qh + q1)
    slope = q1 - q0 - curvature
    candidates = [Fraction(0), Fraction(1)]
    if curvature < 0:
        candidates.append(min(max(-slope / (2 * curvature), Fraction(0)), Fraction(1)))
    sup = max(kernel.row_integral(t, Fraction(0), Fraction(1)) for t in candidates)
    inf = min(kernel.row_integral(a, a, b), kernel.row_integral(b, a, b))
    return kappa * sup, kappa * inf


def _row_integral_numeric(kernel: GreenKernel, g: Expression, t: float, lo: float, hi: float) -> float:
    return _quad(
        lambda s: float(kernel_eval(kernel, t, s)) * float(evaluate(g, {"s": s, "t": s})),
        lo,
        hi,
        [t],
    )


def _refine(fn, ts: np.ndarray, values: np.ndarray, best: int, maximize: bool) -> float:
    lo = ts[max(best - 1, 0)]
    hi = ts[min(best + 1, len(ts) - 1)]
    if hi <= lo:
        return float(values[best])
    sign = -1.0 if maximize else 1.0
    result = optimize.minimize_scalar(lambda t: sign * fn(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    refined = sign * float(result.fun)
    return max(refined, float(values[best])) if maximize else min(refined, float(values[best]))


def _row_extrema_numeric(kernel: GreenKernel, g: Expression, a: float, b: float) -> Tuple[float, float]:
    full = lambda t: _row_integral_numeric(kernel, g, t, 0.0, 1.0)
    window = lambda t: _row_integral_numeric(kernel, g, t, a, b)
    ts = np.linspace(0.0, 1.0, config.KERNEL_SAMPLES)
    full_values = np.array([full(t) for t in ts])
    sup = _refine(full, ts, full_values, int(np.argmax(full_values)), maximize=True)
    tw = np.linspace(a, b, config.KERNEL_SAMPLES)
    window_values = np.array([window(t) for t in tw])
    inf = _refine(window, tw, window_values, int(np.argmin(window_values)), maximize=False)
    return sup, inf


def _phi_g_integral(kernel: GreenKernel, g: Expression, a, b, mode: Mode) -> Number:
    kappa = constant_value(g)
    if mode == "exact" and kappa is not None:
        # Phi is quadratic, so Simpson's rule is exact
        mid = (a + b) / 2
        return kappa * (b - a) * (kernel.phi(a) + 4 * kernel.phi(mid) + kernel.phi(b)) / 6
    return _quad(lambda s: float(kernel.phi(s)) * float(evaluate(g, {"s": s, "t": s})), float(a), float(b))


def equation_constants(equation, mode: Mode = "exact") -> EquationConstants:
    basis, kernel, imp = equation.basis, equation.kernel, equation.impulse
    a, b = equation.interval.window_a, equation.interval.window_b
    tilde = augment_tilde(equation.alpha, equation.h2, imp.p12, imp.tau)
    bar = augment_bar(equation.alpha, equation.h1, imp.p11, imp.tau)

    ag = apply(tilde, basis.gamma)
    ad = apply(tilde, basis.delta)
    bg = apply(bar, basis.gamma)
    beta_one = total_mass(equation.beta)
    K_tilde = weighted_integral(kernel_transform(kernel, tilde), equation.g, Fraction(0), Fraction(1), mode)
    K_bar = weighted_integral(kernel_transform(kernel, bar), equation.g, a, b, mode)

    kappa = constant_value(equation.g)
    if mode == "exact" and kappa is not None:
        one_over_m, one_over_M = _row_extrema_exact(kernel, kappa, a, b)
    else:
        one_over_m, one_over_M = _row_extrema_numeric(kernel, equation.g, float(a), float(b))
    phi_g = _phi_g_integral(kernel, equation.g, a, b, mode)
    if phi_g <= 0 or one_over_M <= 0 or one_over_m <= 0:
        raise PreconditionError(
            f"equation {equation.index}: the integral of Phi*g over [{a}, {b}] is {float(phi_g):.6g}; "
            "it must be positive (kernel positivity on the window)"
        )

    values = {
        "gamma_norm": basis.gamma_norm,
        "delta_norm": basis.delta_norm,
        "c_gamma": equation.interval.c_gamma,
        "alpha_tilde_gamma": ag,
        "alpha_tilde_delta": ad,
        "alpha_bar_gamma": bg,
        "beta_one": beta_one,
        "int_K_tilde": K_tilde,
        "int_K_bar": K_bar,
        "one_over_m": one_over_m,
        "one_over_M": one_over_M,
        "int_phi_g": phi_g,
    }
    values = {k: _to_mode(v, mode) for k, v in values.items()}
    g_norm, d_norm = values["gamma_norm"], values["delta_norm"]
    A = B = C = None
    if values["alpha_tilde_gamma"] < 1:
        one_minus = 1 - values["alpha_tilde_gamma"]
        A = (g_norm * values["alpha_tilde_delta"] / one_minus + d_norm) * (
            _to_mode(equation.l2, mode) * values["beta_one"] + _to_mode(imp.p22, mode)
        )
        B = values["one_over_m"] + g_norm / one_minus * values["int_K_tilde"]
    if values["alpha_bar_gamma"] < 1:
        C = values["c_gamma"] * g_norm / (1 - values["alpha_bar_gamma"]) * values["int_K_bar"] + values["one_over_M"]

    exact = all(isinstance(v, Fraction) for v in values.values())
    return EquationConstants(index=equation.index, A=A, B=B, C=C, provenance="exact" if exact else "numeric-evidence", **values)


def bound_constants(problem, mode: Optional[Mode] = None) -> BoundConstants:
    mode = mode or problem.analysis.mode
    first, second = (equation_constants(eq, mode) for eq in problem.equations)
    return BoundConstants(equations=(first, second), mode=mode)


def check_precondition(problem, constants: Optional[BoundConstants] = None) -> PreconditionVerdict:
    """alpha_tilde_i[gamma_i] < 1 for both equations, strictly."""
    constants = constants or bound_constants(problem)
    values = tuple(k.alpha_tilde_gamma for k in constants.equations)
    each = tuple(v < 1 for v in values)
    return PreconditionVerdict(values=values, passed_each=each, passed=all(each))


# --- Box extrema ---
def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    # cosine clustering puts more points near the box faces, where extrema of smooth f usually sit
    k = np.arange(n)
    return lo + (hi - lo) * (1 - np.cos(np.pi * k / (n - 1))) / 2


def _box_extremum(f: Expression, box, kind: Literal["sup", "inf"], monotone=None, samples: int = config.BOX_SAMPLES):
    names = ("t", "u", "v")
    used = free_variables(f)
    fixed, free = {}, []
    for name, (lo, hi) in zip(names, box):
        hint = getattr(monotone, name, "none") if monotone is not None else "none"
        if lo == hi or name not in used:
            fixed[name] = lo
        elif hint == "none":
            free.append(name)
        elif (kind == "sup") == (hint == "increasing"):
            fixed[name] = hi
        else:
            fixed[name] = lo

    if not free:
        value = evaluate(f, fixed)
        provenance = "exact" if isinstance(value, Fraction) else "numeric-evidence"
        return value, tuple(fixed[n] for n in names), provenance

    bounds = dict(zip(names, box))
    axes = [_axis(float(bounds[n][0]), float(bounds[n][1]), samples) for n in free]
    mesh = np.meshgrid(*axes, indexing="ij")
    env = {n: np.full(mesh[0].shape, float(fixed[n])) for n in fixed}
    env.update({n: m for n, m in zip(free, mesh)})
    sampled = evaluate(f, env)
    flat = int(np.argmax(sampled) if kind == "sup" else np.argmin(sampled))
    point = {n: float(m.flat[flat]) for n, m in zip(free, mesh)}
    best_value = float(sampled.flat[flat])

    # exact corner values; keep a corner when it is at least as extreme as the best sample
    for corner in itertools.product(*(bounds[n] for n in free)):
        corner_env = {**fixed, **dict(zip(free, corner))}
        value = evaluate(f, corner_env)
        better = float(value) >= best_value if kind == "sup" else float(value) <= best_value
        if better:
            best_value, point = value, dict(zip(free, corner))
    argpoint = tuple(point[n] if n in point else fixed[n] for n in names)
    return best_value, argpoint, "numeric-evidence"


def _scaled(f: Expression, box, kind, rho, monotone, samples) -> BoxExtremum:
    value, argpoint, provenance = _box_extremum(f, box, kind, monotone, samples)
    if isinstance(value, float) and not math.isfinite(value):
        provenance = "numeric-evidence"
    return BoxExtremum(value=value / rho, argpoint=argpoint, box=tuple(box), provenance=provenance)


def f_sup_box(f: Expression, rho: Number, monotone=None, samples: int = config.BOX_SAMPLES) -> BoxExtremum:
    """sup of f/rho over [0,1] x [0,rho] x [0,rho]."""
    zero = Fraction(0) if isinstance(rho, Fraction) else 0.0
    box = ((zero, zero + 1), (zero, rho), (zero, rho))
    return _scaled(f, box, "sup", rho, monotone, samples)


def f_inf_box(
    f: Expression,
    rho: Number,
    c: Number,
    which: Literal["first", "second"],
    window: Tuple[Number, Number],
    monotone=None,
    samples: int = config.BOX_SAMPLES,
) -> BoxExtremum:
    """inf of f/rho over [a,b] x [rho, rho/c] x [0, rho/c] (first) or [a,b] x [0, rho/c] x [rho, rho/c] (second)."""
    zero = rho * 0
    top = rho / c
    if which == "first":
        box = (tuple(window), (rho, top), (zero, top))
    else:
        box = (tuple(window), (zero, top), (rho, top))
    return _scaled(f, box, "inf", rho, monotone, samples)


def f_inf_box_star(
    f: Expression,
    rho: Number,
    c: Number,
    window: Tuple[Number, Number],
    monotone=None,
    samples: int = config.BOX_SAMPLES,
) -> BoxExtremum:
    """inf of f/rho over [a,b] x [0, rho/c] x [0, rho/c]."""
    zero = rho * 0
    box = (tuple(window), (zero, rho / c), (zero, rho / c))
    return _scaled(f, box, "inf", rho, monotone, samples)


# --- Conditions ---
def _verdict(lhs: Number, side: Literal["below", "above"], mode: Mode) -> Verdict:
    """Strict comparison of lhs with 1; within the numeric margin the answer is inconclusive."""
    gap = (1 - lhs) if side == "below" else (lhs - 1)
    if mode == "exact" and isinstance(gap, Fraction):
        return "pass" if gap > 0 else "fail"
    if gap > config.NUMERIC_MARGIN:
        return "pass"
    if gap < -config.NUMERIC_MARGIN:
        return "fail"
    return "inconclusive"


def _combine(verdicts: List[Verdict], quantifier: Literal["all", "any"]) -> Verdict:
    if quantifier == "all":
        if all(v == "pass" for v in verdicts):
            return "pass"
        return "fail" if any(v == "fail" for v in verdicts) else "inconclusive"
    if any(v == "pass" for v in verdicts):
        return "pass"
    return "fail" if all(v == "fail" for v in verdicts) else "inconclusive"


def _prepare(problem, rho, constants, mode):
    mode = mode or (constants.mode if constants is not None else problem.analysis.mode)
    constants = constants or bound_constants(problem, mode)
    precondition = check_precondition(problem, constants)
    if not precondition.passed:
        values = ", ".join(f"{float(v):.6g}" for v in precondition.values)
        raise PreconditionError(f"alpha_tilde_i[gamma_i] < 1 fails (values {values})")
    rho = float(rho) if mode == "numeric" else Fraction(rho)
    return rho, constants, mode


def _provenance(equations: List[EquationCondition], constants: BoundConstants) -> Provenance:
    exact = all(e.extremum.provenance == "exact" and isinstance(e.lhs, Fraction) for e in equations)
    exact = exact and all(k.provenance == "exact" for k in constants.equations)
    return "exact" if exact else "numeric-evidence"


def check_I1(problem, rho, constants: Optional[BoundConstants] = None, mode: Optional[Mode] = None) -> ConditionReport:
    """A_i + f_i^{0,rho} B_i < 1 for both equations."""
    rho, constants, mode = _prepare(problem, rho, constants, mode)
    samples = problem.analysis.samples
    rows = []
    for eq, k in zip(problem.equations, constants.equations):
        ext = f_sup_box(eq.f, rho, eq.monotone, samples)
        value = float(ext.value) if mode == "numeric" else ext.value
        lhs = k.A + value * k.B
        rows.append(
            EquationCondition(
                index=eq.index, extremum=ext, lhs=lhs, threshold=(1 - k.A) / k.B, verdict=_verdict(lhs, "below", mode)
            )
        )
    return ConditionReport(
        rho=rho,
        condition="I1",
        equations=tuple(rows),
        verdict=_combine([r.verdict for r in rows], "all"),
        provenance=_provenance(rows, constants),
    )


def _lower_condition(problem, rho, c, constants, mode, star: bool) -> ConditionReport:
    rho, constants, mode = _prepare(problem, rho, constants, mode)
    if c is None:
        c = cone_constants(problem).c
    c = float(c) if mode == "numeric" else Fraction(c)
    samples = problem.analysis.samples
    rows = []
    for eq, k in zip(problem.equations, constants.equations):
        window = (eq.interval.window_a, eq.interval.window_b)
        if mode == "numeric":
            window = tuple(float(x) for x in window)
        if star:
            ext = f_inf_box_star(eq.f, rho, c, window, eq.monotone, samples)
        else:
            ext = f_inf_box(eq.f, rho, c, "first" if eq.index == 1 else "second", window, eq.monotone, samples)
        value = float(ext.value) if mode == "numeric" else ext.value
        lhs = value * k.C
        rows.append(
            EquationCondition(index=eq.index, extremum=ext, lhs=lhs, threshold=1 / k.C, verdict=_verdict(lhs, "above", mode))
        )
    return ConditionReport(
        rho=rho,
        condition="I0*" if star else "I0",
        c=c,
        equations=tuple(rows),
        verdict=_combine([r.verdict for r in rows], "any" if star else "all"),
        provenance=_provenance(rows, constants),
    )


def check_I0(problem, rho, c=None, constants: Optional[BoundConstants] = None, mode: Optional[Mode] = None) -> ConditionReport:
    """f_{i,(rho,rho/c)} C_i > 1 for both equations."""
    return _lower_condition(problem, rho, c, constants, mode, star=False)


def check_I0_star(
    problem, rho, c=None, constants: Optional[BoundConstants] = None, mode: Optional[Mode] = None
) -> ConditionReport:
    """f*_{i,(0,rho/c)} C_i > 1 for at least one equation."""
    return _lower_condition(problem, rho, c, constants, mode, star=True)


# --- Assumption diagnostics ---
def _growth_witness(expr: Expression, lower, upper, ws: np.ndarray) -> Optional[str]:
    values = evaluate(expr, {"w": ws})
    if lower is not None:
        bad = np.flatnonzero(values < float(lower) * ws - 1e-12)
        if bad.size:
            w = ws[bad[0]]
            return f"value {values[bad[0]]:.6g} < {float(lower) * w:.6g} at w={w:.6g}"
    if upper is not None:
        bad = np.flatnonzero(values > float(upper) * ws + 1e-12)
        if bad.size:
            w = ws[bad[0]]
            return f"value {values[bad[0]]:.6g} > {float(upper) * w:.6g} at w={w:.6g}"
    return None


def assumption_diagnostics(problem, w_max: Number) -> List[Diagnostic]:
    """Sampled checks of the standing assumptions. None of them blocks an analysis."""
    out: List[Diagnostic] = []
    ws = np.linspace(0.0, float(w_max), config.GROWTH_SAMPLES)
    for eq in problem.equations:
        i = eq.index

        axis = np.linspace(0.0, float(w_max), 17)
        t, u, v = np.meshgrid(np.linspace(0.0, 1.0, 17), axis, axis, indexing="ij")
        f_min = float(np.min(evaluate(eq.f, {"t": t, "u": u, "v": v})))
        out.append(
            Diagnostic(
                name="f-nonnegativity",
                equation=i,
                passed=f_min >= 0,
                detail=f"min f over [0,1]x[0,{float(w_max):.6g}]^2 sampled at {f_min:.6g}",
            )
        )

        witness = _growth_witness(eq.H, eq.h1, eq.h2, ws)
        out.append(
            Diagnostic(
                name="H growth",
                equation=i,
                passed=witness is None,
                detail=witness or f"h1 w <= H(w) <= h2 w on [0, {float(w_max):.6g}]",
            )
        )
        witness = _growth_witness(eq.L, None, eq.l2, ws)
        out.append(
            Diagnostic(
                name="L growth",
                equation=i,
                passed=witness is None,
                detail=witness or f"L(w) <= l2 w on [0, {float(w_max):.6g}]",
            )
        )

        check = kernel_bound_check(eq.kernel, eq.interval.window_a, eq.interval.window_b, eq.interval.c_phi, config.KERNEL_SAMPLES)
        out.append(
            Diagnostic(
                name="kernel bounds",
                equation=i,
                passed=check["passed"],
                detail=(
                    f"max(k - Phi) = {check['max_k_minus_phi']:.3e}, "
                    f"max(c_Phi Phi - k) on the window = {check['max_cphi_phi_minus_k']:.3e}"
                ),
            )
        )

        for label, measure in (("alpha", eq.alpha), ("beta", eq.beta)):
            lowest = density_min(measure, config.DENSITY_SAMPLES)
            if lowest is not None:
                out.append(
                    Diagnostic(
                        name="measure-positivity",
                        equation=i,
                        passed=lowest >= 0,
                        detail=f"{label} density sampled minimum {lowest:.6g}",
                    )
                )

        for label, expr in (("H", eq.H), ("L", eq.L), ("I", eq.impulse.I), ("N", eq.impulse.N)):
            gaps = continuity_gaps(expr, "w")
            worst = max((float(g["gap"]) for g in gaps), default=0.0)
            if gaps:
                out.append(
                    Diagnostic(
                        name="continuity",
                        equation=i,
                        passed=worst <= 1e-9,
                        detail=f"{label}: largest jump across piecewise bounds {worst:.3e}",
                        provenance="exact",
                    )
                )
    return out
