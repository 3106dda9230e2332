"""Problem files: the JSON schema, its validation and the compiled ProblemSpec.

Loading is not fail-fast. Structural errors from pydantic are collected
first; if the file is well-formed, every equation is then checked against the
standing assumptions and all violations are reported together.
"""

import json
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError

from helpers import config
from helpers.errors import ImpulseBVPError, ProblemValidationError
from helpers.expr import Expression, parse
from helpers.impulse import ImpulseCoefficients, ImpulseSpec, impulse_coeffs
from helpers.measures import Atom, StieltjesMeasure
from helpers.sl_kernel import (
    BoundaryBasis,
    GreenKernel,
    IntervalConstants,
    SLCoefficients,
    interval_constants,
    make_basis,
    make_kernel,
)

F_VARIABLES = ("t", "u", "v")
G_VARIABLES = ("t", "s")
W_VARIABLES = ("w",)
PATTERNS = ("S1", "S2", "S3", "S4", "S5", "S6")


def to_fraction(value) -> Fraction:
    """Accepts JSON ints, decimals and "p/q" strings."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("expected a rational number, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a rational number: {value!r}")
    raise ValueError(f"expected a rational number, got {type(value).__name__}")


Rational = Annotated[Fraction, BeforeValidator(to_fraction)]


# --- File schema ---
class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


class BoundarySection(_Schema):
    a1: Rational = Field(description="Coefficient of w(0) in the left boundary operator.")
    b1: Rational = Field(description="Coefficient of -w'(0) in the left boundary operator.")
    a2: Rational = Field(description="Coefficient of w(1) in the right boundary operator.")
    b2: Rational = Field(description="Coefficient of w'(1) in the right boundary operator.")


class ImpulseSection(_Schema):
    tau: Rational = Field(description="Impulse point, strictly inside (0, 1).")
    I: str = Field(default="0", description="Jump of the solution, an expression in w.")
    N: str = Field(default="0", description="Jump of the derivative, an expression in w.")
    p11: Rational
    p12: Rational
    p22: Rational


class HSection(_Schema):
    expr: str
    h1: Rational = Field(description="Lower linear growth bound h1 w <= H(w).")
    h2: Rational = Field(description="Upper linear growth bound H(w) <= h2 w.")


class LSection(_Schema):
    expr: str
    l2: Rational = Field(description="Upper linear growth bound L(w) <= l2 w.")


class AtomSection(_Schema):
    at: Rational
    weight: Rational


class MeasureSection(_Schema):
    atoms: List[AtomSection] = Field(default_factory=list)
    density: Optional[str] = Field(default=None, description="Nonnegative density, an expression in s.")


class MonotoneSection(_Schema):
    t: Literal["increasing", "decreasing", "none"] = "none"
    u: Literal["increasing", "decreasing", "none"] = "none"
    v: Literal["increasing", "decreasing", "none"] = "none"


class EquationSection(_Schema):
    bc: BoundarySection
    f: str = Field(description="Nonlinearity f(t, u, v).")
    g: str = Field(default="1", description="Weight g(t).")
    monotone: MonotoneSection = Field(default_factory=MonotoneSection)
    impulse: ImpulseSection
    H: HSection
    L: LSection
    alpha: MeasureSection = Field(description="Measure inside H; acts on this equation's own unknown.")
    beta: MeasureSection = Field(description="Measure inside L; acts on the other equation's unknown.")
    window: Tuple[Rational, Rational] = Field(description="Subinterval [a, b] of (tau, 1] used by the cone.")


class SearchGridSection(_Schema):
    lo: Rational
    ratio: Rational = Fraction(2)
    count: int

    def values(self) -> List[Fraction]:
        return [self.lo * self.ratio**k for k in range(self.count)]


class AnalysisSection(_Schema):
    pattern: Optional[Literal["S1", "S2", "S3", "S4", "S5", "S6"]] = None
    rho: List[Rational] = Field(default_factory=list)
    search_grid: Optional[SearchGridSection] = None
    override_c: Optional[Rational] = None
    samples: int = config.BOX_SAMPLES
    mode: Literal["exact", "numeric"] = "exact"
    w_max: Optional[Rational] = Field(default=None, description="Upper end of the p-bound and growth checks.")


class SolverSection(_Schema):
    grid_n: int = config.GRID_N
    damping: Rational = Fraction(1, 2)
    tol: float = config.TOL
    max_iter: int = config.MAX_ITER
    init: List[Rational] = Field(default_factory=list, description="Extra constant initial guesses.")


class ProblemFile(_Schema):
    name: str
    description: str = ""
    equations: List[EquationSection] = Field(min_length=2, max_length=2)
    analysis: AnalysisSection = Field(default_factory=AnalysisSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    reference_values: Dict[str, Rational] = Field(default_factory=dict)


# --- Compiled problem ---
class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Equation(_Frozen):
    index: int
    coeffs: SLCoefficients
    basis: BoundaryBasis
    kernel: GreenKernel
    f: Expression
    g: Expression
    monotone: MonotoneSection
    impulse: ImpulseSpec
    impulse_coeffs: ImpulseCoefficients
    H: Expression
    h1: Fraction
    h2: Fraction
    L: Expression
    l2: Fraction
    alpha: StieltjesMeasure
    beta: StieltjesMeasure
    interval: IntervalConstants
    sources: Dict[str, str]

    @property
    def tau(self) -> Fraction:
        return self.impulse.tau


class ProblemSpec(_Frozen):
    name: str
    description: str = ""
    equations: Tuple[Equation, Equation]
    analysis: AnalysisSection
    solver: SolverSection
    reference_values: Dict[str, Fraction] = Field(default_factory=dict)
    path: Optional[str] = None

    @property
    def taus(self) -> Tuple[Fraction, ...]:
        return tuple(eq.tau for eq in self.equations)


def _format_location(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def _expression(label: str, source: Optional[str], variables, violations: List[str]) -> Optional[Expression]:
    if source is None:
        return None
    try:
        return parse(source, variables)
    except ImpulseBVPError as e:
        violations.append(f"{label}: {e}")
        return None


def _measure(label: str, section: MeasureSection, violations: List[str]) -> Optional[StieltjesMeasure]:
    ok = True
    for atom in section.atoms:
        if not 0 <= atom.at <= 1:
            violations.append(f"{label}: atom at {atom.at} outside [0, 1] (measure support)")
            ok = False
        if atom.weight <= 0:
            violations.append(f"{label}: atom weight {atom.weight} at {atom.at} is not positive (measure-positivity)")
            ok = False
    density = _expression(f"{label}.density", section.density, G_VARIABLES, violations)
    if section.density is not None and density is None:
        ok = False
    if not ok:
        return None
    return StieltjesMeasure(atoms=tuple(Atom(at=a.at, weight=a.weight) for a in section.atoms), density=density)


def _compile_equation(index: int, section: EquationSection, violations: List[str]) -> Optional[Equation]:
    label = f"equation {index}"
    before = len(violations)

    bc = section.bc
    coeffs = basis = None
    if min(bc.a1, bc.b1, bc.a2, bc.b2) < 0:
        violations.append(f"{label}.bc: boundary coefficients must be nonnegative")
    else:
        coeffs = SLCoefficients(a1=bc.a1, b1=bc.b1, a2=bc.a2, b2=bc.b2)
        try:
            basis = make_basis(coeffs)
        except ImpulseBVPError as e:
            violations.append(f"{label}.bc: {e}")

    f = _expression(f"{label}.f", section.f, F_VARIABLES, violations)
    g = _expression(f"{label}.g", section.g, G_VARIABLES, violations)
    H = _expression(f"{label}.H", section.H.expr, W_VARIABLES, violations)
    L = _expression(f"{label}.L", section.L.expr, W_VARIABLES, violations)
    I = _expression(f"{label}.impulse.I", section.impulse.I, W_VARIABLES, violations)
    N = _expression(f"{label}.impulse.N", section.impulse.N, W_VARIABLES, violations)

    imp = section.impulse
    if not 0 < imp.tau < 1:
        violations.append(f"{label}.impulse: tau={imp.tau} must lie strictly inside (0, 1) (impulse placement)")
    if imp.p11 <= 0 or imp.p12 <= 0 or imp.p22 < 0:
        violations.append(f"{label}.impulse: need p11 > 0, p12 > 0, p22 >= 0 (impulse growth bounds)")
    if imp.p11 > imp.p12:
        violations.append(f"{label}.impulse: p11={imp.p11} exceeds p12={imp.p12} (impulse growth bounds)")

    if section.H.h1 < 0 or section.H.h1 > section.H.h2:
        violations.append(f"{label}.H: need 0 <= h1 <= h2, got h1={section.H.h1}, h2={section.H.h2} (H growth bounds)")
    if section.L.l2 < 0:
        violations.append(f"{label}.L: l2={section.L.l2} must be nonnegative (L growth bound)")

    a, b = section.window
    if not (imp.tau < a < b <= 1):
        violations.append(f"{label}.window: [{a}, {b}] must satisfy tau={imp.tau} < a < b <= 1 (window-placement)")
    interval = None
    if basis is not None and 0 <= a < b <= 1:
        try:
            interval = interval_constants(basis, a, b)
        except ImpulseBVPError as e:
            violations.append(f"{label}.window: {e}")

    alpha = _measure(f"{label}.alpha", section.alpha, violations)
    beta = _measure(f"{label}.beta", section.beta, violations)
    if alpha is not None:
        for atom in alpha.atoms:
            if atom.at == imp.tau:
                violations.append(
                    f"{label}.alpha: atom at the impulse point tau={imp.tau}; "
                    "the measure must be continuous at tau (measure-continuity)"
                )

    if len(violations) > before:
        return None
    return Equation(
        index=index,
        coeffs=coeffs,
        basis=basis,
        kernel=make_kernel(basis),
        f=f,
        g=g,
        monotone=section.monotone,
        impulse=ImpulseSpec(tau=imp.tau, I=I, N=N, p11=imp.p11, p12=imp.p12, p22=imp.p22),
        impulse_coeffs=impulse_coeffs(basis, imp.tau),
        H=H,
        h1=section.H.h1,
        h2=section.H.h2,
        L=L,
        l2=section.L.l2,
        alpha=alpha,
        beta=beta,
        interval=interval,
        sources={
            "f": section.f,
            "g": section.g,
            "H": section.H.expr,
            "L": section.L.expr,
            "I": imp.I,
            "N": imp.N,
        },
    )


def _check_analysis(raw: ProblemFile, violations: List[str]) -> None:
    analysis, solver = raw.analysis, raw.solver
    if any(rho <= 0 for rho in analysis.rho):
        violations.append("analysis.rho: every radius must be positive")
    if analysis.search_grid is not None:
        grid = analysis.search_grid
        if grid.lo <= 0 or grid.ratio <= 1 or grid.count < 0:
            violations.append("analysis.search_grid: need lo > 0, ratio > 1, count >= 0")
    if analysis.override_c is not None and not 0 < analysis.override_c <= 1:
        violations.append(f"analysis.override_c: {analysis.override_c} must lie in (0, 1]")
    if analysis.samples < 2:
        violations.append("analysis.samples: need at least 2 points per axis")
    if analysis.w_max is not None and analysis.w_max <= 0:
        violations.append("analysis.w_max: must be positive")
    if not 0 < solver.damping <= 1:
        violations.append(f"solver.damping: {solver.damping} must lie in (0, 1]")
    if solver.grid_n < 8:
        violations.append(f"solver.grid_n: {solver.grid_n} is below the minimum of 8 panels")
    if solver.tol <= 0 or solver.max_iter < 1:
        violations.append("solver: need tol > 0 and max_iter >= 1")
    if any(x < 0 for x in solver.init):
        violations.append("solver.init: initial guesses must be nonnegative")


def compile_problem(data: dict, path: Optional[str] = None) -> ProblemSpec:
    """Validates a decoded problem file and builds the ProblemSpec, reporting every violation."""
    try:
        raw = ProblemFile.model_validate(data)
    except ValidationError as e:
        raise ProblemValidationError([f"{_format_location(err['loc'])}: {err['msg']}" for err in e.errors()]) from None

    violations: List[str] = []
    equations = [_compile_equation(i, section, violations) for i, section in enumerate(raw.equations, 1)]

    # beta_i acts on the other unknown, so it must be continuous at the other tau
    for i, section in enumerate(raw.equations):
        other_tau = raw.equations[1 - i].impulse.tau
        for atom in section.beta.atoms:
            if atom.at == other_tau:
                violations.append(
                    f"equation {i + 1}.beta: atom at tau={other_tau} of the unknown it acts on; "
                    "the measure must be continuous there (measure-continuity)"
                )
    _check_analysis(raw, violations)

    if violations:
        raise ProblemValidationError(violations)
    return ProblemSpec(
        name=raw.name,
        description=raw.description,
        equations=tuple(equations),
        analysis=raw.analysis,
        solver=raw.solver,
        reference_values=raw.reference_values,
        path=path,
    )


def load(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ProblemValidationError([f"cannot read {path}: {e}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemValidationError([f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"]) from None
    return compile_problem(data, str(path))
