from typing import Any, List, Sequence


class ImpulseBVPError(Exception):
    """Base class for every error raised by the helpers package."""


# --- Expressions ---
class ExpressionSyntaxError(ImpulseBVPError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class UnknownIdentifierError(ImpulseBVPError):
    pass


class NonIntegerExponentError(ImpulseBVPError):
    pass


class ExpressionEvaluationError(ImpulseBVPError):
    pass


# --- Kernels, measures, quadrature ---
class ResonantBoundaryError(ImpulseBVPError):
    pass


class DegenerateWindowError(ImpulseBVPError):
    pass


class AtomCollisionError(ImpulseBVPError):
    pass


class QuadratureError(ImpulseBVPError):
    pass


class GridError(ImpulseBVPError):
    pass


# --- Analysis ---
class PreconditionError(ImpulseBVPError):
    pass


class LadderLengthError(ImpulseBVPError):
    pass


# --- Solver ---
class NoConvergenceError(ImpulseBVPError):
    def __init__(self, message: str, last_iterate: Any = None, history: Sequence[float] = ()):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = list(history)


class SolverDivergenceError(ImpulseBVPError):
    pass


# --- Problem files ---
class ProblemValidationError(ImpulseBVPError):
    def __init__(self, violations: List[str]):
        super().__init__(f"{len(violations)} problem violation(s):\n" + "\n".join(f"  - {v}" for v in violations))
        self.violations = violations
