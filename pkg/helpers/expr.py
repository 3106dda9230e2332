"""Scalar expression language for the user-supplied model functions.

Sources look like ``(u^3 + t^3*v^3)/8 + 2`` or
``piecewise(w <= 1: (5/6)*w; else: (1/3)*w + 1/2)``. Literals are parsed as
exact rationals, so an expression evaluated on rational bindings stays exact
until a transcendental function (or a non-square ``sqrt``) is reached.
Evaluation also accepts numpy arrays, in which case everything is float and
vectorised.
"""

import math
from fractions import Fraction
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError
from pydantic import BaseModel, ConfigDict

from helpers.errors import (
    ExpressionEvaluationError,
    ExpressionSyntaxError,
    NonIntegerExponentError,
    UnknownIdentifierError,
)

DEFAULT_VARIABLES = ("t", "u", "v", "w", "s")
UNARY_FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log", "abs")
VARIADIC_FUNCTIONS = ("min", "max")

Scalar = Union[Fraction, float]

_parser = Lark(
    r"""
    ?start: sum

    ?sum: product
        | sum "+" product   -> add
        | sum "-" product   -> sub

    ?product: unary
        | product "*" unary  -> mul
        | product "/" unary  -> div

    ?unary: power
        | "-" unary          -> neg
        | "+" unary

    ?power: atom
        | atom "^" exponent  -> pow

    ?exponent: atom
        | "-" atom           -> neg

    ?atom: NUMBER                          -> num
         | NAME                            -> var
         | NAME "(" sum ("," sum)* ")"     -> call
         | "piecewise" "(" branch (";" branch)* ";" "else" ":" sum ")" -> piecewise
         | "(" sum ")"

    branch: sum COMPARE bound ":" sum

    bound: NUMBER                  -> bound_pos
         | NUMBER "/" NUMBER       -> bound_ratio
         | "-" NUMBER              -> bound_neg
         | "-" NUMBER "/" NUMBER   -> bound_neg_ratio

    COMPARE: "<=" | ">=" | "<" | ">"

    %import common.CNAME -> NAME
    %import common.NUMBER
    %import common.WS
    %ignore WS
    """,
    parser="lalr",
    propagate_positions=False,
)


# --- AST ---
class _Node(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Num(_Node):
    value: Fraction


class Var(_Node):
    name: str


class BinOp(_Node):
    op: Literal["+", "-", "*", "/"]
    left: "Expression"
    right: "Expression"


class Neg(_Node):
    operand: "Expression"


class Pow(_Node):
    base: "Expression"
    exponent: int


class Call(_Node):
    func: str
    args: Tuple["Expression", ...]


class Guard(_Node):
    lhs: "Expression"
    op: Literal["<=", "<", ">=", ">"]
    bound: Fraction


class Piecewise(_Node):
    branches: Tuple[Tuple[Guard, "Expression"], ...]
    default: "Expression"


Expression = Union[Num, Var, BinOp, Neg, Pow, Call, Piecewise]

for _model in (BinOp, Neg, Pow, Call, Guard, Piecewise):
    _model.model_rebuild()


@v_args(inline=True)
class _ToAst(Transformer):
    def __init__(self, variables: Sequence[str]):
        super().__init__()
        self.variables = set(variables)

    def num(self, token):
        return Num(value=Fraction(str(token)))

    def var(self, token):
        name = str(token)
        if name not in self.variables:
            raise UnknownIdentifierError(
                f"unknown identifier '{name}' (allowed here: {', '.join(sorted(self.variables))})"
            )
        return Var(name=name)

    def add(self, left, right):
        return BinOp(op="+", left=left, right=right)

    def sub(self, left, right):
        return BinOp(op="-", left=left, right=right)

    def mul(self, left, right):
        return BinOp(op="*", left=left, right=right)

    def div(self, left, right):
        return BinOp(op="/", left=left, right=right)

    def neg(self, operand):
        return Neg(operand=operand)

    def pow(self, base, exponent):
        value = _literal_value(exponent)
        if value is None or value.denominator != 1:
            raise NonIntegerExponentError(
                f"exponent must be an integer literal, got '{to_source(exponent)}' (use sqrt for half powers)"
            )
        return Pow(base=base, exponent=int(value))

    def call(self, name, *args):
        func = str(name)
        if func in UNARY_FUNCTIONS:
            if len(args) != 1:
                raise ExpressionSyntaxError(f"{func} takes exactly one argument, got {len(args)}")
        elif func in VARIADIC_FUNCTIONS:
            if len(args) < 2:
                raise ExpressionSyntaxError(f"{func} takes at least two arguments, got {len(args)}")
        else:
            raise UnknownIdentifierError(f"unknown function '{func}'")
        return Call(func=func, args=tuple(args))

    def branch(self, lhs, op, bound, body):
        return (Guard(lhs=lhs, op=str(op), bound=bound), body)

    def bound_pos(self, number):
        return Fraction(str(number))

    def bound_ratio(self, numerator, denominator):
        return Fraction(str(numerator)) / Fraction(str(denominator))

    def bound_neg(self, number):
        return -Fraction(str(number))

    def bound_neg_ratio(self, numerator, denominator):
        return -Fraction(str(numerator)) / Fraction(str(denominator))

    def piecewise(self, *children):
        *branches, default = children
        return Piecewise(branches=tuple(branches), default=default)


def _literal_value(node: Expression) -> Optional[Fraction]:
    match node:
        case Num(value=value):
            return value
        case Neg(operand=Num(value=value)):
            return -value
    return None


def parse(source: str, variables: Sequence[str] = DEFAULT_VARIABLES) -> Expression:
    """Parses expression text into an AST, checking identifiers against `variables`."""
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression")
    try:
        tree = _parser.parse(source)
    except UnexpectedInput as e:
        line = e.line if getattr(e, "line", -1) and e.line > 0 else None
        column = e.column if getattr(e, "column", -1) and e.column > 0 else None
        raise ExpressionSyntaxError(f"cannot parse '{source}'", line, column) from e
    try:
        return _ToAst(variables).transform(tree)
    except VisitError as e:
        # Transformer errors arrive wrapped; surface our own exception types.
        raise e.orig_exc from None


# --- Printing ---
def _format_number(value: Fraction) -> str:
    if value < 0:
        return f"(-{_format_number(-value)})"
    if value.denominator == 1:
        return str(value.numerator)
    scaled, digits = value, 0
    while scaled.denominator != 1:
        scaled *= 10
        digits += 1
        if digits > 40:
            return f"({value.numerator}/{value.denominator})"
    text = str(scaled.numerator).rjust(digits + 1, "0")
    return f"{text[:-digits]}.{text[-digits:]}"


def _format_bound(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def to_source(expr: Expression) -> str:
    """Canonical text form; parse(to_source(e)) rebuilds e."""
    match expr:
        case Num(value=value):
            return _format_number(value)
        case Var(name=name):
            return name
        case BinOp(op=op, left=left, right=right):
            return f"({to_source(left)} {op} {to_source(right)})"
        case Neg(operand=operand):
            return f"(-{to_source(operand)})"
        case Pow(base=base, exponent=exponent):
            text = to_source(base)
            if isinstance(base, Pow):
                text = f"({text})"
            return f"{text}^{exponent}"
        case Call(func=func, args=args):
            return f"{func}({', '.join(to_source(a) for a in args)})"
        case Piecewise(branches=branches, default=default):
            parts = [
                f"{to_source(guard.lhs)} {guard.op} {_format_bound(guard.bound)}: {to_source(body)}"
                for guard, body in branches
            ]
            parts.append(f"else: {to_source(default)}")
            return f"piecewise({'; '.join(parts)})"
    raise TypeError(f"not an expression node: {expr!r}")


# --- Inspection ---
def free_variables(expr: Expression) -> frozenset:
    match expr:
        case Num():
            return frozenset()
        case Var(name=name):
            return frozenset({name})
        case BinOp(left=left, right=right):
            return free_variables(left) | free_variables(right)
        case Neg(operand=operand):
            return free_variables(operand)
        case Pow(base=base):
            return free_variables(base)
        case Call(args=args):
            return frozenset().union(*(free_variables(a) for a in args))
        case Piecewise(branches=branches, default=default):
            names = free_variables(default)
            for guard, body in branches:
                names |= free_variables(guard.lhs) | free_variables(body)
            return names
    raise TypeError(f"not an expression node: {expr!r}")


def constant_value(expr: Expression) -> Optional[Fraction]:
    """The exact value of a variable-free rational expression, else None."""
    if free_variables(expr):
        return None
    try:
        value = evaluate(expr, {})
    except ExpressionEvaluationError:
        return None
    return value if isinstance(value, Fraction) else None


def guard_bounds(expr: Expression, variable: str) -> List[Fraction]:
    """Every piecewise bound compared directly against `variable`."""
    bounds: List[Fraction] = []

    def walk(node):
        match node:
            case BinOp(left=left, right=right):
                walk(left)
                walk(right)
            case Neg(operand=operand) | Pow(base=operand):
                walk(operand)
            case Call(args=args):
                for a in args:
                    walk(a)
            case Piecewise(branches=branches, default=default):
                for guard, body in branches:
                    if guard.lhs == Var(name=variable):
                        bounds.append(guard.bound)
                    walk(guard.lhs)
                    walk(body)
                walk(default)

    walk(expr)
    return sorted(set(bounds))


def continuity_gaps(expr: Expression, variable: str, eps: Fraction = Fraction(1, 10**12)) -> List[Dict[str, Any]]:
    """|left limit - right limit| at each guard bound on `variable`.

    The branch active on each side is picked at bound -/+ eps and then
    evaluated at the bound itself, so continuous pieces give a zero gap
    however steep they are. `eps` must be below the spacing of the bounds.
    """
    gaps = []
    for bound in guard_bounds(expr, variable):
        at = {variable: bound}
        try:
            left = _eval_scalar(expr, at, {variable: bound - eps})
            right = _eval_scalar(expr, at, {variable: bound + eps})
        except OverflowError as e:
            raise ExpressionEvaluationError(f"overflow evaluating '{to_source(expr)}': {e}") from e
        gaps.append({"bound": bound, "left": left, "right": right, "gap": abs(right - left)})
    return gaps


# --- Evaluation ---
def _exact_sqrt(value: Fraction) -> Optional[Fraction]:
    root_n, root_d = math.isqrt(value.numerator), math.isqrt(value.denominator)
    if root_n * root_n == value.numerator and root_d * root_d == value.denominator:
        return Fraction(root_n, root_d)
    return None


def _compare(lhs, op: str, bound):
    if op == "<=":
        return lhs <= bound
    if op == "<":
        return lhs < bound
    if op == ">=":
        return lhs >= bound
    return lhs > bound


def _eval_scalar(expr: Expression, env: Mapping[str, Scalar], guard_env: Optional[Mapping[str, Scalar]] = None) -> Scalar:
    """`guard_env`, when given, is used only to pick piecewise branches."""
    match expr:
        case Num(value=value):
            return value
        case Var(name=name):
            if name not in env:
                raise ExpressionEvaluationError(f"unbound variable '{name}'")
            return env[name]
        case BinOp(op=op, left=left, right=right):
            a = _eval_scalar(left, env, guard_env)
            b = _eval_scalar(right, env, guard_env)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if b == 0:
                raise ExpressionEvaluationError(f"division by zero in '{to_source(expr)}'")
            return a / b
        case Neg(operand=operand):
            return -_eval_scalar(operand, env, guard_env)
        case Pow(base=base, exponent=exponent):
            a = _eval_scalar(base, env, guard_env)
            if exponent < 0 and a == 0:
                raise ExpressionEvaluationError(f"division by zero in '{to_source(expr)}'")
            return a**exponent
        case Call(func=func, args=args):
            values = [_eval_scalar(a, env, guard_env) for a in args]
            if func == "sqrt":
                x = values[0]
                if x < 0:
                    raise ExpressionEvaluationError(f"sqrt of negative value {float(x):g}")
                if isinstance(x, Fraction):
                    exact = _exact_sqrt(x)
                    if exact is not None:
                        return exact
                return math.sqrt(x)
            if func == "sin":
                return math.sin(values[0])
            if func == "cos":
                return math.cos(values[0])
            if func == "exp":
                return math.exp(values[0])
            if func == "log":
                if values[0] <= 0:
                    raise ExpressionEvaluationError(f"log of non-positive value {float(values[0]):g}")
                return math.log(values[0])
            if func == "abs":
                return abs(values[0])
            if func == "min":
                return min(values)
            return max(values)
        case Piecewise(branches=branches, default=default):
            for guard, body in branches:
                if _compare(_eval_scalar(guard.lhs, env if guard_env is None else guard_env), guard.op, guard.bound):
                    return _eval_scalar(body, env, guard_env)
            return _eval_scalar(default, env, guard_env)
    raise TypeError(f"not an expression node: {expr!r}")


def _eval_array(expr: Expression, env: Mapping[str, np.ndarray]):
    match expr:
        case Num(value=value):
            return float(value)
        case Var(name=name):
            if name not in env:
                raise ExpressionEvaluationError(f"unbound variable '{name}'")
            return env[name]
        case BinOp(op=op, left=left, right=right):
            a = _eval_array(left, env)
            b = _eval_array(right, env)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if np.any(np.asarray(b) == 0):
                raise ExpressionEvaluationError(f"division by zero in '{to_source(expr)}'")
            return a / b
        case Neg(operand=operand):
            return -_eval_array(operand, env)
        case Pow(base=base, exponent=exponent):
            a = _eval_array(base, env)
            if exponent < 0 and np.any(np.asarray(a) == 0):
                raise ExpressionEvaluationError(f"division by zero in '{to_source(expr)}'")
            return np.power(a, float(exponent)) if exponent < 0 else a**exponent
        case Call(func=func, args=args):
            values = [_eval_array(a, env) for a in args]
            if func == "sqrt":
                if np.any(np.asarray(values[0]) < 0):
                    raise ExpressionEvaluationError("sqrt of negative value")
                return np.sqrt(values[0])
            if func == "sin":
                return np.sin(values[0])
            if func == "cos":
                return np.cos(values[0])
            if func == "exp":
                return np.exp(values[0])
            if func == "log":
                if np.any(np.asarray(values[0]) <= 0):
                    raise ExpressionEvaluationError("log of non-positive value")
                return np.log(values[0])
            if func == "abs":
                return np.abs(values[0])
            if func == "min":
                return np.minimum.reduce(np.broadcast_arrays(*values))
            return np.maximum.reduce(np.broadcast_arrays(*values))
        case Piecewise(branches=branches, default=default):
            shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
            result = np.zeros(shape)
            remaining = np.ones(shape, dtype=bool)
            for guard, body in [*branches, (None, default)]:
                if not remaining.any():
                    break
                sub_env = {k: v[remaining] for k, v in env.items()}
                if guard is None:
                    mask = remaining
                    result[mask] = _eval_array(body, sub_env)
                    break
                hit = np.asarray(_compare(_eval_array(guard.lhs, sub_env), guard.op, float(guard.bound)))
                hit = np.broadcast_to(hit, np.shape(remaining[remaining]))
                if hit.any():
                    mask = remaining.copy()
                    mask[remaining] = hit
                    result[mask] = _eval_array(body, {k: v[mask] for k, v in env.items()})
                    remaining &= ~mask
            return result
    raise TypeError(f"not an expression node: {expr!r}")


def evaluate(expr: Expression, env: Mapping[str, Any]):
    """Evaluates `expr` with the given bindings.

    Fraction bindings give exact Fraction results where possible. If any
    binding is a numpy array, every binding is broadcast to a common float
    array and the result has that shape.
    """
    if any(isinstance(v, np.ndarray) for v in env.values()):
        arrays = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in env.values()))
        array_env = dict(zip(env.keys(), arrays))
        shape = arrays[0].shape
        with np.errstate(over="ignore"):
            value = _eval_array(expr, array_env)
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
    try:
        return _eval_scalar(expr, env)
    except OverflowError as e:
        raise ExpressionEvaluationError(f"overflow evaluating '{to_source(expr)}': {e}") from e
