import asyncio
import itertools
from fractions import Fraction
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict

from helpers import config
from helpers.cone import cone_constants
from helpers.conditions import BoundConstants, ConditionReport, bound_constants, check_I0, check_I0_star, check_I1
from helpers.errors import LadderLengthError

Number = Union[Fraction, float]
Requirement = Literal["I0|I0*", "I0", "I1"]


class PatternRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    conditions: Tuple[Requirement, ...]
    # (i, j, scaled): rho_i / c < rho_j when scaled, else rho_i < rho_j
    gaps: Tuple[Tuple[int, int, bool], ...]
    min_solutions: int


PATTERNS: Dict[str, PatternRule] = {
    "S1": PatternRule(name="S1", conditions=("I0|I0*", "I1"), gaps=((0, 1, True),), min_solutions=1),
    "S2": PatternRule(name="S2", conditions=("I1", "I0"), gaps=((0, 1, False),), min_solutions=1),
    "S3": PatternRule(
        name="S3", conditions=("I0|I0*", "I1", "I0"), gaps=((0, 1, True), (1, 2, False)), min_solutions=2
    ),
    "S4": PatternRule(name="S4", conditions=("I1", "I0", "I1"), gaps=((0, 1, False), (1, 2, True)), min_solutions=2),
    "S5": PatternRule(
        name="S5",
        conditions=("I0|I0*", "I1", "I0", "I1"),
        gaps=((0, 1, True), (1, 2, False), (2, 3, True)),
        min_solutions=3,
    ),
    "S6": PatternRule(
        name="S6",
        conditions=("I1", "I0", "I1", "I0"),
        gaps=((0, 1, False), (1, 2, True), (2, 3, False)),
        min_solutions=3,
    ),
}


class GapCheck(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    left: str
    right: str
    lhs: Number
    rhs: Number
    holds: bool


class Certificate(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pattern: str
    rhos: Tuple[Number, ...]
    c: Number
    gaps: Tuple[GapCheck, ...]
    conditions: Tuple[ConditionReport, ...]
    valid: bool
    min_solutions: int
    conclusion: str
    first_violation: Optional[str] = None


def _gap(rhos, i: int, j: int, scaled: bool, c) -> GapCheck:
    lhs = rhos[i] / c if scaled else rhos[i]
    left = f"rho{i + 1}/c" if scaled else f"rho{i + 1}"
    return GapCheck(left=left, right=f"rho{j + 1}", lhs=lhs, rhs=rhos[j], holds=lhs < rhos[j])


class _Evaluator:
    """Per-radius condition reports, computed once and reused across ladders."""

    def __init__(self, problem, c, constants: BoundConstants):
        self.problem = problem
        self.c = c
        self.constants = constants
        self.cache: Dict[Tuple[str, Number], ConditionReport] = {}

    def report(self, kind: str, rho) -> ConditionReport:
        key = (kind, rho)
        if key not in self.cache:
            self.cache[key] = self._compute(kind, rho)
        return self.cache[key]

    def satisfy(self, requirement: Requirement, rho) -> ConditionReport:
        if requirement == "I0|I0*":
            first = self.report("I0", rho)
            return first if first.passed else self.report("I0*", rho)
        return self.report(requirement, rho)

    async def prefill(self, rhos: Sequence[Number]) -> None:
        kinds = ("I1", "I0", "I0*")
        jobs = [(kind, rho) for rho in rhos for kind in kinds if (kind, rho) not in self.cache]
        reports = await asyncio.gather(*(asyncio.to_thread(self._compute, kind, rho) for kind, rho in jobs))
        for (kind, rho), report in zip(jobs, reports):
            self.cache[(kind, rho)] = report

    def _compute(self, kind: str, rho) -> ConditionReport:
        if kind == "I1":
            return check_I1(self.problem, rho, constants=self.constants)
        if kind == "I0":
            return check_I0(self.problem, rho, self.c, constants=self.constants)
        return check_I0_star(self.problem, rho, self.c, constants=self.constants)


def _resolve(problem, c, constants):
    constants = constants or bound_constants(problem)
    if c is None:
        c = cone_constants(problem).c
    return (float(c) if constants.mode == "numeric" else Fraction(c)), constants


def _normalize(rhos: Sequence, mode: str) -> List[Number]:
    return [float(r) for r in rhos] if mode == "numeric" else [Fraction(r) for r in rhos]


def _assemble(rule: PatternRule, rhos, c, evaluator: _Evaluator) -> Certificate:
    gaps = tuple(_gap(rhos, i, j, scaled, c) for i, j, scaled in rule.gaps)
    violation = next((f"gap {g.left} < {g.right} fails ({float(g.lhs):.6g} >= {float(g.rhs):.6g})" for g in gaps if not g.holds), None)
    reports: List[ConditionReport] = []
    if violation is None:
        for k, (requirement, rho) in enumerate(zip(rule.conditions, rhos)):
            report = evaluator.satisfy(requirement, rho)
            reports.append(report)
            if not report.passed:
                violation = f"condition {report.condition} at rho{k + 1}={rho} is {report.verdict}"
                break
    valid = violation is None
    if valid:
        plural = "solution" if rule.min_solutions == 1 else "solutions"
        conclusion = f"at least {['zero', 'one', 'two', 'three'][rule.min_solutions]} positive {plural}"
    else:
        conclusion = "no conclusion"
    return Certificate(
        pattern=rule.name,
        rhos=tuple(rhos),
        c=c,
        gaps=gaps,
        conditions=tuple(reports),
        valid=valid,
        min_solutions=rule.min_solutions if valid else 0,
        conclusion=conclusion,
        first_violation=violation,
    )


def certify(problem, pattern: str, rho_list: Sequence, c=None, constants: Optional[BoundConstants] = None) -> Certificate:
    """Checks the gaps and the conditions of one multiplicity pattern on a given ladder.

    A failed gap or condition is reported on the certificate (valid=False,
    first_violation set); only a ladder of the wrong length raises.
    """
    rule = PATTERNS[pattern]
    if len(rho_list) != len(rule.conditions):
        raise LadderLengthError(f"pattern {pattern} needs {len(rule.conditions)} radii, got {len(rho_list)}")
    c, constants = _resolve(problem, c, constants)
    rhos = _normalize(rho_list, constants.mode)
    return _assemble(rule, rhos, c, _Evaluator(problem, c, constants))


def search_ladder(
    problem, pattern: str, rho_grid: Sequence, c=None, constants: Optional[BoundConstants] = None
) -> Optional[Certificate]:
    """First valid ladder, in lexicographic grid order, among increasing tuples drawn from rho_grid."""
    rule = PATTERNS[pattern]
    c, constants = _resolve(problem, c, constants)
    grid = sorted(set(_normalize(rho_grid, constants.mode)))
    if len(grid) < len(rule.conditions):
        return None
    evaluator = _Evaluator(problem, c, constants)
    asyncio.run(evaluator.prefill(grid))
    config.log(f"[search] {len(grid)} radii evaluated for pattern {pattern}")

    passes = {kind: {rho for rho in grid if evaluator.cache[(kind, rho)].passed} for kind in ("I1", "I0", "I0*")}
    allowed = {
        "I1": passes["I1"],
        "I0": passes["I0"],
        "I0|I0*": passes["I0"] | passes["I0*"],
    }
    for ladder in itertools.combinations(grid, len(rule.conditions)):
        if not all(rho in allowed[req] for req, rho in zip(rule.conditions, ladder)):
            continue
        if not all(_gap(ladder, i, j, scaled, c).holds for i, j, scaled in rule.gaps):
            continue
        return _assemble(rule, list(ladder), c, evaluator)
    return None
