from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers.conditions import bound_constants
from helpers.errors import LadderLengthError
from helpers.scheduler import PATTERNS, certify, search_ladder

LADDER = [Fraction(1, 8), 1, 11]


@pytest.fixture(scope="module")
def constants(example):
    return bound_constants(example)


@pytest.mark.parametrize("c", [Fraction(1, 7), Fraction(1, 4)])
def test_example_ladder_is_certified(example, constants, c):
    certificate = certify(example, "S3", LADDER, c=c, constants=constants)
    assert certificate.valid, certificate.first_violation
    assert certificate.min_solutions == 2
    assert certificate.conclusion == "at least two positive solutions"
    assert [g.holds for g in certificate.gaps] == [True, True]
    assert [r.condition for r in certificate.conditions] == ["I0*", "I1", "I0"]


def test_computed_c_is_the_default(example, constants):
    certificate = certify(example, "S3", LADDER, constants=constants)
    assert certificate.c == Fraction(1, 7)
    assert certificate.gaps[0].lhs == Fraction(7, 8)


def test_wrong_ladder_length(example, constants):
    with pytest.raises(LadderLengthError):
        certify(example, "S3", [1, 2], constants=constants)


def test_gap_violation_is_reported(example, constants):
    certificate = certify(example, "S3", [Fraction(1, 2), 1, 11], c=Fraction(1, 7), constants=constants)
    assert not certificate.valid
    assert certificate.min_solutions == 0
    assert certificate.conclusion == "no conclusion"
    assert certificate.first_violation.startswith("gap rho1/c < rho2")
    assert certificate.conditions == ()


def test_condition_violation_is_reported(example, constants):
    # rho = 2 is too large for the upper condition
    certificate = certify(example, "S3", [Fraction(1, 8), 2, 11], c=Fraction(1, 7), constants=constants)
    assert not certificate.valid
    assert "I1 at rho2=2" in certificate.first_violation


def test_search_finds_the_first_ladder(example, constants):
    grid = example.analysis.search_grid.values()
    assert grid[0] == Fraction(1, 32) and len(grid) == 13
    certificate = search_ladder(example, "S3", grid, c=Fraction(1, 7), constants=constants)
    assert certificate is not None and certificate.valid
    assert certificate.rhos == (Fraction(1, 32), 1, 16)


def test_search_without_a_ladder(zero):
    assert search_ladder(zero, "S1", [Fraction(1, 4), Fraction(1, 2), 1, 2]) is None
    assert search_ladder(zero, "S5", [Fraction(1, 4)]) is None


def test_pattern_table():
    assert {name: rule.min_solutions for name, rule in PATTERNS.items()} == {
        "S1": 1,
        "S2": 1,
        "S3": 2,
        "S4": 2,
        "S5": 3,
        "S6": 3,
    }
    for rule in PATTERNS.values():
        assert len(rule.gaps) == len(rule.conditions) - 1


@settings(max_examples=30)
@given(c=st.fractions(min_value=Fraction(1, 7), max_value=Fraction(1, 2), max_denominator=64))
def test_a_larger_c_keeps_the_certificate(example, constants, c):
    # the I0 and I0* boxes shrink and the scaled gap loosens as c grows
    certificate = certify(example, "S3", LADDER, c=c, constants=constants)
    assert certificate.valid, certificate.first_violation


@settings(max_examples=40)
@given(ladder=st.lists(st.sampled_from([Fraction(1, 2**k) for k in range(6)] + [1, 2, 4, 8, 11, 16, 32]), min_size=3, max_size=3, unique=True))
def test_S3_is_S1_below_S2(example, constants, ladder):
    rhos = sorted(ladder)
    three = certify(example, "S3", rhos, c=Fraction(1, 7), constants=constants)
    lower = certify(example, "S1", rhos[:2], c=Fraction(1, 7), constants=constants)
    upper = certify(example, "S2", rhos[1:], c=Fraction(1, 7), constants=constants)
    assert three.valid == (lower.valid and upper.valid)
    if three.valid:
        assert all(g.holds for g in three.gaps)
        assert all(report.passed for report in three.conditions)
        assert three.min_solutions == 2
    else:
        assert three.first_violation
