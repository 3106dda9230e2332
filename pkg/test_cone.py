from fractions import Fraction

import numpy as np
import pytest

from helpers.cone import cone_constants, cone_membership, sample_cone_members
from helpers.grid import PiecewiseGridFunction, build_grid


def test_example_cone_constants(example):
    cone = cone_constants(example)
    first, second = cone.equations
    assert first.c == Fraction(1, 7)
    assert first.impulse_term == Fraction(1, 7)
    assert (first.c_phi, first.c_gamma, first.c_delta) == (Fraction(1, 4),) * 3
    assert second.c == Fraction(3, 8)
    assert (second.c_phi, second.c_gamma, second.c_delta) == (Fraction(1, 2), 1, Fraction(1, 2))
    assert cone.c == Fraction(1, 7)
    assert cone.override_c == Fraction(1, 4)
    assert cone.effective_c() == Fraction(1, 7)
    assert cone.effective_c(use_override=True) == Fraction(1, 4)


@pytest.fixture(scope="module")
def grid():
    return build_grid([Fraction(1, 5)], 32)


def test_membership_examples(grid):
    a, b, c = Fraction(1, 4), Fraction(3, 4), Fraction(1, 7)
    assert cone_membership(PiecewiseGridFunction.constant(grid, 2), a, b, c).passed
    assert cone_membership(PiecewiseGridFunction.from_callable(grid, lambda t: t), a, b, c).passed
    assert cone_membership(PiecewiseGridFunction.constant(grid, 0), a, b, c).passed

    steep = cone_membership(PiecewiseGridFunction.from_callable(grid, lambda t: t**4), a, b, c)
    assert not steep.passed
    assert steep.witness_t == pytest.approx(0.25)
    assert "window minimum" in steep.reason

    negative = cone_membership(PiecewiseGridFunction.from_callable(grid, lambda t: t - 0.5), a, b, c)
    assert not negative.passed
    assert negative.witness_t == 0.0
    assert "negative" in negative.reason


def test_membership_tolerance(grid):
    u = PiecewiseGridFunction.from_callable(grid, lambda t: np.where(t < 0.5, 1.0, 0.0) - 1e-10)
    assert not cone_membership(u, Fraction(1, 4), Fraction(3, 4), Fraction(1, 7)).passed
    assert cone_membership(PiecewiseGridFunction.constant(grid, -1e-10), 0.25, 0.75, Fraction(1, 7)).passed


@pytest.mark.parametrize("c", [Fraction(1, 7), Fraction(3, 8), Fraction(1, 2)])
def test_sampled_members_belong_to_the_cone(grid, c):
    members = sample_cone_members(grid, Fraction(1, 4), Fraction(3, 4), c, 200, scale=5.0)
    assert len(members) == 200
    for u in members:
        assert cone_membership(u, Fraction(1, 4), Fraction(3, 4), c).passed
        # a member for c is a member for every smaller constant
        assert cone_membership(u, Fraction(1, 4), Fraction(3, 4), c / 2).passed
        assert 0 < u.sup_norm() <= 5.0 + 1e-12


def test_sampling_is_seeded(grid):
    first = sample_cone_members(grid, 0.25, 0.75, Fraction(1, 7), 3, seed=11)
    second = sample_cone_members(grid, 0.25, 0.75, Fraction(1, 7), 3, seed=11)
    for x, y in zip(first, second):
        np.testing.assert_array_equal(x.values, y.values)
