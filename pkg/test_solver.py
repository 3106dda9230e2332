from fractions import Fraction

import numpy as np
import pytest

from helpers.cone import sample_cone_members
from helpers.errors import NoConvergenceError, PreconditionError, SolverDivergenceError
from helpers.grid import PiecewiseGridFunction
from helpers.solver import (
    _endpoint_slope,
    apply_T,
    cone_verdicts,
    multi_start,
    problem_grid,
    residuals,
    solve_picard,
    starting_values,
)


def constant_pair(grid, value):
    return PiecewiseGridFunction.constant(grid, value), PiecewiseGridFunction.constant(grid, value)


def test_apply_T_at_constant_one(example):
    grid = problem_grid(example, 32)
    Tu, Tv = apply_T(example, grid, constant_pair(grid, 1))
    assert Tu.values[0] == pytest.approx(5 / 6, abs=1e-14)
    assert Tv.values[0] == pytest.approx(1 / 19, abs=1e-14)
    assert np.all(Tu.values > 0) and np.all(Tv.values > 0)


def test_apply_T_rejects_negative_input(example):
    grid = problem_grid(example, 16)
    u = PiecewiseGridFunction.from_callable(grid, lambda t: t - 0.5)
    with pytest.raises(PreconditionError):
        apply_T(example, grid, (u, u))


def test_linear_problem(linear):
    grid = problem_grid(linear)
    solution = solve_picard(linear, grid, constant_pair(grid, 0))
    exact = grid.nodes * (1 - grid.nodes) / 2
    assert np.max(np.abs(solution.u.values - exact)) < 1e-4
    assert np.max(np.abs(solution.v.values)) == 0
    assert solution.iterations <= 3
    assert solution.residuals.ode < 1e-8
    assert solution.residuals.jump < 1e-8
    assert solution.residuals.bc < 1e-8
    assert solution.in_cone


def test_quadrature_error_is_second_order(quartic):
    # u = t - t^4 solves -u'' = 12 t^2 with zero Dirichlet data
    errors = []
    for n in (50, 100):
        grid = problem_grid(quartic, n)
        u = PiecewiseGridFunction.from_callable(grid, lambda t: t - t**4)
        v = PiecewiseGridFunction.constant(grid, 0)
        errors.append(residuals(quartic, grid, (u, v)).integral)
    assert errors[0] / errors[1] == pytest.approx(4.0, abs=0.5)


def test_zero_problem(zero):
    grid = problem_grid(zero, 32)
    solution = solve_picard(zero, grid, constant_pair(grid, Fraction(1, 2)))
    assert solution.u.sup_norm() < 1e-9
    assert solution.v.sup_norm() < 1e-9
    assert solution.in_cone


def test_example_converges(example):
    grid = problem_grid(example)
    solution = solve_picard(example, grid, constant_pair(grid, Fraction(1, 2)))
    r = solution.residuals
    assert solution.update_norm < example.solver.tol
    assert r.integral < 1e-6
    assert r.jump < 1e-8
    assert r.bc < 1e-6
    assert r.jump_fd < 1e-3
    assert solution.in_cone
    assert [v.passed for v in cone_verdicts(example, solution.u, solution.v)] == [True, True]


def test_endpoint_slope_is_exact_for_cubics():
    x = np.array([0.0, 0.1, 0.25, 0.3])
    y = x**3 - 2 * x
    assert _endpoint_slope(x, y, at_end=False) == pytest.approx(-2.0, abs=1e-10)
    assert _endpoint_slope(x, y, at_end=True) == pytest.approx(3 * 0.09 - 2, abs=1e-10)
    assert _endpoint_slope(x[:2], y[:2], at_end=True) == pytest.approx((y[1] - y[0]) / 0.1)


def test_T_maps_the_cone_into_itself(example):
    grid = problem_grid(example, 64)
    us = sample_cone_members(grid, Fraction(1, 4), Fraction(3, 4), Fraction(1, 7), 50, scale=2.0, seed=1)
    vs = sample_cone_members(grid, Fraction(1, 2), Fraction(1), Fraction(3, 8), 50, scale=2.0, seed=2)
    for u, v in zip(us, vs):
        Tu, Tv = apply_T(example, grid, (u, v))
        verdicts = cone_verdicts(example, Tu, Tv)
        assert all(verdict.passed for verdict in verdicts), [verdict.reason for verdict in verdicts]


def test_no_convergence_keeps_the_last_iterate(linear):
    grid = problem_grid(linear, 16)
    with pytest.raises(NoConvergenceError) as info:
        solve_picard(linear, grid, constant_pair(grid, 0), max_iter=1)
    assert len(info.value.history) == 1
    u, _ = info.value.last_iterate
    assert u.sup_norm() == pytest.approx(1 / 8, abs=1e-3)


def test_divergence(example):
    grid = problem_grid(example, 32)
    with pytest.raises(SolverDivergenceError):
        solve_picard(example, grid, constant_pair(grid, 100), damping=1)


def test_negative_start(linear):
    grid = problem_grid(linear, 16)
    with pytest.raises(PreconditionError):
        solve_picard(linear, grid, constant_pair(grid, -1))


def test_starting_values(example, zero):
    starts = starting_values(example, [Fraction(1, 8), 1, 11])
    assert starts[0] == 0.125 and starts[-1] == 11.0
    assert 0.5 in starts
    assert np.sqrt(11) == pytest.approx(starts[-2])
    assert starting_values(zero) == [0.5]


def test_multi_start_merges_duplicates(linear):
    result = multi_start(linear, starts=[0.0, 1.0])
    assert len(result.outcomes) == 2
    assert all(o.converged for o in result.outcomes)
    assert len(result.solutions) == 1
    assert result.solutions[0].start == 0.0


def test_multi_start_on_the_example(example):
    grid = problem_grid(example, 64)
    result = multi_start(example, grid=grid, starts=[0.25, 0.5, 100.0])
    assert len(result.outcomes) == 3
    assert result.solutions
    assert all(s.in_cone for s in result.solutions)
    diverged = result.outcomes[-1]
    assert not diverged.converged and diverged.message
