from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers.expr import evaluate
from helpers.grid import PiecewiseGridFunction, build_grid
from helpers.impulse import G_apply, G_derivative, G_jumps, combined_jumps, verify_p_bounds

w_values = st.fractions(min_value=Fraction(1, 1000), max_value=50, max_denominator=1000)


def test_coefficients(example):
    first, second = (eq.impulse_coeffs for eq in example.equations)
    assert (first.d1, first.e1, first.d2, first.e2) == (1, Fraction(-1, 5), -1, Fraction(-4, 5))
    assert (second.d1, second.e1, second.d2, second.e2) == (1, Fraction(-2, 5), 0, -1)


def test_combined_jumps(example):
    first, second = example.equations
    j1, j2 = combined_jumps(first.impulse, first.impulse_coeffs, Fraction(1, 2))
    assert (j1, j2) == (Fraction(1, 125), Fraction(7, 1000))
    j1, j2 = combined_jumps(second.impulse, second.impulse_coeffs, Fraction(1))
    assert (j1, j2) == (Fraction(1, 60), Fraction(1, 30))


def test_G_jumps_at_one(example):
    eq = example.equations[0]
    assert G_jumps(eq.basis, eq.impulse, eq.impulse_coeffs, Fraction(1)) == (Fraction(1, 100), Fraction(-3, 100))


@given(w=w_values)
def test_G_reproduces_the_impulse(example, w):
    # gamma delta' - delta gamma' = W for every boundary pair
    for eq in example.equations:
        jumps = G_jumps(eq.basis, eq.impulse, eq.impulse_coeffs, w)
        assert jumps == (evaluate(eq.impulse.I, {"w": w}), evaluate(eq.impulse.N, {"w": w}))


def test_G_on_a_grid(example):
    eq = example.equations[0]
    grid = build_grid([eq.tau], 16)
    w = PiecewiseGridFunction.constant(grid, 1)
    G = G_apply(eq.basis, eq.impulse, eq.impulse_coeffs, w)
    dG = G_derivative(eq.basis, eq.impulse, eq.impulse_coeffs, w)
    left = grid.left_index(eq.tau)
    assert G.values[left + 1] - G.values[left] == pytest.approx(0.01, abs=1e-15)
    assert dG[left + 1] - dG[left] == pytest.approx(-0.03, abs=1e-15)
    # G vanishes at both Dirichlet ends
    assert G.values[0] == 0 and G.values[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.all(G.values >= 0)


@pytest.mark.parametrize("w_max", [Fraction(1), Fraction(88), Fraction(1000)])
def test_p_bounds_hold_for_the_example(example, w_max):
    for eq in example.equations:
        report = verify_p_bounds(eq.impulse, eq.impulse_coeffs, w_max, n_samples=400)
        assert report.passed, report.witness
        assert report.min_ratio_1 >= eq.impulse.p11
        assert report.max_ratio_1 <= eq.impulse.p12


def test_p_bounds_report_a_witness(example):
    eq = example.equations[0]
    tight = eq.impulse.model_copy(update={"p11": Fraction(1, 60)})
    report = verify_p_bounds(tight, eq.impulse_coeffs, Fraction(10), n_samples=100)
    assert not report.passed
    assert "p11" in report.witness
    assert report.min_ratio_1 < Fraction(1, 60)


@given(seed=st.integers(min_value=0, max_value=2**32 - 1), scale=st.floats(min_value=0, max_value=50))
def test_G_keeps_nonnegative_inputs_nonnegative(example, seed, scale):
    rng = np.random.default_rng(seed)
    for eq in example.equations:
        grid = build_grid([eq.tau], 16)
        w = PiecewiseGridFunction(nodes=grid.nodes, values=scale * rng.random(len(grid.nodes)))
        G = G_apply(eq.basis, eq.impulse, eq.impulse_coeffs, w)
        j1, j2 = combined_jumps(eq.impulse, eq.impulse_coeffs, w.left(eq.tau))
        assert j1 >= 0 and j2 >= 0
        assert np.all(G.values >= -1e-14)
