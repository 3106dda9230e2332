from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from helpers.errors import DegenerateWindowError, ResonantBoundaryError
from helpers.sl_kernel import (
    SLCoefficients,
    boundary_identities,
    interval_constants,
    kernel_bound_check,
    kernel_eval,
    make_basis,
    make_kernel,
)

coefficient = st.fractions(min_value=0, max_value=5, max_denominator=12)


def coeffs(a1, b1, a2, b2) -> SLCoefficients:
    return SLCoefficients(a1=Fraction(a1), b1=Fraction(b1), a2=Fraction(a2), b2=Fraction(b2))


def test_dirichlet_basis():
    basis = make_basis(coeffs(1, 0, 1, 0))
    assert basis.gamma(Fraction(0)) == 1 and basis.gamma(Fraction(1)) == 0
    assert basis.delta(Fraction(0)) == 0 and basis.delta(Fraction(1)) == 1
    assert basis.W == 1
    kernel = make_kernel(basis)
    assert kernel_eval(kernel, Fraction(1, 2), Fraction(1, 2)) == Fraction(1, 4)
    assert kernel.phi(Fraction(1, 3)) == Fraction(2, 9)


def test_mixed_basis():
    basis = make_basis(coeffs(1, 0, 0, 1))
    assert basis.gamma.slope == 0 and basis.gamma(Fraction(0)) == 1
    assert basis.delta(Fraction(1, 2)) == Fraction(1, 2)
    kernel = make_kernel(basis)
    # k(t, s) = min(t, s)
    assert kernel_eval(kernel, Fraction(1, 3), Fraction(3, 4)) == Fraction(1, 3)
    assert kernel.row_integral(Fraction(1), Fraction(0), Fraction(1)) == Fraction(1, 2)


@pytest.mark.parametrize("bad", [(0, 0, 1, 0), (1, 0, 0, 0), (0, 1, 0, 1)])
def test_resonant_coefficients(bad):
    with pytest.raises(ResonantBoundaryError):
        make_basis(coeffs(*bad))


def test_negative_coefficient_rejected():
    with pytest.raises(ValueError):
        coeffs(1, -1, 1, 0)


@given(coefficient, coefficient, coefficient, coefficient)
def test_boundary_identities(a1, b1, a2, b2):
    c = coeffs(a1, b1, a2, b2)
    assume(a1 + b1 > 0 and a2 + b2 > 0 and c.D > 0)
    basis = make_basis(c)
    ids = boundary_identities(basis)
    assert (ids["gamma_left"], ids["gamma_right"]) == (1, 0)
    assert (ids["delta_left"], ids["delta_right"]) == (0, 1)
    assert ids["wronskian"] == basis.W


@given(coefficient, coefficient, coefficient, coefficient)
def test_kernel_symmetry_and_bounds(a1, b1, a2, b2):
    c = coeffs(a1, b1, a2, b2)
    assume(a1 + b1 > 0 and a2 + b2 > 0 and c.D > 0)
    kernel = make_kernel(make_basis(c))
    nodes = [Fraction(k, 100) for k in range(0, 101, 5)]
    for t in nodes:
        for s in nodes:
            k = kernel_eval(kernel, t, s)
            assert k == kernel_eval(kernel, s, t)
            assert 0 <= k <= kernel.phi(s)


def test_kernel_grid_101():
    kernel = make_kernel(make_basis(coeffs(1, 0, 1, 0)))
    t = np.linspace(0, 1, 101)
    T, S = np.meshgrid(t, t, indexing="ij")
    K = kernel_eval(kernel, T, S)
    np.testing.assert_allclose(K, K.T, atol=1e-15)
    assert np.all(K <= kernel.phi(S) + 1e-15)


def test_row_integral_closed_form():
    kernel = make_kernel(make_basis(coeffs(1, 0, 1, 0)))
    # int_0^1 k(t, s) ds = t(1 - t) / 2
    for t in (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(1)):
        assert kernel.row_integral(t, Fraction(0), Fraction(1)) == t * (1 - t) / 2


def test_interval_constants():
    basis = make_basis(coeffs(1, 0, 1, 0))
    ic = interval_constants(basis, Fraction(1, 4), Fraction(3, 4))
    assert (ic.c_gamma, ic.c_delta, ic.c_phi) == (Fraction(1, 4), Fraction(1, 4), Fraction(1, 4))

    mixed = interval_constants(make_basis(coeffs(1, 0, 0, 1)), Fraction(1, 2), Fraction(1))
    assert (mixed.c_gamma, mixed.c_delta, mixed.c_phi) == (1, Fraction(1, 2), Fraction(1, 2))


@pytest.mark.parametrize("window", [(Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 2), Fraction(1)), (Fraction(0), Fraction(1, 2))])
def test_degenerate_window(window):
    # Dirichlet gamma vanishes at 1 and delta at 0
    with pytest.raises(DegenerateWindowError):
        interval_constants(make_basis(coeffs(1, 0, 1, 0)), *window)


def test_kernel_bound_check_passes():
    basis = make_basis(coeffs(1, 0, 1, 0))
    kernel = make_kernel(basis)
    check = kernel_bound_check(kernel, Fraction(1, 4), Fraction(3, 4), Fraction(1, 4))
    assert check["passed"]
    assert check["sampled_min_ratio"] >= 0.25 - 1e-12

    too_strict = kernel_bound_check(kernel, Fraction(1, 4), Fraction(3, 4), Fraction(1, 2))
    assert not too_strict["passed"]


window_end = st.fractions(min_value=0, max_value=1, max_denominator=16)


@settings(max_examples=200)
@given(coefficient, coefficient, coefficient, coefficient, window_end, window_end)
def test_kernel_sandwich_on_random_windows(a1, b1, a2, b2, a, b):
    c = coeffs(a1, b1, a2, b2)
    assume(a1 + b1 > 0 and a2 + b2 > 0 and c.D > 0 and a < b)
    basis = make_basis(c)
    try:
        ic = interval_constants(basis, a, b)
    except DegenerateWindowError:
        assume(False)
    kernel = make_kernel(basis)
    assert 0 < ic.c_phi <= 1

    ts = [a, (3 * a + b) / 4, (a + b) / 2, b]
    for t in ts:
        for s in (Fraction(k, 16) for k in range(17)):
            k = kernel_eval(kernel, t, s)
            assert ic.c_phi * kernel.phi(s) <= k <= kernel.phi(s)

    check = kernel_bound_check(kernel, a, b, ic.c_phi)
    assert check["passed"]
    if check["sampled_min_ratio"] is not None:
        assert check["sampled_min_ratio"] >= float(ic.c_phi) - 1e-9


@given(coefficient, coefficient, coefficient, coefficient, st.fractions(min_value=Fraction(1, 16), max_value=Fraction(15, 16), max_denominator=32))
def test_kernel_slope_defect_is_minus_one(a1, b1, a2, b2, s):
    c = coeffs(a1, b1, a2, b2)
    assume(a1 + b1 > 0 and a2 + b2 > 0 and c.D > 0)
    kernel = make_kernel(make_basis(c))
    h = Fraction(1, 32)
    # t -> k(t, s) is affine on each side of the diagonal
    right = (kernel_eval(kernel, s + h, s) - kernel_eval(kernel, s, s)) / h
    left = (kernel_eval(kernel, s, s) - kernel_eval(kernel, s - h, s)) / h
    assert right - left == -1
