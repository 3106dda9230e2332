from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from helpers.errors import AtomCollisionError, QuadratureError
from helpers.expr import parse
from helpers.grid import PiecewiseGridFunction, build_grid
from helpers.measures import (
    Atom,
    StieltjesMeasure,
    apply,
    apply_on_grid,
    augment_bar,
    augment_tilde,
    density_min,
    flatten,
    kernel_transform,
    total_mass,
    weighted_integral,
)
from helpers.sl_kernel import SLCoefficients, kernel_eval, make_basis, make_kernel

point = st.fractions(min_value=0, max_value=1, max_denominator=64)
weight = st.fractions(min_value=Fraction(1, 64), max_value=3, max_denominator=64)
atoms = st.lists(st.builds(Atom, at=point, weight=weight), min_size=1, max_size=4)
scalar = st.fractions(min_value=-3, max_value=3, max_denominator=16)


def dirichlet():
    return make_basis(SLCoefficients(a1=Fraction(1), b1=Fraction(0), a2=Fraction(1), b2=Fraction(0)))


def test_atom_evaluates_point():
    alpha = StieltjesMeasure(atoms=(Atom(at=Fraction(1, 4), weight=Fraction(1)),))
    assert apply(alpha, lambda s: 1 - s) == Fraction(3, 4)
    assert total_mass(alpha) == 1


def test_density_part_uses_quadrature():
    measure = StieltjesMeasure(density=parse("2*s", ("s", "t")))
    assert float(total_mass(measure)) == pytest.approx(1.0, abs=1e-12)
    assert float(apply(measure, lambda s: s)) == pytest.approx(2 / 3, abs=1e-12)


def test_atom_on_discontinuity_is_rejected():
    alpha = StieltjesMeasure(atoms=(Atom(at=Fraction(1, 5), weight=Fraction(1)),))
    with pytest.raises(AtomCollisionError):
        apply(alpha, lambda s: s, discontinuities=[Fraction(1, 5)])


@settings(max_examples=200)
@given(atoms, scalar, scalar)
def test_linearity(atom_list, a, b):
    measure = StieltjesMeasure(atoms=tuple(atom_list))
    w1 = lambda s: s * s
    w2 = lambda s: 1 - s
    combined = apply(measure, lambda s: a * w1(s) + b * w2(s))
    assert combined == a * apply(measure, w1) + b * apply(measure, w2)


@settings(max_examples=200)
@given(atoms)
def test_positivity(atom_list):
    measure = StieltjesMeasure(atoms=tuple(atom_list))
    assert apply(measure, lambda s: s * (1 - s)) >= 0
    assert total_mass(measure) > 0


def test_augmented_functionals_of_the_example():
    basis = dirichlet()
    alpha = StieltjesMeasure(atoms=(Atom(at=Fraction(1, 4), weight=Fraction(1)),))
    tau = Fraction(1, 5)
    tilde = augment_tilde(alpha, Fraction(5, 6), Fraction(1, 50), tau)
    bar = augment_bar(alpha, Fraction(1, 3), Fraction(1, 70), tau)
    assert apply(tilde, basis.gamma) == Fraction(641, 1000)
    assert apply(tilde, basis.delta) == Fraction(637, 3000)
    assert apply(bar, basis.gamma) == Fraction(183, 700)


def test_flatten_keeps_the_functional():
    basis = dirichlet()
    alpha = StieltjesMeasure(atoms=(Atom(at=Fraction(1, 4), weight=Fraction(2)),))
    tilde = augment_tilde(alpha, Fraction(5, 6), Fraction(1, 50), Fraction(1, 5))
    flat = flatten(tilde)
    assert {a.at for a in flat.atoms} == {Fraction(1, 4), Fraction(1, 5)}
    assert apply(flat, basis.gamma) == apply(tilde, basis.gamma)


def test_integrated_kernel_exact_and_numeric_agree():
    kernel = make_kernel(dirichlet())
    alpha = StieltjesMeasure(atoms=(Atom(at=Fraction(1, 4), weight=Fraction(1)),))
    tilde = augment_tilde(alpha, Fraction(5, 6), Fraction(1, 50), Fraction(1, 5))
    transform = kernel_transform(kernel, tilde)
    one = parse("1", ("s", "t"))
    exact = weighted_integral(transform, one, Fraction(0), Fraction(1), "exact")
    numeric = weighted_integral(transform, one, Fraction(0), Fraction(1), "numeric")
    assert exact == Fraction(3189, 40000)
    assert numeric == pytest.approx(float(exact), rel=1e-10)


def test_weighted_integral_rejects_empty_range():
    kernel = make_kernel(dirichlet())
    transform = kernel_transform(kernel, StieltjesMeasure(atoms=(Atom(at=Fraction(1, 2), weight=Fraction(1)),)))
    with pytest.raises(QuadratureError):
        weighted_integral(transform, parse("1", ("s", "t")), Fraction(1, 2), Fraction(1, 2))


def test_apply_on_grid_matches_apply():
    grid = build_grid([Fraction(1, 2)], 64)
    w = PiecewiseGridFunction.from_callable(grid, lambda t: 1 + t)
    measure = StieltjesMeasure(
        atoms=(Atom(at=Fraction(1, 4), weight=Fraction(1)),),
        density=parse("1", ("s", "t")),
    )
    assert apply_on_grid(measure, w) == pytest.approx(1.25 + 1.5, abs=1e-12)


def test_density_min():
    assert density_min(StieltjesMeasure(atoms=(Atom(at=Fraction(1, 2), weight=Fraction(1)),))) is None
    assert density_min(StieltjesMeasure(density=parse("s - 1/2", ("s", "t")))) == pytest.approx(-0.5)
    samples = np.linspace(0, 1, 5)
    assert np.all(StieltjesMeasure(density=parse("s", ("s", "t"))).density_at(samples) >= 0)


bases = st.sampled_from([(1, 0, 1, 0), (1, 0, 0, 1), (2, 1, 1, 3)])


@settings(max_examples=100)
@given(atoms, bases, point)
def test_kernel_transform_matches_the_measure(atom_list, bc, s):
    a1, b1, a2, b2 = map(Fraction, bc)
    kernel = make_kernel(make_basis(SLCoefficients(a1=a1, b1=b1, a2=a2, b2=b2)))
    measure = StieltjesMeasure(atoms=tuple(atom_list))
    transform = kernel_transform(kernel, measure)
    assert transform(s) == apply(measure, lambda t: kernel_eval(kernel, t, s))

    one = parse("1", ("s", "t"))
    exact = weighted_integral(transform, one, Fraction(0), Fraction(1), "exact")
    rows = sum((a.weight * kernel.row_integral(a.at, Fraction(0), Fraction(1)) for a in atom_list), Fraction(0))
    assert exact == rows
    numeric = weighted_integral(transform, one, Fraction(0), Fraction(1), "numeric")
    assert numeric == pytest.approx(float(exact), rel=1e-9, abs=1e-12)

    knees = sorted({float(a.at) for a in atom_list if 0 < a.at < 1})
    direct, _ = quad(
        lambda x: sum(float(a.weight) * float(kernel_eval(kernel, a.at, x)) for a in atom_list), 0.0, 1.0, points=knees or None
    )
    assert direct == pytest.approx(float(exact), rel=1e-9, abs=1e-12)
