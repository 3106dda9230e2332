"""Positive Riemann-Stieltjes measures: finitely many atoms plus an optional density.

A measure acts on a function w through apply(); the augmented functionals add
an atom at the impulse point tau on top of a rescaled boundary measure. The
kernel transform s -> sum_j w_j k(eta_j, s) + int k(t, s) density(t) dt is
the object whose integrals enter the index conditions.
"""

from fractions import Fraction
from typing import Callable, Iterable, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate

from helpers import config
from helpers.errors import AtomCollisionError, QuadratureError
from helpers.expr import BinOp, Expression, Num, constant_value, evaluate
from helpers.sl_kernel import GreenKernel, kernel_eval

Number = Union[Fraction, float]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Atom(_Frozen):
    at: Fraction
    weight: Fraction


class StieltjesMeasure(_Frozen):
    atoms: Tuple[Atom, ...] = ()
    density: Optional[Expression] = None

    @property
    def is_atomic(self) -> bool:
        return self.density is None

    def density_at(self, s):
        return evaluate(self.density, {"s": s, "t": s})


class AugmentedMeasure(_Frozen):
    """scale * base + tau_weight * (point mass at tau)."""

    kind: Literal["tilde", "bar"]
    base: StieltjesMeasure
    scale: Fraction
    tau_weight: Fraction
    tau: Fraction

    @property
    def is_atomic(self) -> bool:
        return self.base.is_atomic


AnyMeasure = Union[StieltjesMeasure, AugmentedMeasure]


def _quad(fn: Callable[[float], float], lo: float, hi: float, points: Iterable[float] = ()) -> float:
    inner = sorted({p for p in points if lo < p < hi})
    result = integrate.quad(
        fn, lo, hi, points=inner or None, epsabs=1e-14, epsrel=config.QUAD_RTOL, limit=200, full_output=1
    )
    # quad appends a message only when it could not meet the tolerance
    if len(result) > 3:
        raise QuadratureError(f"quadrature on [{lo}, {hi}] did not converge: {result[3]}")
    return float(result[0])


def apply(measure: AnyMeasure, w: Callable, discontinuities: Sequence[Number] = ()) -> Number:
    """Sum of weight * w(at) over the atoms plus the integral of w against the density.

    `discontinuities` lists the points where w may jump; an atom sitting on one
    of them would make the functional ill-defined.
    """
    if isinstance(measure, AugmentedMeasure):
        base_value = apply(measure.base, w, discontinuities)
        return measure.scale * base_value + measure.tau_weight * w(measure.tau)

    for atom in measure.atoms:
        if any(atom.at == d for d in discontinuities):
            raise AtomCollisionError(f"atom at {atom.at} sits on a discontinuity of the integrand")
    total = sum((atom.weight * w(atom.at) for atom in measure.atoms), Fraction(0))
    if measure.density is not None:
        total += _quad(
            lambda s: float(w(s)) * float(measure.density_at(s)),
            0.0,
            1.0,
            [float(d) for d in discontinuities] + [float(a.at) for a in measure.atoms],
        )
    return total


def apply_on_grid(measure: StieltjesMeasure, w) -> float:
    """apply() for a grid function; the density part uses the trapezoid rule on the grid nodes."""
    total = sum(float(atom.weight) * float(w(float(atom.at))) for atom in measure.atoms)
    if measure.density is not None:
        total += float(integrate.trapezoid(w.values * measure.density_at(w.nodes), w.nodes))
    return total


def total_mass(measure: AnyMeasure) -> Number:
    return apply(measure, lambda s: 1)


def augment_tilde(alpha: StieltjesMeasure, h2: Fraction, p12: Fraction, tau: Fraction) -> AugmentedMeasure:
    return AugmentedMeasure(kind="tilde", base=alpha, scale=h2, tau_weight=p12, tau=tau)


def augment_bar(alpha: StieltjesMeasure, h1: Fraction, p11: Fraction, tau: Fraction) -> AugmentedMeasure:
    return AugmentedMeasure(kind="bar", base=alpha, scale=h1, tau_weight=p11, tau=tau)


def flatten(measure: AnyMeasure) -> StieltjesMeasure:
    """Rewrites an augmented measure as a plain one (atoms and density rescaled)."""
    if isinstance(measure, StieltjesMeasure):
        return measure
    atoms = [Atom(at=a.at, weight=measure.scale * a.weight) for a in measure.base.atoms if measure.scale != 0]
    if measure.tau_weight != 0:
        atoms.append(Atom(at=measure.tau, weight=measure.tau_weight))
    density = measure.base.density
    if density is not None:
        density = None if measure.scale == 0 else BinOp(op="*", left=Num(value=measure.scale), right=density)
    return StieltjesMeasure(atoms=tuple(atoms), density=density)


class KernelTransform(_Frozen):
    """s -> sum_j w_j k(eta_j, s) + int_0^1 k(t, s) density(t) dt."""

    kernel: GreenKernel
    measure: StieltjesMeasure

    @property
    def is_piecewise_affine(self) -> bool:
        return self.measure.is_atomic

    @property
    def breakpoints(self) -> Tuple[Fraction, ...]:
        return tuple(sorted({a.at for a in self.measure.atoms}))

    def __call__(self, s):
        if isinstance(s, np.ndarray):
            value = np.zeros_like(s, dtype=float)
            for atom in self.measure.atoms:
                value = value + float(atom.weight) * kernel_eval(self.kernel, np.full_like(s, float(atom.at)), s)
            if self.measure.density is not None:
                value = value + np.array([self._density_part(float(x)) for x in s.ravel()]).reshape(s.shape)
            return value
        value = sum((atom.weight * kernel_eval(self.kernel, atom.at, s) for atom in self.measure.atoms), Fraction(0))
        if self.measure.density is not None:
            value += self._density_part(float(s))
        return value

    def _density_part(self, s: float) -> float:
        return _quad(
            lambda t: float(kernel_eval(self.kernel, t, s)) * float(self.measure.density_at(t)),
            0.0,
            1.0,
            [s],
        )


def kernel_transform(kernel: GreenKernel, measure: AnyMeasure) -> KernelTransform:
    return KernelTransform(kernel=kernel, measure=flatten(measure))


def weighted_integral(
    fn: Callable,
    g: Expression,
    lo: Number,
    hi: Number,
    mode: Literal["exact", "numeric"] = "exact",
    breakpoints: Sequence[Number] = (),
) -> Number:
    """Integral of fn(s) * g(s) over [lo, hi].

    Exact when fn is piecewise affine with known rational breakpoints and g is
    a rational constant; adaptive quadrature otherwise.
    """
    if not lo < hi:
        raise QuadratureError(f"empty integration range [{lo}, {hi}]")
    kappa = constant_value(g)
    knots = list(breakpoints)
    if isinstance(fn, KernelTransform):
        knots += list(fn.breakpoints)
        piecewise_affine = fn.is_piecewise_affine
    else:
        piecewise_affine = getattr(fn, "is_piecewise_affine", False)

    if mode == "exact" and piecewise_affine and kappa is not None:
        edges = sorted({lo, hi, *(Fraction(k) for k in knots if lo < k < hi)})
        total = Fraction(0)
        for x, y in zip(edges, edges[1:]):
            total += (fn(x) + fn(y)) * (y - x) / 2
        return kappa * total

    def integrand(s: float) -> float:
        return float(fn(s)) * float(evaluate(g, {"s": s, "t": s}))

    return _quad(integrand, float(lo), float(hi), [float(k) for k in knots])


def density_min(measure: StieltjesMeasure, n: int = 1024) -> Optional[float]:
    """Smallest sampled density value on [0,1], None for purely atomic measures."""
    if measure.density is None:
        return None
    s = np.linspace(0.0, 1.0, n)
    return float(np.min(measure.density_at(s)))
