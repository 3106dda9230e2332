from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from helpers import config
from helpers.expr import Expression, evaluate, guard_bounds
from helpers.grid import PiecewiseGridFunction, double_node
from helpers.sl_kernel import BoundaryBasis

Number = Union[Fraction, float]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class ImpulseSpec(_Frozen):
    tau: Fraction
    I: Expression = Field(description="Jump of the solution at tau as a function of w = u(tau-).")
    N: Expression = Field(description="Jump of the derivative at tau.")
    p11: Fraction
    p12: Fraction
    p22: Fraction


class ImpulseCoefficients(_Frozen):
    d1: Fraction
    e1: Fraction
    d2: Fraction
    e2: Fraction


class PBoundReport(_Frozen):
    passed: bool
    w_max: Number
    samples: int
    min_ratio_1: Number
    min_ratio_1_at: Number
    max_ratio_1: Number
    max_ratio_1_at: Number
    min_ratio_2: Number
    min_ratio_2_at: Number
    max_ratio_2: Number
    max_ratio_2_at: Number
    witness: Optional[str] = None


def impulse_coeffs(basis: BoundaryBasis, tau: Fraction) -> ImpulseCoefficients:
    W = basis.W
    return ImpulseCoefficients(
        d1=basis.delta.slope / W,
        e1=-basis.delta(tau) / W,
        d2=basis.gamma.slope / W,
        e2=-basis.gamma(tau) / W,
    )


def combined_jumps(spec: ImpulseSpec, coeffs: ImpulseCoefficients, w_tau: Number) -> Tuple[Number, Number]:
    """(d1 I + e1 N)(w), (d2 I + e2 N)(w)."""
    I = evaluate(spec.I, {"w": w_tau})
    N = evaluate(spec.N, {"w": w_tau})
    return coeffs.d1 * I + coeffs.e1 * N, coeffs.d2 * I + coeffs.e2 * N


def G_apply(
    basis: BoundaryBasis,
    spec: ImpulseSpec,
    coeffs: ImpulseCoefficients,
    w: PiecewiseGridFunction,
) -> PiecewiseGridFunction:
    """t -> gamma(t) j1 on (tau, 1] and delta(t) j2 on [0, tau], with j evaluated at w(tau-)."""
    left = double_node(w.nodes, spec.tau)
    j1, j2 = combined_jumps(spec, coeffs, w.left(spec.tau))
    values = np.empty(len(w.nodes))
    values[: left + 1] = basis.delta(w.nodes[: left + 1]) * float(j2)
    values[left + 1 :] = basis.gamma(w.nodes[left + 1 :]) * float(j1)
    return PiecewiseGridFunction(nodes=w.nodes, values=values)


def G_derivative(
    basis: BoundaryBasis,
    spec: ImpulseSpec,
    coeffs: ImpulseCoefficients,
    w: PiecewiseGridFunction,
) -> np.ndarray:
    left = double_node(w.nodes, spec.tau)
    j1, j2 = combined_jumps(spec, coeffs, w.left(spec.tau))
    values = np.empty(len(w.nodes))
    values[: left + 1] = float(basis.delta.slope * j2)
    values[left + 1 :] = float(basis.gamma.slope * j1)
    return values


def G_jumps(basis: BoundaryBasis, spec: ImpulseSpec, coeffs: ImpulseCoefficients, w_tau: Number) -> Tuple[Number, Number]:
    """Jumps of G(w) and of G(w)' across tau. They equal I(w_tau) and N(w_tau)."""
    j1, j2 = combined_jumps(spec, coeffs, w_tau)
    tau = spec.tau
    return basis.gamma(tau) * j1 - basis.delta(tau) * j2, basis.gamma.slope * j1 - basis.delta.slope * j2


def verify_p_bounds(
    spec: ImpulseSpec,
    coeffs: ImpulseCoefficients,
    w_max: Number,
    n_samples: int = config.GROWTH_SAMPLES,
) -> PBoundReport:
    """Checks p11 w <= j1(w) <= p12 w and 0 <= j2(w) <= p22 w on sampled w in (0, w_max].

    Samples are exact rationals (uniform plus every guard bound of I and N), so
    piecewise linear data is checked without rounding.
    """
    w_max = Fraction(w_max)
    samples = {w_max * k / n_samples for k in range(1, n_samples + 1)}
    for expr in (spec.I, spec.N):
        for bound in guard_bounds(expr, "w"):
            if 0 < bound <= w_max:
                samples.add(bound)
    samples = sorted(samples)

    ratios_1, ratios_2 = [], []
    witness = None
    for w in samples:
        j1, j2 = combined_jumps(spec, coeffs, w)
        r1, r2 = j1 / w, j2 / w
        ratios_1.append(r1)
        ratios_2.append(r2)
        if witness is None:
            if r1 < spec.p11:
                witness = f"(d1 I + e1 N)(w)/w = {float(r1):.6g} < p11 = {spec.p11} at w = {w}"
            elif r1 > spec.p12:
                witness = f"(d1 I + e1 N)(w)/w = {float(r1):.6g} > p12 = {spec.p12} at w = {w}"
            elif r2 < 0:
                witness = f"(d2 I + e2 N)(w) = {float(j2):.6g} < 0 at w = {w}"
            elif r2 > spec.p22:
                witness = f"(d2 I + e2 N)(w)/w = {float(r2):.6g} > p22 = {spec.p22} at w = {w}"

    def extreme(values, pick):
        k = pick(range(len(values)), key=lambda i: values[i])
        return values[k], samples[k]

    (lo1, lo1_at), (hi1, hi1_at) = extreme(ratios_1, min), extreme(ratios_1, max)
    (lo2, lo2_at), (hi2, hi2_at) = extreme(ratios_2, min), extreme(ratios_2, max)
    return PBoundReport(
        passed=witness is None,
        w_max=w_max,
        samples=len(samples),
        min_ratio_1=lo1,
        min_ratio_1_at=lo1_at,
        max_ratio_1=hi1,
        max_ratio_1_at=hi1_at,
        min_ratio_2=lo2,
        min_ratio_2_at=lo2_at,
        max_ratio_2=hi2,
        max_ratio_2_at=hi2_at,
        witness=witness,
    )
