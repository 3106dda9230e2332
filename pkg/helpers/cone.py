from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from helpers import config
from helpers.grid import Grid, PiecewiseGridFunction

Number = Union[Fraction, float]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class EquationCone(_Frozen):
    window_a: Fraction
    window_b: Fraction
    c_phi: Fraction
    c_gamma: Fraction
    c_delta: Fraction
    gamma_norm: Fraction
    delta_norm: Fraction
    impulse_term: Fraction
    c: Fraction


class ConeData(_Frozen):
    equations: Tuple[EquationCone, EquationCone]
    c: Fraction
    override_c: Optional[Fraction] = None

    def effective_c(self, use_override: bool = False) -> Fraction:
        if use_override and self.override_c is not None:
            return self.override_c
        return self.c


class MembershipVerdict(_Frozen):
    passed: bool
    min_value: float
    window_min: float
    sup_norm: float
    witness_t: Optional[float] = None
    reason: Optional[str] = None


def equation_cone(equation) -> EquationCone:
    interval = equation.interval
    basis = equation.basis
    p = equation.impulse
    gamma_norm, delta_norm = basis.gamma_norm, basis.delta_norm
    impulse_term = interval.c_gamma * gamma_norm * p.p11 / max(gamma_norm * p.p12, delta_norm * p.p22)
    return EquationCone(
        window_a=interval.window_a,
        window_b=interval.window_b,
        c_phi=interval.c_phi,
        c_gamma=interval.c_gamma,
        c_delta=interval.c_delta,
        gamma_norm=gamma_norm,
        delta_norm=delta_norm,
        impulse_term=impulse_term,
        c=min(interval.c_phi, interval.c_gamma, interval.c_delta, impulse_term),
    )


def cone_constants(problem) -> ConeData:
    """c_i = min{c_Phi, c_gamma, c_delta, c_gamma |gamma| p11 / max(|gamma| p12, |delta| p22)}, c = min c_i."""
    first, second = (equation_cone(eq) for eq in problem.equations)
    return ConeData(
        equations=(first, second),
        c=min(first.c, second.c),
        override_c=problem.analysis.override_c,
    )


def cone_membership(u: PiecewiseGridFunction, window_a, window_b, c, tol: float = 1e-8) -> MembershipVerdict:
    """u >= 0 and min over [a, b] of u >= c * sup|u|, both up to tol."""
    values = u.values
    lowest = int(np.argmin(values))
    min_value = float(values[lowest])
    window_min = u.window_min(window_a, window_b)
    norm = u.sup_norm()
    if min_value < -tol:
        return MembershipVerdict(
            passed=False,
            min_value=min_value,
            window_min=window_min,
            sup_norm=norm,
            witness_t=float(u.nodes[lowest]),
            reason=f"negative value {min_value:.3e} at t={float(u.nodes[lowest]):.6g}",
        )
    if window_min < float(c) * norm - tol:
        inside = (u.nodes >= float(window_a)) & (u.nodes <= float(window_b))
        where = float(u.nodes[inside][np.argmin(values[inside])]) if inside.any() else float(window_a)
        return MembershipVerdict(
            passed=False,
            min_value=min_value,
            window_min=window_min,
            sup_norm=norm,
            witness_t=where,
            reason=f"window minimum {window_min:.6g} < c*|u| = {float(c) * norm:.6g}",
        )
    return MembershipVerdict(passed=True, min_value=min_value, window_min=window_min, sup_norm=norm)


def sample_cone_members(
    grid: Grid, window_a, window_b, c, count: int, scale: float = 1.0, seed: int = config.SEED
) -> List[PiecewiseGridFunction]:
    """Random members of the cone for one component.

    Each sample is a positive random-walk profile lifted so that its window
    minimum is at least c times its sup norm, then rescaled to sup norm `scale`
    times a uniform factor.
    """
    rng = np.random.default_rng(seed)
    members = []
    # the window plus one neighbouring node per side, so interpolated end values are covered too
    first = max(int(np.searchsorted(grid.nodes, float(window_a), side="left")) - 1, 0)
    last = int(np.searchsorted(grid.nodes, float(window_b), side="right")) + 1
    inside = np.zeros(len(grid.nodes), dtype=bool)
    inside[first:last] = True
    for _ in range(count):
        profile = np.abs(np.cumsum(rng.normal(size=len(grid.nodes))))
        profile = profile / max(profile.max(), 1e-12)
        if float(c) >= 1:
            profile = np.ones_like(profile)
        else:
            profile = profile + max(0.0, (float(c) - profile[inside].min()) / (1.0 - float(c)))
        profile = profile / profile.max() * scale * rng.uniform(0.1, 1.0)
        members.append(PiecewiseGridFunction(nodes=grid.nodes, values=profile))
    return members
