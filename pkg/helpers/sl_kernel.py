from fractions import Fraction
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from helpers.errors import DegenerateWindowError, ResonantBoundaryError

Number = Union[Fraction, float]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class SLCoefficients(_Frozen):
    """a1 w(0) - b1 w'(0) and a2 w(1) + b2 w'(1): the two boundary operators."""

    a1: Fraction
    b1: Fraction
    a2: Fraction
    b2: Fraction

    @field_validator("a1", "b1", "a2", "b2")
    @classmethod
    def _nonnegative(cls, value: Fraction) -> Fraction:
        if value < 0:
            raise ValueError("boundary coefficients must be nonnegative")
        return value

    @property
    def D(self) -> Fraction:
        return self.a1 * self.a2 + self.a1 * self.b2 + self.a2 * self.b1


class Affine(_Frozen):
    intercept: Fraction
    slope: Fraction

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return float(self.intercept) + float(self.slope) * t
        if isinstance(t, float):
            return float(self.intercept) + float(self.slope) * t
        return self.intercept + self.slope * t

    def integral(self, lo: Number, hi: Number) -> Number:
        """Exact antiderivative difference over [lo, hi]."""
        return self.intercept * (hi - lo) + self.slope * (hi * hi - lo * lo) / 2


class BoundaryBasis(_Frozen):
    coeffs: SLCoefficients
    gamma: Affine = Field(description="Solves w''=0 with a1 w(0)-b1 w'(0)=1 and a2 w(1)+b2 w'(1)=0.")
    delta: Affine = Field(description="Solves w''=0 with a1 w(0)-b1 w'(0)=0 and a2 w(1)+b2 w'(1)=1.")
    W: Fraction = Field(description="Wronskian gamma*delta' - delta*gamma', constant.")

    @property
    def gamma_norm(self) -> Fraction:
        # gamma is nonincreasing and positive on [0,1)
        return self.gamma(Fraction(0))

    @property
    def delta_norm(self) -> Fraction:
        return self.delta(Fraction(1))


class GreenKernel(_Frozen):
    basis: BoundaryBasis

    def __call__(self, t, s):
        return kernel_eval(self, t, s)

    def phi(self, s):
        """Upper bound Phi(s) = gamma(s) delta(s) / W, attained on the diagonal."""
        b = self.basis
        if isinstance(s, (np.ndarray, float)):
            return b.gamma(s) * b.delta(s) / float(b.W)
        return b.gamma(s) * b.delta(s) / b.W

    def row_integral(self, t: Number, lo: Number, hi: Number) -> Number:
        """Closed form of the integral of k(t, s) over s in [lo, hi]."""
        b = self.basis
        knee = min(max(t, lo), hi)
        return (b.gamma(t) * b.delta.integral(lo, knee) + b.delta(t) * b.gamma.integral(knee, hi)) / b.W


class IntervalConstants(_Frozen):
    window_a: Fraction
    window_b: Fraction
    c_phi: Fraction
    c_gamma: Fraction
    c_delta: Fraction


def make_basis(coeffs: SLCoefficients) -> BoundaryBasis:
    if coeffs.a1 + coeffs.b1 == 0:
        raise ResonantBoundaryError("resonant boundary coefficients: a1 + b1 must be positive")
    if coeffs.a2 + coeffs.b2 == 0:
        raise ResonantBoundaryError("resonant boundary coefficients: a2 + b2 must be positive")
    D = coeffs.D
    if D == 0:
        raise ResonantBoundaryError(
            f"resonant boundary coefficients: a1*a2 + a1*b2 + a2*b1 = 0 for {coeffs.model_dump()}"
        )
    gamma = Affine(intercept=(coeffs.a2 + coeffs.b2) / D, slope=-coeffs.a2 / D)
    delta = Affine(intercept=coeffs.b1 / D, slope=coeffs.a1 / D)
    return BoundaryBasis(coeffs=coeffs, gamma=gamma, delta=delta, W=1 / D)


def make_kernel(basis: BoundaryBasis) -> GreenKernel:
    return GreenKernel(basis=basis)


def kernel_eval(kernel: GreenKernel, t, s):
    """k(t,s) = gamma(t) delta(s) / W for s <= t, gamma(s) delta(t) / W otherwise."""
    b = kernel.basis
    if isinstance(t, np.ndarray) or isinstance(s, np.ndarray):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        lower = b.gamma(t) * b.delta(s)
        upper = b.gamma(s) * b.delta(t)
        return np.where(s <= t, lower, upper) / float(b.W)
    if s <= t:
        return b.gamma(t) * b.delta(s) / b.W
    return b.gamma(s) * b.delta(t) / b.W


def boundary_identities(basis: BoundaryBasis) -> dict:
    """The four defining boundary values of gamma and delta. Exact for rational data."""
    c, g, d = basis.coeffs, basis.gamma, basis.delta
    return {
        "gamma_left": c.a1 * g(Fraction(0)) - c.b1 * g.slope,
        "gamma_right": c.a2 * g(Fraction(1)) + c.b2 * g.slope,
        "delta_left": c.a1 * d(Fraction(0)) - c.b1 * d.slope,
        "delta_right": c.a2 * d(Fraction(1)) + c.b2 * d.slope,
        "wronskian": g(Fraction(0)) * d.slope - d(Fraction(0)) * g.slope,
    }


def interval_constants(basis: BoundaryBasis, window_a: Fraction, window_b: Fraction) -> IntervalConstants:
    if not (0 <= window_a < window_b <= 1):
        raise DegenerateWindowError(f"degenerate window [{window_a}, {window_b}]: need 0 <= a < b <= 1")
    c_gamma = basis.gamma(window_b) / basis.gamma_norm
    c_delta = basis.delta(window_a) / basis.delta_norm
    if c_gamma <= 0 or c_delta <= 0:
        raise DegenerateWindowError(
            f"degenerate window [{window_a}, {window_b}]: touches a zero of the boundary basis "
            f"(c_gamma={c_gamma}, c_delta={c_delta})"
        )
    return IntervalConstants(
        window_a=window_a,
        window_b=window_b,
        c_phi=min(c_gamma, c_delta),
        c_gamma=c_gamma,
        c_delta=c_delta,
    )


def kernel_bound_check(kernel: GreenKernel, window_a, window_b, c_phi, n: int = 101) -> dict:
    """Samples k <= Phi on the square and k >= c_phi Phi for t in the window."""
    s = np.linspace(0.0, 1.0, n)
    t = np.linspace(0.0, 1.0, n)
    T, S = np.meshgrid(t, s, indexing="ij")
    k = kernel_eval(kernel, T, S)
    phi = kernel.phi(S)
    upper_excess = float(np.max(k - phi))

    tw = np.linspace(float(window_a), float(window_b), n)
    TW, SW = np.meshgrid(tw, s, indexing="ij")
    lower_deficit = float(np.max(float(c_phi) * kernel.phi(SW) - kernel_eval(kernel, TW, SW)))

    positive = kernel.phi(s) > 0
    ratio = kernel_eval(kernel, TW, SW)[:, positive] / kernel.phi(SW)[:, positive]
    return {
        "max_k_minus_phi": upper_excess,
        "max_cphi_phi_minus_k": lower_deficit,
        "sampled_min_ratio": float(ratio.min()) if ratio.size else None,
        "passed": upper_excess <= 1e-12 and lower_deficit <= 1e-12,
    }
