"""Perturbation unknowns (a, u, b) around rho = 1, u = 0, m = 1 and the
auxiliary unknowns built from them.

Definitions used throughout, with P = A rho^gamma the pressure:

* phi   = A (1+a)^gamma + (1+b)^2 / 2 - (A + 1/2), the total pressure excess
* d     = Lambda^{-1} div u, so that the potential part of u is -Lambda^{-1} grad d
* G     = Qu - (1/2) Delta^{-1} grad phi
* delta = phi - 3a
* I(a)  = a / (1 + a)
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grid_spectral import (
    ScalarField,
    SpectralGrid,
    VectorField,
    div_coeffs,
    grad_coeffs,
    multiplier_power,
    project_coeffs,
)

SMALL_A_BOUND = 0.5


class StateValidityError(RuntimeError):
    """Raised when a state leaves the small-perturbation regime or blows up."""

    def __init__(self, message, t_last_valid=None, report=None):
        super().__init__(message)
        self.t_last_valid = t_last_valid
        self.report = report


@dataclass(frozen=True)
class PhysicalParams:
    mu: float = 1.0
    lam: float = 0.0
    A: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.lam + 2 * self.mu > 0:
            raise ValueError(f"need lambda + 2 mu > 0, got {self.lam + 2 * self.mu}")
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")

    @property
    def nu(self) -> float:
        return self.lam + 2.0 * self.mu

    @property
    def sound_speed_sq(self) -> float:
        """Linear stiffness of phi in a: P'(1) + 1 (magnetic part)."""
        return self.A * self.gamma + 1.0

    @property
    def is_reference(self) -> bool:
        """A = 1 and gamma = 2, where phi is a quadratic polynomial."""
        return self.A == 1.0 and self.gamma == 2.0


@dataclass(frozen=True)
class PerturbationState:
    a: ScalarField
    u: VectorField
    b: ScalarField
    t: float = 0.0

    def __post_init__(self):
        if not (self.a.grid == self.u.grid == self.b.grid):
            raise ValueError("state components live on different grids")

    @property
    def grid(self) -> SpectralGrid:
        return self.a.grid

    @classmethod
    def equilibrium(cls, grid: SpectralGrid, t: float = 0.0):
        return cls(ScalarField.zeros(grid), VectorField.zeros(grid), ScalarField.zeros(grid), t)

    @classmethod
    def from_stacked(cls, grid: SpectralGrid, Y: np.ndarray, t: float = 0.0):
        """Build from coefficients stacked as ``[a, u1, u2, b]``."""
        return cls(
            ScalarField(grid, coeffs=Y[0]),
            VectorField(ScalarField(grid, coeffs=Y[1]), ScalarField(grid, coeffs=Y[2])),
            ScalarField(grid, coeffs=Y[3]),
            t,
        )

    def stacked(self) -> np.ndarray:
        return np.stack([self.a.coeffs, self.u.u1.coeffs, self.u.u2.coeffs, self.b.coeffs])

    def with_time(self, t: float) -> "PerturbationState":
        return replace(self, t=t)


@dataclass(frozen=True)
class DerivedFields:
    phi: ScalarField
    d: ScalarField
    G: VectorField
    delta: ScalarField
    Ia: ScalarField


@dataclass(frozen=True)
class ValidityReport:
    sup_a: float
    min_rho: float
    sup_b: float
    finite: bool
    small_a: bool

    @property
    def ok(self) -> bool:
        return self.finite and self.small_a

    def describe(self) -> str:
        bits = []
        if not self.finite:
            bits.append("non-finite values")
        if not self.small_a:
            bits.append(f"sup|a| = {self.sup_a:.4g} exceeds {SMALL_A_BOUND}")
        return "; ".join(bits) if bits else "ok"


def phi_from_values(a: np.ndarray, b: np.ndarray, params: PhysicalParams) -> np.ndarray:
    A, g = params.A, params.gamma
    if g == 2.0:
        pa = A * (a * a + 2.0 * a)  # A((1+a)^2 - 1) without cancellation
    else:
        pa = A * np.expm1(g * np.log1p(a))
    return pa + b * b / 2.0 + b


def compute_phi(state: PerturbationState, params: PhysicalParams = PhysicalParams()) -> ScalarField:
    """Pointwise total pressure excess (not dealiased; it is a composition)."""
    return ScalarField.from_values(state.grid, phi_from_values(state.a.values, state.b.values, params))


def compute_d(u: VectorField) -> ScalarField:
    g = u.grid
    return ScalarField(g, coeffs=multiplier_power(g, -1.0) * div_coeffs(g, u.coeffs))


def potential_from_d(d: ScalarField) -> VectorField:
    """-Lambda^{-1} grad d, the curl-free velocity carried by d."""
    g = d.grid
    return VectorField.from_coeffs(g, -multiplier_power(g, -1.0) * grad_coeffs(g, d.coeffs))


def compute_effective_velocity(u: VectorField, phi: ScalarField) -> VectorField:
    """Qu - (1/2) Delta^{-1} grad phi.

    Only the mean-free part of phi enters; its mean is dropped because the
    gradient annihilates it anyway.
    """
    g = u.grid
    _, q = project_coeffs(g, u.coeffs)
    corr = 0.5 * multiplier_power(g, -2.0) * grad_coeffs(g, phi.coeffs)  # -1/2 * (1/(-|k|^2))
    return VectorField.from_coeffs(g, q + corr)


def compute_delta(phi: ScalarField, a: ScalarField) -> ScalarField:
    return ScalarField.from_values(a.grid, phi.values - 3.0 * a.values)


def rational_a(a: ScalarField) -> ScalarField:
    """I(a) = a / (1 + a); requires inf(1 + a) >= 1/2."""
    v = a.values
    lo = float(np.min(1.0 + v))
    if not lo >= 1.0 - SMALL_A_BOUND:
        raise StateValidityError(f"I(a) needs inf(1+a) >= 1/2, got {lo:.4g}")
    return ScalarField.from_values(a.grid, v / (1.0 + v))


def validate_state(state: PerturbationState) -> ValidityReport:
    a = state.a.values
    b = state.b.values
    uv = state.u.values
    finite = bool(np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(uv)))
    if finite:
        sup_a = float(np.max(np.abs(a)))
        min_rho = float(np.min(1.0 + a))
        sup_b = float(np.max(np.abs(b)))
    else:
        sup_a = min_rho = sup_b = float("nan")
    return ValidityReport(sup_a, min_rho, sup_b, finite, finite and sup_a <= SMALL_A_BOUND)


def compute_derived(state: PerturbationState, params: PhysicalParams = PhysicalParams()) -> DerivedFields:
    phi = compute_phi(state, params)
    return DerivedFields(
        phi=phi,
        d=compute_d(state.u),
        G=compute_effective_velocity(state.u, phi),
        delta=compute_delta(phi, state.a),
        Ia=rational_a(state.a),
    )


# -- primitive variables (rho, u, m) ---------------------------------------------


def to_perturbation(rho: np.ndarray, u1: np.ndarray, u2: np.ndarray, m: np.ndarray,
                    grid: SpectralGrid, t: float = 0.0) -> PerturbationState:
    return PerturbationState(
        ScalarField.from_values(grid, np.asarray(rho, dtype=float) - 1.0),
        VectorField.from_values(grid, u1, u2),
        ScalarField.from_values(grid, np.asarray(m, dtype=float) - 1.0),
        t,
    )


def to_primitive(state: PerturbationState):
    """(rho, u1, u2, m) sample arrays."""
    return 1.0 + state.a.values, state.u.u1.values, state.u.u2.values, 1.0 + state.b.values
