"""Right-hand sides of the perturbation system

    a_t + div u + u.grad a + a div u = 0
    u_t + u.grad u - L u + grad P(1+a) + grad (b+1)^2 / 2 = I(a) (grad P + grad (b+1)^2 / 2 - L u)
    b_t + div u + u.grad b + b div u = 0

with L u = mu Lap u + (lam + mu) grad div u and I(a) = a / (1 + a).  The
momentum equation is evaluated in the equivalent form

    u_t = L u - u.grad u - (grad_p + a L u) / (1 + a),
    grad_p = A gamma (1+a)^(gamma-1) grad a + (1+b) grad b,

which is the same pointwise expression.  The continuity-type equations are
evaluated as -div u - div[(a u)] with the product dealiased, so the zero
mode of the tendency is exactly zero.

The hot path works on coefficient stacks ``Y = [a, u1, u2, b]`` of shape
``(4, n, n//2 + 1)`` with batched transforms; the field-level functions
below wrap it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_spectral import (
    ScalarField,
    SpectralGrid,
    VectorField,
    div_coeffs,
    grad_coeffs,
    multiplier_power,
)
from .state_model import (
    SMALL_A_BOUND,
    PerturbationState,
    PhysicalParams,
    StateValidityError,
    compute_phi,
    phi_from_values,
    rational_a,
    validate_state,
)


@dataclass(frozen=True)
class Tendency:
    da: ScalarField
    du: VectorField
    db: ScalarField

    def stacked(self) -> np.ndarray:
        return np.stack([self.da.coeffs, self.du.u1.coeffs, self.du.u2.coeffs, self.db.coeffs])

    @classmethod
    def from_stacked(cls, grid, T):
        return cls(
            ScalarField(grid, coeffs=T[0]),
            VectorField(ScalarField(grid, coeffs=T[1]), ScalarField(grid, coeffs=T[2])),
            ScalarField(grid, coeffs=T[3]),
        )


def viscous_coeffs(grid: SpectralGrid, uhat: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Fourier coefficients of mu Lap u + (lam + mu) grad div u."""
    k1, k2 = grid.k1, grid.k2
    kdotu = k1 * uhat[0] + k2 * uhat[1]
    lap = -(grid.kmag ** 2)
    s = params.lam + params.mu
    return np.stack([params.mu * lap * uhat[0] - s * k1 * kdotu,
                     params.mu * lap * uhat[1] - s * k2 * kdotu])


def _gate(a_vals: np.ndarray):
    lo = float(np.min(a_vals))
    hi = float(np.max(a_vals))
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise StateValidityError("non-finite density perturbation")
    if lo < -SMALL_A_BOUND:
        raise StateValidityError(f"inf(1+a) = {1 + lo:.4g} below 1/2")


def nonlinear_tendency(grid: SpectralGrid, Y: np.ndarray, params: PhysicalParams,
                       delta: np.ndarray | None = None):
    """Full tendency minus the viscous operator L u.

    Returns the stacked ``(4, ...)`` tendency; when the coefficients of a
    passenger ``delta`` are given, also returns its transport tendency
    ``-u.grad delta - delta div u - phi div u``.
    """
    k1, k2 = grid.k1, grid.k2
    mask = grid.dealias_mask
    a, u1, u2, b = Y
    Lu = viscous_coeffs(grid, Y[1:3], params)
    spec = [a, u1, u2, b,
            1j * k1 * a, 1j * k2 * a, 1j * k1 * b, 1j * k2 * b,
            1j * k1 * u1, 1j * k2 * u1, 1j * k1 * u2, 1j * k2 * u2,
            Lu[0], Lu[1]]
    if delta is not None:
        spec += [delta]
    phys = grid.inverse(np.stack(spec))
    av, u1v, u2v, bv, ax, ay, bx, by, u1x, u1y, u2x, u2y, L1, L2 = phys[:14]
    _gate(av)

    rho = 1.0 + av
    if params.gamma == 2.0:
        cp = 2.0 * params.A * rho
    else:
        cp = params.A * params.gamma * rho ** (params.gamma - 1.0)
    mb = 1.0 + bv
    gp1 = cp * ax + mb * bx
    gp2 = cp * ay + mb * by
    du1 = -(u1v * u1x + u2v * u1y) - (gp1 + av * L1) / rho
    du2 = -(u1v * u2x + u2v * u2y) - (gp2 + av * L2) / rho

    prods = [av * u1v, av * u2v, bv * u1v, bv * u2v, du1, du2]
    if delta is not None:
        dv = phys[14]
        divu = u1x + u2y
        prods += [dv * u1v, dv * u2v, phi_from_values(av, bv, params) * divu]
    F = grid.forward(np.stack(prods)) * mask

    divu_hat = div_coeffs(grid, Y[1:3])
    out = np.empty_like(Y)
    out[0] = -divu_hat - div_coeffs(grid, F[0:2])
    out[1] = F[4]
    out[2] = F[5]
    out[3] = -divu_hat - div_coeffs(grid, F[2:4])
    if delta is None:
        return out
    ddelta = -div_coeffs(grid, F[6:8]) - F[8]
    return out, ddelta


def full_tendency(grid: SpectralGrid, Y: np.ndarray, params: PhysicalParams) -> np.ndarray:
    T = nonlinear_tendency(grid, Y, params)
    T[1:3] += viscous_coeffs(grid, Y[1:3], params)
    return T


def linear_tendency(grid: SpectralGrid, Y: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Linearization about equilibrium, applied mode by mode."""
    divu = div_coeffs(grid, Y[1:3])
    out = np.empty_like(Y)
    out[0] = -divu
    out[3] = -divu
    out[1:3] = viscous_coeffs(grid, Y[1:3], params) - grad_coeffs(
        grid, params.A * params.gamma * Y[0] + Y[3])
    return out


# -- field-level API ------------------------------------------------------------


def _require_valid(state: PerturbationState):
    rep = validate_state(state)
    if not rep.ok:
        raise StateValidityError(f"invalid state at t={state.t}: {rep.describe()}",
                                 t_last_valid=None, report=rep)


def rhs_full(state: PerturbationState, params: PhysicalParams = PhysicalParams()) -> Tendency:
    _require_valid(state)
    g = state.grid
    return Tendency.from_stacked(g, full_tendency(g, state.stacked(), params))


def linearize_rhs(state: PerturbationState, params: PhysicalParams = PhysicalParams()) -> Tendency:
    g = state.grid
    return Tendency.from_stacked(g, linear_tendency(g, state.stacked(), params))


def forcing_F(a: ScalarField, u: VectorField, phi: ScalarField,
              params: PhysicalParams = PhysicalParams()) -> VectorField:
    """I(a) grad phi - I(a) L u, dealiased."""
    g = a.grid
    Ia = rational_a(a).values
    grad_phi = g.inverse(grad_coeffs(g, phi.coeffs))
    Lu = g.inverse(viscous_coeffs(g, u.coeffs, params))
    out = g.forward(Ia * (grad_phi - Lu)) * g.dealias_mask
    return VectorField.from_coeffs(g, out)


def forcing_f1_f2(state: PerturbationState, params: PhysicalParams = PhysicalParams(),
                  phi: ScalarField | None = None):
    """f1 = -u.grad phi - 2 phi div u and f2 = Lambda^{-1} div(-u.grad u + F)."""
    g = state.grid
    if phi is None:
        phi = compute_phi(state, params)
    u = state.u
    uv = u.values
    gphi = g.inverse(grad_coeffs(g, phi.coeffs))
    divu = g.inverse(div_coeffs(g, u.coeffs))
    f1 = g.forward(-(uv[0] * gphi[0] + uv[1] * gphi[1]) - 2.0 * phi.values * divu) * g.dealias_mask

    du = g.inverse(np.stack([1j * g.k1 * u.u1.coeffs, 1j * g.k2 * u.u1.coeffs,
                             1j * g.k1 * u.u2.coeffs, 1j * g.k2 * u.u2.coeffs]))
    adv = np.stack([uv[0] * du[0] + uv[1] * du[1], uv[0] * du[2] + uv[1] * du[3]])
    adv_hat = g.forward(adv) * g.dealias_mask
    F = forcing_F(state.a, u, phi, params).coeffs
    f2 = multiplier_power(g, -1.0) * div_coeffs(g, -adv_hat + F)
    return ScalarField(g, coeffs=f1), ScalarField(g, coeffs=f2)


def phi_equation_tendency(state: PerturbationState, params: PhysicalParams = PhysicalParams(),
                          phi: ScalarField | None = None) -> ScalarField:
    """phi_t from its own transport law.

    In general phi_t = -u.grad phi - (A gamma (1+a)^gamma + (1+b)^2) div u;
    for A = 1, gamma = 2 the bracket is 3 + 2 phi, which is the form used.
    """
    g = state.grid
    if phi is None:
        phi = compute_phi(state, params)
    uv = state.u.values
    gphi = g.inverse(grad_coeffs(g, phi.coeffs))
    divu = g.inverse(div_coeffs(g, state.u.coeffs))
    if params.is_reference:
        stiff = 3.0 + 2.0 * phi.values
    else:
        rho = 1.0 + state.a.values
        stiff = params.A * params.gamma * rho ** params.gamma + (1.0 + state.b.values) ** 2
    vals = -(uv[0] * gphi[0] + uv[1] * gphi[1]) - stiff * divu
    return ScalarField.from_values(g, vals)


def phi_chain_rule_tendency(state: PerturbationState,
                            params: PhysicalParams = PhysicalParams()) -> ScalarField:
    """phi_t = P'(1+a) a_t + (1+b) b_t with (a_t, b_t) from the full system."""
    T = rhs_full(state, params)
    rho = 1.0 + state.a.values
    cp = params.A * params.gamma * rho ** (params.gamma - 1.0)
    vals = cp * T.da.values + (1.0 + state.b.values) * T.db.values
    return ScalarField.from_values(state.grid, vals)


def delta_tendency(state: PerturbationState, delta: ScalarField,
                   params: PhysicalParams = PhysicalParams()) -> ScalarField:
    """-u.grad delta - delta div u - phi div u (dealiased)."""
    g = state.grid
    _, dd = nonlinear_tendency(g, state.stacked(), params, delta=delta.coeffs)
    return ScalarField(g, coeffs=dd)
