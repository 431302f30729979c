"""Exact mode-wise solutions of the linearized system about equilibrium.

Per wavevector xi with d = Lambda^{-1} div u (so d_hat = i xi.u_hat / |xi|):

    a_t = -|xi| d
    d_t = -nu |xi|^2 d + |xi| (A gamma a + b)
    b_t = -|xi| d

and the solenoidal velocity decays as exp(-mu |xi|^2 t).  In terms of the
linearized phi = A gamma a + b the (phi, d) pair obeys

    phi_t = -c2 |xi| d,   d_t = |xi| phi - nu |xi|^2 d,   c2 = A gamma + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid_spectral import multiplier_power, project_coeffs
from .state_model import PerturbationState, PhysicalParams


@dataclass(frozen=True)
class ModeSymbol:
    xi_mag: float
    mat2: np.ndarray
    mat3: np.ndarray
    heat_rate: float


def symbol_matrix(xi_mag: float, params: PhysicalParams = PhysicalParams()) -> ModeSymbol:
    if not xi_mag > 0:
        raise ValueError(f"xi_mag must be positive, got {xi_mag}")
    r = float(xi_mag)
    nu = params.nu
    c2 = params.sound_speed_sq
    mat2 = np.array([[0.0, -c2 * r], [r, -nu * r * r]])
    ag = params.A * params.gamma
    mat3 = np.array([
        [0.0, -r, 0.0],
        [ag * r, -nu * r * r, r],
        [0.0, -r, 0.0],
    ])
    return ModeSymbol(r, mat2, mat3, -params.mu * r * r)


def acoustic_eigenvalues(xi_mag, params: PhysicalParams = PhysicalParams()):
    """Roots of lam^2 + nu |xi|^2 lam + c2 |xi|^2 = 0, as (fast, slow).

    The slow root is obtained from the product of roots to avoid
    cancellation when nu |xi|^2 dominates.
    """
    r = np.asarray(xi_mag, dtype=float)
    if np.any(r <= 0):
        raise ValueError("xi_mag must be positive")
    bcoef = params.nu * r * r
    ccoef = params.sound_speed_sq * r * r
    disc = (bcoef * bcoef - 4.0 * ccoef).astype(complex)
    fast = (-bcoef - np.sqrt(disc)) / 2.0
    slow = ccoef / fast
    if r.ndim == 0:
        return complex(fast), complex(slow)
    return fast, slow


def matrix_exponential(mat, t: float = 1.0) -> np.ndarray:
    """exp(t * mat) for a small matrix or a stack of them (last two axes).

    Padé scaling-and-squaring from scipy.
    """
    m = np.asarray(mat, dtype=float)
    if m.shape[-1] != m.shape[-2] or m.shape[-1] > 4:
        raise ValueError(f"expected square matrices of size <= 4, got {m.shape}")
    return scipy.linalg.expm(t * m)


def mat3_stack(kmag: np.ndarray, params: PhysicalParams) -> np.ndarray:
    r = kmag
    ag = params.A * params.gamma
    M = np.zeros(r.shape + (3, 3))
    M[..., 0, 1] = -r
    M[..., 1, 0] = ag * r
    M[..., 1, 1] = -params.nu * r * r
    M[..., 1, 2] = r
    M[..., 2, 1] = -r
    return M


def evolve_linear_exact(state0: PerturbationState, t: float,
                        params: PhysicalParams = PhysicalParams()) -> PerturbationState:
    """Advance the linearized system exactly by time ``t`` (mode by mode)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    g = state0.grid
    uhat = state0.u.coeffs
    p, _ = project_coeffs(g, uhat)
    inv_k = multiplier_power(g, -1.0)
    dhat = 1j * (g.k1 * uhat[0] + g.k2 * uhat[1]) * inv_k
    ahat = state0.a.coeffs
    bhat = state0.b.coeffs

    nz = g.kmag > 0
    E = matrix_exponential(mat3_stack(g.kmag[nz], params), t)
    v = np.stack([ahat[nz], dhat[nz], bhat[nz]], axis=-1)
    w = np.einsum("mij,mj->mi", E, v)

    a1 = ahat.copy()
    b1 = bhat.copy()
    d1 = np.zeros_like(dhat)
    a1[nz], d1[nz], b1[nz] = w[:, 0], w[:, 1], w[:, 2]
    heat = np.exp(-params.mu * g.kmag ** 2 * t)
    # Qu = -Lambda^{-1} grad d  =>  Qu_hat = -i xi d_hat / |xi|
    q = np.stack([-1j * g.k1 * d1 * inv_k, -1j * g.k2 * d1 * inv_k])
    u1 = heat * p + q
    Y = np.stack([a1, u1[0], u1[1], b1])
    return PerturbationState.from_stacked(g, Y, state0.t + t)


def spectrum_table(xi_values, params: PhysicalParams = PhysicalParams()):
    """Rows (|xi|, Re fast, Im fast, Re slow, Im slow, heat rate)."""
    xi = np.asarray(xi_values, dtype=float)
    fast, slow = acoustic_eigenvalues(xi, params)
    return np.column_stack([xi, fast.real, fast.imag, slow.real, slow.imag, -params.mu * xi ** 2])
