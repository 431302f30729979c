"""Shared test utilities: random band-limited fields and states."""

import math

import numpy as np

from mhd25.grid_spectral import ScalarField, VectorField, make_grid
from mhd25.state_model import PerturbationState


def band_limited_coeffs(grid, rng, frac=1.0 / 6.0, mean_free=True):
    c = grid.forward(rng.standard_normal(grid.shape))
    lat1, lat2 = grid.lattice
    m = grid.n_points * frac
    c = c * ((np.abs(lat1) / grid.dk < m) & (np.abs(lat2) / grid.dk < m))
    if mean_free:
        c[0, 0] = 0.0
    return c


def random_scalar(grid, rng, frac=1.0 / 6.0, mean_free=True, scale=1.0):
    return ScalarField(grid, coeffs=scale * band_limited_coeffs(grid, rng, frac, mean_free))


def random_vector(grid, rng, frac=1.0 / 6.0, scale=1.0):
    return VectorField.from_coeffs(grid, scale * np.stack([band_limited_coeffs(grid, rng, frac),
                                                           band_limited_coeffs(grid, rng, frac)]))


def random_state(grid, rng, amplitude=1e-2, frac=1.0 / 6.0):
    """State whose fields have sup-norm of order ``amplitude``."""
    fields = []
    for _ in range(4):
        c = band_limited_coeffs(grid, rng, frac)
        v = grid.inverse(c)
        fields.append(c * amplitude / np.max(np.abs(v)))
    return PerturbationState.from_stacked(grid, np.stack(fields))


def unit_grid(n=32):
    return make_grid(n, 2 * math.pi)
