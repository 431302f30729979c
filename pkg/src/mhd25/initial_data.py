"""Initial perturbations: random power-law spectra, single Fourier modes and
localized bumps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ExperimentConfig
from .diagnostics import DiagnosticsConfig, initial_X
from .grid_spectral import ScalarField, SpectralGrid, VectorField
from .state_model import SMALL_A_BOUND, PerturbationState, PhysicalParams, validate_state


class InitialDataError(ConfigError):
    pass


@dataclass(frozen=True)
class InitialData:
    a0: ScalarField
    u0: VectorField
    b0: ScalarField

    def state(self, t: float = 0.0) -> PerturbationState:
        return PerturbationState(self.a0, self.u0, self.b0, t)


def target_modulus(grid: SpectralGrid, sigma: float, k_cut: float) -> np.ndarray:
    """|xi|^(sigma - 1) exp(-(|xi| / k_cut)^2) inside the dealias mask, 0 elsewhere."""
    out = np.zeros(grid.spectral_shape)
    sel = (grid.kmag > 0) & grid.dealias_mask
    k = grid.kmag[sel]
    out[sel] = k ** (sigma - 1.0) * np.exp(-((k / k_cut) ** 2))
    return out


def random_phase_field(grid: SpectralGrid, modulus: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Coefficients with the given modulus and phases of a real white-noise field.

    Taking the phases from the transform of real noise makes the result
    Hermitian-symmetric (real samples) by construction.
    """
    noise = grid.forward(rng.standard_normal(grid.shape))
    mag = np.abs(noise)
    phase = np.divide(noise, mag, out=np.ones_like(noise), where=mag > 0)
    return modulus * phase


def shell_average(grid: SpectralGrid, power: np.ndarray, shells) -> np.ndarray:
    """Mean of ``power`` over lattice shells |xi| / dk in [m - 1/2, m + 1/2).

    Both halves of the lattice are counted via the real-transform weights.
    """
    idx = np.rint(grid.kradius / grid.dk).astype(int)
    keep = grid.kradius > 0
    out = []
    for m in shells:
        sel = (idx == m) & keep
        w = grid.weights[sel]
        out.append(float(np.sum(w * power[sel]) / np.sum(w)) if w.size else float("nan"))
    return np.array(out)


def random_spectrum(grid: SpectralGrid, amplitude: float, sigma: float = 1.0, k_cut: float = 1.0,
                    seed: int = 0, params: PhysicalParams = PhysicalParams(),
                    diag: DiagnosticsConfig = DiagnosticsConfig(),
                    mean_a: float = 0.0, mean_b: float = 0.0) -> InitialData:
    """Independent random-phase a, u1, u2, b with prescribed modulus, scaled
    so that the sup-in-time part of X at t = 0 equals ``amplitude``."""
    modulus = target_modulus(grid, sigma, k_cut)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    Y = np.stack([random_phase_field(grid, modulus, r) for r in rngs])
    if amplitude == 0:
        Y[:] = 0.0
    else:
        X1 = initial_X(PerturbationState.from_stacked(grid, Y), params, diag)
        Y *= amplitude / X1
    Y[0, 0, 0] = mean_a
    Y[3, 0, 0] = mean_b
    return _checked(grid, Y)


def single_mode(grid: SpectralGrid, amplitude: float, mode=(1, 0),
                polarization: str = "compressible", mean_a: float = 0.0,
                mean_b: float = 0.0) -> InitialData:
    """u = c e cos(xi . x) with e parallel (compressible) or perpendicular
    (solenoidal) to xi, scaled to L^2 norm ``amplitude``; a = b = 0."""
    m1, m2 = mode
    if (m1, m2) == (0, 0):
        raise InitialDataError("single_mode needs a nonzero mode")
    n = grid.n_points
    if max(abs(m1), abs(m2)) >= n / 3:
        raise InitialDataError(f"mode {mode} lies outside the dealiased band of an n={n} grid")
    k1, k2 = grid.dk * m1, grid.dk * m2
    kn = math.hypot(k1, k2)
    e = (k1 / kn, k2 / kn) if polarization == "compressible" else (-k2 / kn, k1 / kn)
    X1, X2 = grid.coordinates()
    c = amplitude * math.sqrt(2.0) / grid.box_length  # ||cos||_{L^2} = L / sqrt(2)
    wave = np.cos(k1 * X1 + k2 * X2)
    a = np.full(grid.shape, mean_a)
    b = np.full(grid.shape, mean_b)
    Y = np.stack([grid.forward(v) for v in (a, c * e[0] * wave, c * e[1] * wave, b)])
    return _checked(grid, Y)


def gaussian_blob(grid: SpectralGrid, amplitude: float, width: float = 1.0,
                  mean_a: float = 0.0, mean_b: float = 0.0) -> InitialData:
    """a = b = amplitude * Gaussian bump at the box centre (mean removed,
    dealiased), u = 0."""
    X1, X2 = grid.coordinates()
    L = grid.box_length
    r2 = (X1 - L / 2) ** 2 + (X2 - L / 2) ** 2
    bump = amplitude * np.exp(-r2 / (2.0 * width ** 2))
    c = grid.forward(bump) * grid.dealias_mask
    c[0, 0] = 0.0
    Y = np.stack([c, np.zeros_like(c), np.zeros_like(c), c.copy()])
    Y[0, 0, 0] += mean_a
    Y[3, 0, 0] += mean_b
    return _checked(grid, Y)


def _checked(grid, Y) -> InitialData:
    st = PerturbationState.from_stacked(grid, Y)
    rep = validate_state(st)
    if not rep.ok:
        raise InitialDataError(f"initial data outside the small-perturbation regime "
                               f"(sup|a0| must be <= {SMALL_A_BOUND}): {rep.describe()}")
    return InitialData(st.a, st.u, st.b)


def generate_initial_data(cfg: ExperimentConfig) -> InitialData:
    g = cfg.grid()
    if cfg.init_kind == "random_spectrum":
        return random_spectrum(g, cfg.init_amplitude, cfg.init_sigma, cfg.init_k_cut, cfg.init_seed,
                               cfg.physical_params(), cfg.diagnostics_config(),
                               cfg.init_mean_a, cfg.init_mean_b)
    if cfg.init_kind == "single_mode":
        return single_mode(g, cfg.init_amplitude, cfg.init_mode, cfg.init_polarization,
                           cfg.init_mean_a, cfg.init_mean_b)
    if cfg.init_kind == "gaussian_blob":
        return gaussian_blob(g, cfg.init_amplitude, cfg.init_width, cfg.init_mean_a, cfg.init_mean_b)
    raise InitialDataError(f"unknown init.kind {cfg.init_kind!r}")
