"""Norm panels, the energy functional of the low blocks, the solution norm
X(t), the Lyapunov functional, conservation totals and decay fits.

Conventions:

* Besov norms are homogeneous, p = 2, r = 1, summed over the grid's block
  range.  ``||z||^l`` is the norm of the low part z^l (blocks j <= j0) and
  ``||z||^h`` the norm of the high part (blocks j >= j0 - 1).
* The norm of a tuple is the sum of the norms of its members; a velocity
  counts as one member with the Euclidean block norm.
* L^2 norms in a record are taken of the mean-free part; the means of a and
  b are reported separately as totals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid_spectral import (
    ScalarField,
    SpectralGrid,
    VectorField,
    div_coeffs,
    multiplier_power,
    project_coeffs,
)
from .littlewood_paley import (
    DEFAULT_CUTOFFS,
    CutoffPair,
    block_filter,
    grid_block_range,
    high_filter,
    low_filter,
    negative_index_seminorm,
)
from .state_model import PerturbationState, PhysicalParams, compute_phi

# sup-in-time and time-integrated members of X(t)
X_SUP_TERMS = ("low_a_Qu_b_B0", "high_a_b_B1", "Pu_Quh_B0")
X_INT_TERMS = ("low_phi_Qu_B2", "high_phi_B1", "Pu_Quh_B2")

CSV_COLUMNS = (
    "t", "l2_phi", "l2_u", "l2_a", "l2_b",
    "besov_low_phi_u_B0", "besov_high_phi_B1", "besov_high_u_B0",
    "besov_low_phi_u_B2", "besov_high_u_B2",
    "lyapunov", "X_t",
    "neg_idx_a", "neg_idx_b", "neg_idx_phi", "neg_idx_u",
    "total_a", "total_b", "min_rho",
)


@dataclass(frozen=True)
class DiagnosticsConfig:
    j0: int = 0
    sigma: float = 1.0
    gamma1: float = -0.5
    cutoffs: CutoffPair = DEFAULT_CUTOFFS

    def __post_init__(self):
        if not (0 < self.sigma <= 1):
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")


@dataclass
class DiagnosticsRecord:
    t: float
    l2_phi: float
    l2_u: float
    l2_a: float
    l2_b: float
    besov_panel: dict
    Lk_table: dict
    neg_index: dict
    totals: dict
    lyapunov: float
    X_t: float = float("nan")

    def row(self) -> dict:
        p = self.besov_panel
        return {
            "t": self.t, "l2_phi": self.l2_phi, "l2_u": self.l2_u,
            "l2_a": self.l2_a, "l2_b": self.l2_b,
            "besov_low_phi_u_B0": p["low_phi_u_B0"],
            "besov_high_phi_B1": p["high_phi_B1"],
            "besov_high_u_B0": p["high_u_B0"],
            "besov_low_phi_u_B2": p["low_phi_u_B2"],
            "besov_high_u_B2": p["high_u_B2"],
            "lyapunov": self.lyapunov, "X_t": self.X_t,
            "neg_idx_a": self.neg_index["a"], "neg_idx_b": self.neg_index["b"],
            "neg_idx_phi": self.neg_index["phi"], "neg_idx_u": self.neg_index["u"],
            "total_a": self.totals["a"], "total_b": self.totals["b"],
            "min_rho": self.totals["min_rho"],
        }


@dataclass(frozen=True)
class DecayFit:
    quantity: str
    window: tuple
    exponent: float
    r_squared: float
    predicted: float = float("nan")
    n_samples: int = 0


# -- block norm machinery -------------------------------------------------------


@lru_cache(maxsize=16)
def _block_matrix(grid: SpectralGrid, cutoffs: CutoffPair):
    """Squared block filters over the dealiased block range, flattened."""
    j_min, j_max = grid_block_range(grid)
    js = np.arange(j_min, j_max + 1)
    M = np.stack([block_filter(grid, int(j), cutoffs).ravel() ** 2 for j in js])
    M.setflags(write=False)
    return js, M


def _power(grid: SpectralGrid, *coeffs) -> np.ndarray:
    """Parseval density summed over the given coefficient arrays."""
    out = np.zeros(grid.spectral_shape)
    for c in coeffs:
        out += c.real ** 2 + c.imag ** 2
    return grid.area * grid.weights * out


class _Panel:
    """Evaluates ``sum_j 2^{js} ||block_j (m f)||`` from precomputed powers."""

    def __init__(self, grid: SpectralGrid, cfg: DiagnosticsConfig):
        self.grid = grid
        self.js, self.M = _block_matrix(grid, cfg.cutoffs)
        self.low2 = (low_filter(grid, cfg.j0, cfg.cutoffs) ** 2).ravel()
        self.high2 = (high_filter(grid, cfg.j0, cfg.cutoffs) ** 2).ravel()

    def block_norms(self, power: np.ndarray, part: str | None = None) -> np.ndarray:
        p = power.ravel()
        if part == "low":
            p = p * self.low2
        elif part == "high":
            p = p * self.high2
        return np.sqrt(np.maximum(self.M @ p, 0.0))

    def norm(self, power, s, part=None) -> float:
        return float(np.sum(2.0 ** (s * self.js) * self.block_norms(power, part)))


def energy_functional_Lk(phi: ScalarField, d: ScalarField, j: int,
                         cutoffs: CutoffPair = DEFAULT_CUTOFFS) -> float:
    """3 ||phi_j||^2 + 9 ||d_j||^2 - <d_j, Lambda phi_j> + (2/3) ||Lambda phi_j||^2."""
    g = phi.grid
    w = g.area * g.weights * block_filter(g, j, cutoffs) ** 2
    ph, dh = phi.coeffs, d.coeffs
    lam_ph = g.kmag * ph
    n_phi = np.sum(w * np.abs(ph) ** 2)
    n_d = np.sum(w * np.abs(dh) ** 2)
    cross = np.sum(w * (dh * np.conj(lam_ph)).real)
    n_lphi = np.sum(w * np.abs(lam_ph) ** 2)
    return float(3.0 * n_phi + 9.0 * n_d - cross + (2.0 / 3.0) * n_lphi)


def conservation_report(state: PerturbationState) -> dict:
    return {
        "a": state.a.integral(),
        "b": state.b.integral(),
        "min_rho": float(np.min(1.0 + state.a.values)),
    }


def negative_index_panel(state: PerturbationState, phi: ScalarField, sigma: float,
                         j0: int = 0, cutoffs: CutoffPair = DEFAULT_CUTOFFS) -> dict:
    """Negative-index semi-norms of a, b, phi and u (per component and as a vector)."""
    if not (0 < sigma <= 1):
        raise ValueError(f"sigma must lie in (0, 1], got {sigma!r}")
    return {
        "a": negative_index_seminorm(state.a, sigma, j0, cutoffs),
        "b": negative_index_seminorm(state.b, sigma, j0, cutoffs),
        "phi": negative_index_seminorm(phi, sigma, j0, cutoffs),
        "u1": negative_index_seminorm(state.u.u1, sigma, j0, cutoffs),
        "u2": negative_index_seminorm(state.u.u2, sigma, j0, cutoffs),
        "u": negative_index_seminorm(state.u, sigma, j0, cutoffs),
    }


def lyapunov_functional(record: DiagnosticsRecord) -> float:
    p = record.besov_panel
    return p["low_phi_u_B0"] + p["high_phi_B1"] + p["high_u_B0"]


def compute_record(state: PerturbationState, params: PhysicalParams = PhysicalParams(),
                   cfg: DiagnosticsConfig = DiagnosticsConfig(),
                   phi: ScalarField | None = None) -> DiagnosticsRecord:
    """Instantaneous panel for one state (X_t is filled in by the accumulator)."""
    g = state.grid
    if phi is None:
        phi = compute_phi(state, params)
    uhat = state.u.coeffs
    p_hat, q_hat = project_coeffs(g, uhat)
    ahat, bhat, phihat = state.a.coeffs, state.b.coeffs, phi.coeffs

    P_a = _power(g, ahat)
    P_b = _power(g, bhat)
    P_phi = _power(g, phihat)
    P_u = _power(g, uhat[0], uhat[1])
    P_Pu = _power(g, p_hat[0], p_hat[1])
    P_Qu = _power(g, q_hat[0], q_hat[1])

    pan = _Panel(g, cfg)
    N = pan.norm
    panel = {
        "low_phi_u_B0": N(P_phi, 0, "low") + N(P_u, 0, "low"),
        "high_phi_B1": N(P_phi, 1, "high"),
        "high_u_B0": N(P_u, 0, "high"),
        "low_phi_u_B2": N(P_phi, 2, "low") + N(P_u, 2, "low"),
        "high_u_B2": N(P_u, 2, "high"),
        "low_a_Qu_b_B0": N(P_a, 0, "low") + N(P_Qu, 0, "low") + N(P_b, 0, "low"),
        "high_a_b_B1": N(P_a, 1, "high") + N(P_b, 1, "high"),
        "Pu_Quh_B0": N(P_Pu, 0) + N(P_Qu, 0, "high"),
        "low_phi_Qu_B2": N(P_phi, 2, "low") + N(P_Qu, 2, "low"),
        "Pu_Quh_B2": N(P_Pu, 2) + N(P_Qu, 2, "high"),
    }

    def l2(P):
        return math.sqrt(float(np.sum(P)) - float(P[0, 0]))

    nz = g.kmag > 0
    lam_g = np.zeros(g.spectral_shape)
    lam_g[nz] = g.kmag[nz] ** (2.0 * cfg.gamma1)
    panel["lambda_gamma1_phi"] = math.sqrt(float(np.sum(lam_g * P_phi)))
    panel["lambda_gamma1_u"] = math.sqrt(float(np.sum(lam_g * P_u)))
    panel["lambda_gamma1_phi_u"] = panel["lambda_gamma1_phi"] + panel["lambda_gamma1_u"]

    lo = low_filter(g, cfg.j0, cfg.cutoffs)
    phi_low = ScalarField(g, coeffs=lo * phihat)
    d_low = ScalarField(g, coeffs=lo * multiplier_power(g, -1.0) * div_coeffs(g, uhat))
    j_min, _ = grid_block_range(g)
    Lk = {j: energy_functional_Lk(phi_low, d_low, j, cfg.cutoffs) for j in range(j_min, cfg.j0 + 1)}

    rec = DiagnosticsRecord(
        t=float(state.t),
        l2_phi=l2(P_phi), l2_u=l2(P_u), l2_a=l2(P_a), l2_b=l2(P_b),
        besov_panel=panel,
        Lk_table=Lk,
        neg_index=negative_index_panel(state, phi, cfg.sigma, cfg.j0, cfg.cutoffs),
        totals=conservation_report(state),
        lyapunov=0.0,
    )
    rec.lyapunov = lyapunov_functional(rec)
    return rec


@dataclass
class XAccumulator:
    """Running X(t): running maxima of the sup members plus trapezoid
    integrals of the time-integrated members."""

    sup: dict = field(default_factory=lambda: {k: 0.0 for k in X_SUP_TERMS})
    integral: dict = field(default_factory=lambda: {k: 0.0 for k in X_INT_TERMS})
    last: DiagnosticsRecord | None = None

    def update(self, rec: DiagnosticsRecord) -> float:
        p = rec.besov_panel
        for k in X_SUP_TERMS:
            self.sup[k] = max(self.sup[k], p[k])
        if self.last is not None:
            dt = rec.t - self.last.t
            q = self.last.besov_panel
            for k in X_INT_TERMS:
                self.integral[k] += 0.5 * dt * (p[k] + q[k])
        self.last = rec
        rec.X_t = self.value
        return rec.X_t

    @property
    def value(self) -> float:
        return float(sum(self.sup.values()) + sum(self.integral.values()))


def solution_norm_X(record: DiagnosticsRecord | None, history=()) -> float:
    """X(t) at ``record`` from the records in ``history`` (record appended if new)."""
    recs = list(history)
    if record is not None and (not recs or recs[-1] is not record):
        recs.append(record)
    if not recs:
        return 0.0
    acc = XAccumulator()
    for r in recs:
        acc.update(r)
    return acc.value


def initial_X(state: PerturbationState, params: PhysicalParams = PhysicalParams(),
              cfg: DiagnosticsConfig = DiagnosticsConfig()) -> float:
    rec = compute_record(state, params, cfg)
    return float(sum(rec.besov_panel[k] for k in X_SUP_TERMS))


def fit_decay_exponent(t, values, window, quantity: str = "", predicted: float = float("nan"),
                       min_samples: int = 20) -> DecayFit:
    """Least-squares slope of log(value) against log(1 + t) inside ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    t0, t1 = window
    if not (t1 > t0 >= 0):
        raise ValueError(f"bad window {window}")
    sel = (t >= t0) & (t <= t1)
    ts, vs = t[sel], v[sel]
    if ts.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples in window, got {ts.size}")
    if not np.all(vs > 0) or not np.all(np.isfinite(vs)):
        raise ValueError("non-positive or non-finite values in window (noise floor reached?)")
    x = np.log1p(ts)
    y = np.log(vs)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(quantity, (float(t0), float(t1)), float(slope), r2, predicted, int(ts.size))
