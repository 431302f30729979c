"""Time stepping with an exact integrating factor for the viscous operator.

The viscous part of the momentum equation is diagonal after the Helmholtz
split: exp(-mu |xi|^2 h) on the solenoidal part and exp(-nu |xi|^2 h) on the
potential part.  With E(h) that semigroup acting on u (identity on a, b) and
N the remaining tendency, an explicit Runge-Kutta tableau (A, b, c) becomes

    Y_i = E(c_i h) Y0 + h sum_j a_ij E((c_i - c_j) h) N(Y_j)
    Y'  = E(h) Y0 + h sum_j b_j E((1 - c_j) h) N(Y_j)

The usual Shu-Osher SSP(3,3) tableau has abscissas (0, 1, 1/2) and so needs
E(-h/2), which amplifies stiff potential modes by exp(nu |xi|^2 h / 2).  The
default scheme instead uses a three-stage third-order tableau with
nonnegative coefficients and nondecreasing abscissas (SSP coefficient about
0.73), so every factor above is a contraction.  The second-order scheme is
Heun's method in the same variables.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .diagnostics import DiagnosticsConfig, XAccumulator, compute_record
from .grid_spectral import ScalarField, SpectralGrid
from .rhs_nonlinear import nonlinear_tendency
from .state_model import (
    SMALL_A_BOUND,
    PerturbationState,
    PhysicalParams,
    StateValidityError,
    ValidityReport,
)

SCHEMES = ("if_ssprk3", "if_rk2")


def _third_order_tableau(c2: float, c3: float):
    """Three-stage third-order tableau with abscissas (0, c2, c3)."""
    b2 = (3 * c3 - 2) / (6 * c2 * (c3 - c2))
    b3 = (2 - 3 * c2) / (6 * c3 * (c3 - c2))
    a32 = c3 * (c3 - c2) / (c2 * (2 - 3 * c2))
    A = ((), (c2,), (c3 - a32, a32))
    return A, (1 - b2 - b3, b2, b3), (0.0, c2, c3)


TABLEAUS = {
    "if_ssprk3": _third_order_tableau(0.65, 0.672),
    "if_rk2": (((), (1.0,)), (0.5, 0.5), (0.0, 1.0)),
}


class IntegrationError(RuntimeError):
    """Validity gate tripped during a run; carries the last valid time."""

    def __init__(self, message, t_last_valid, report=None):
        super().__init__(message)
        self.t_last_valid = t_last_valid
        self.report = report


@dataclass(frozen=True)
class StepControl:
    t_end: float
    cfl_advective: float = 0.4
    dt_max: float = math.inf
    scheme: str = "if_ssprk3"

    def __post_init__(self):
        if not (0 < self.cfl_advective <= 1):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl_advective}")
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")


class ViscousPropagator:
    """E(h) on stacked coefficient arrays ``[a, u1, u2, b, ...]``."""

    def __init__(self, grid: SpectralGrid, params: PhysicalParams):
        self.grid = grid
        k2 = grid.kmag ** 2
        self.mu_k2 = params.mu * k2
        self.nu_k2 = params.nu * k2
        inv = np.zeros_like(k2)
        np.divide(1.0, k2, out=inv, where=k2 > 0)
        # Q = k k^T / |k|^2 as three independent entries
        self.q11 = grid.k1 * grid.k1 * inv
        self.q12 = grid.k1 * grid.k2 * inv
        self.q22 = grid.k2 * grid.k2 * inv
        self._cache = {}

    def _factors(self, h):
        f = self._cache.get(h)
        if f is None:
            ep = np.exp(-self.mu_k2 * h)
            eq = np.exp(-self.nu_k2 * h)
            diff = eq - ep
            f = (ep + diff * self.q11, diff * self.q12, ep + diff * self.q22)
            if len(self._cache) > 12:
                self._cache.clear()
            self._cache[h] = f
        return f

    def apply(self, Y: np.ndarray, h: float) -> np.ndarray:
        if h == 0:
            return Y.copy()
        m11, m12, m22 = self._factors(h)
        out = Y.copy()
        out[1] = m11 * Y[1] + m12 * Y[2]
        out[2] = m12 * Y[1] + m22 * Y[2]
        return out


def scan_state(grid: SpectralGrid, Y: np.ndarray, params: PhysicalParams):
    """(max |u|, max fast speed, validity report) from one batched transform."""
    a, u1, u2, b = grid.inverse(Y[:4])
    finite = bool(np.all(np.isfinite(a)) and np.all(np.isfinite(b))
                  and np.all(np.isfinite(u1)) and np.all(np.isfinite(u2)))
    if not finite:
        nan = float("nan")
        return nan, nan, ValidityReport(nan, nan, nan, False, False)
    rho = 1.0 + a
    sup_a = float(np.max(np.abs(a)))
    rep = ValidityReport(sup_a, float(np.min(rho)), float(np.max(np.abs(b))), True,
                         sup_a <= SMALL_A_BOUND)
    umax = float(np.sqrt(np.max(u1 * u1 + u2 * u2)))
    if rep.min_rho <= 0:
        return umax, float("inf"), rep
    c2 = params.A * params.gamma * rho ** (params.gamma - 1.0) + (1.0 + b) ** 2 / rho
    return umax, float(np.sqrt(np.max(c2))), rep


def dt_from_speeds(grid, umax, cmax, ctl):
    speed = umax + cmax
    if not speed > 0:
        return ctl.dt_max
    return min(ctl.dt_max, ctl.cfl_advective * grid.dx / speed)


def compute_dt(state: PerturbationState, params: PhysicalParams, ctl: StepControl) -> float:
    umax, cmax, _ = scan_state(state.grid, state.stacked(), params)
    return dt_from_speeds(state.grid, umax, cmax, ctl)


class Stepper:
    """Advances stacked coefficient arrays; optionally carries a passenger
    scalar delta evolved by its own transport law in the same stages."""

    def __init__(self, grid: SpectralGrid, params: PhysicalParams, scheme: str = "if_ssprk3"):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.grid = grid
        self.params = params
        self.scheme = scheme
        self.E = ViscousPropagator(grid, params)

    def _N(self, Y):
        if Y.shape[0] == 4:
            return nonlinear_tendency(self.grid, Y, self.params)
        T, dd = nonlinear_tendency(self.grid, Y[:4], self.params, delta=Y[4])
        return np.concatenate([T, dd[None]])

    def step(self, Y: np.ndarray, h: float) -> np.ndarray:
        E = self.E.apply
        A, b, c = TABLEAUS[self.scheme]
        K = []
        for i in range(len(b)):
            Yi = E(Y, c[i] * h)
            for j, aij in enumerate(A[i]):
                Yi += (h * aij) * E(K[j], (c[i] - c[j]) * h)
            K.append(self._N(Yi))
        out = E(Y, h)
        for j, bj in enumerate(b):
            out += (h * bj) * E(K[j], (1.0 - c[j]) * h)
        return out


def step(state: PerturbationState, dt: float, params: PhysicalParams = PhysicalParams(),
         ctl: StepControl | None = None) -> PerturbationState:
    """One step of size ``dt``; raises StateValidityError if the result is invalid."""
    scheme = ctl.scheme if ctl is not None else "if_ssprk3"
    if ctl is not None:
        dt_ok = compute_dt(state, params, ctl)
        if dt > dt_ok * (1 + 1e-12):
            warnings.warn(f"dt={dt:.4g} exceeds the CFL bound {dt_ok:.4g}", RuntimeWarning,
                          stacklevel=2)
    g = state.grid
    try:
        Y = Stepper(g, params, scheme).step(state.stacked(), dt)
    except StateValidityError as err:
        raise StateValidityError(f"step from t={state.t} failed: {err}", state.t) from err
    _, _, rep = scan_state(g, Y, params)
    if not rep.ok:
        raise StateValidityError(f"state invalid after step to t={state.t + dt}: {rep.describe()}",
                                 state.t, rep)
    return PerturbationState.from_stacked(g, Y, state.t + dt)


def integrate(state0: PerturbationState, params: PhysicalParams, ctl: StepControl,
              observer_stride: int = 1, diag: DiagnosticsConfig | None = None,
              passenger=None):
    """Generator of ``(state, record)`` pairs.

    The first pair is the initial state; afterwards one pair every
    ``observer_stride`` steps and always one at ``t_end`` exactly.  If
    ``passenger`` (a ScalarField) is given, the yielded state is a tuple
    ``(state, passenger_now)``.
    """
    if observer_stride < 1:
        raise ValueError("observer_stride must be >= 1")
    if ctl.t_end < state0.t:
        raise ValueError(f"t_end={ctl.t_end} precedes the initial time {state0.t}")
    diag = diag or DiagnosticsConfig()
    g = state0.grid
    stepper = Stepper(g, params, ctl.scheme)
    acc = XAccumulator()

    Y = state0.stacked()
    if passenger is not None:
        Y = np.concatenate([Y, passenger.coeffs[None]])
    t = float(state0.t)

    def emit(Y, t):
        st = PerturbationState.from_stacked(g, Y[:4], t)
        rec = compute_record(st, params, diag)
        acc.update(rec)
        if passenger is None:
            return st, rec
        return (st, ScalarField(g, coeffs=Y[4])), rec

    umax, cmax, rep = scan_state(g, Y, params)
    if not rep.ok:
        raise IntegrationError(f"initial state invalid: {rep.describe()}", None, rep)
    yield emit(Y, t)

    n = 0
    # tolerance so that round-off never produces a sliver step
    eps_t = 1e-12 * max(1.0, abs(ctl.t_end))
    while t < ctl.t_end - eps_t:
        dt = dt_from_speeds(g, umax, cmax, ctl)
        last = t + dt >= ctl.t_end - eps_t
        if last:
            dt = ctl.t_end - t
        try:
            Ynew = stepper.step(Y, dt)
        except StateValidityError as err:
            raise IntegrationError(f"validity gate tripped in a stage after t={t}: {err}", t) from err
        umax, cmax, rep = scan_state(g, Ynew, params)
        if not rep.ok:
            raise IntegrationError(f"validity gate tripped at t={t + dt}: {rep.describe()}", t, rep)
        Y = Ynew
        t = ctl.t_end if last else t + dt
        n += 1
        if last or n % observer_stride == 0:
            yield emit(Y, t)


def run_to(state0: PerturbationState, params: PhysicalParams, ctl: StepControl,
           passenger=None):
    """Advance to ``ctl.t_end`` without diagnostics; returns the final state
    (and passenger) and the number of steps taken."""
    g = state0.grid
    stepper = Stepper(g, params, ctl.scheme)
    Y = state0.stacked()
    if passenger is not None:
        Y = np.concatenate([Y, passenger.coeffs[None]])
    t = float(state0.t)
    eps_t = 1e-12 * max(1.0, abs(ctl.t_end))
    n = 0
    while t < ctl.t_end - eps_t:
        umax, cmax, rep = scan_state(g, Y, params)
        if not rep.ok:
            raise IntegrationError(f"validity gate tripped at t={t}: {rep.describe()}", t, rep)
        dt = dt_from_speeds(g, umax, cmax, ctl)
        if t + dt >= ctl.t_end - eps_t:
            dt = ctl.t_end - t
            Y = stepper.step(Y, dt)
            t = ctl.t_end
        else:
            Y = stepper.step(Y, dt)
            t += dt
        n += 1
    _, _, rep = scan_state(g, Y, params)
    if not rep.ok:
        raise IntegrationError(f"validity gate tripped at t={t}: {rep.describe()}", t, rep)
    st = PerturbationState.from_stacked(g, Y[:4], t)
    if passenger is None:
        return st, n
    return (st, ScalarField(g, coeffs=Y[4])), n
