import math
import warnings

import numpy as np
import pytest

from helpers import random_scalar, unit_grid
from mhd25.grid_spectral import ScalarField, VectorField, gradient, l2_norm, make_grid
from mhd25.initial_data import random_spectrum, single_mode
from mhd25.state_model import PerturbationState, PhysicalParams, StateValidityError
from mhd25.time_integrator import (
    IntegrationError,
    StepControl,
    Stepper,
    compute_dt,
    integrate,
    run_to,
    step,
)

P = PhysicalParams()


def test_dt_at_equilibrium():
    g = make_grid(64, 2 * math.pi)
    dt = compute_dt(PerturbationState.equilibrium(g), P, StepControl(1.0))
    assert dt == pytest.approx(0.4 * (2 * math.pi / 64) / math.sqrt(3.0), rel=1e-12)
    assert dt == pytest.approx(0.022672, abs=1e-6)
    assert compute_dt(PerturbationState.equilibrium(g), P, StepControl(1.0, dt_max=1e-4)) == 1e-4


def test_dt_scales_with_velocity():
    g = make_grid(32, 2 * math.pi)
    x1, _ = g.coordinates()

    def dt_for(U):
        u = VectorField.from_values(g, U * np.cos(x1), np.zeros(g.shape))
        return compute_dt(PerturbationState(ScalarField.zeros(g), u, ScalarField.zeros(g)), P, StepControl(1.0))

    assert dt_for(2e4) / dt_for(1e4) == pytest.approx(0.5, rel=1e-3)


def test_step_control_validation():
    for bad in (dict(cfl_advective=0), dict(cfl_advective=1.5), dict(dt_max=0), dict(scheme="euler")):
        with pytest.raises(ValueError):
            StepControl(1.0, **bad)


def test_equilibrium_is_fixed():
    g = unit_grid()
    eq = PerturbationState.equilibrium(g)
    s = step(eq, 0.01, P)
    assert np.all(s.stacked() == 0) and s.t == 0.01
    st = Stepper(g, P)
    Y = eq.stacked()
    for _ in range(1000):
        Y = st.step(Y, 0.02)
    assert np.all(Y == 0)


def test_solenoidal_mode_decays_like_heat():
    g = make_grid(32, 2 * math.pi)
    s0 = single_mode(g, 1e-8, (2, 1), "solenoidal").state()
    s1, _ = run_to(s0, P, StepControl(1.0))
    expect = 1e-8 * math.exp(-P.mu * 5.0)
    assert l2_norm(s1.u) == pytest.approx(expect, rel=1e-6)
    assert l2_norm(s1.a) < 1e-20


def test_solenoidal_norm_decreases_every_step():
    g = make_grid(32, 2 * math.pi * 2)
    rng = np.random.default_rng(0)
    v = gradient(random_scalar(g, rng, scale=1e-8))
    s = PerturbationState(ScalarField.zeros(g), VectorField(-v.u2, v.u1), ScalarField.zeros(g))
    prev = l2_norm(s.u)
    ctl = StepControl(1.0)
    for _ in range(40):
        s = step(s, compute_dt(s, P, ctl), P, ctl)
        cur = l2_norm(s.u)
        assert cur < prev
        prev = cur


def _fixed_run(g, Y, h, t_end, scheme):
    st = Stepper(g, P, scheme)
    for _ in range(int(round(t_end / h))):
        Y = st.step(Y, h)
    return Y


@pytest.mark.parametrize("scheme,order", [("if_ssprk3", 2.7), ("if_rk2", 1.8)])
def test_self_convergence(scheme, order):
    g = make_grid(32, 2 * math.pi * 2)
    s0 = random_spectrum(g, 0.05, k_cut=1.0, seed=3).state()
    Y0 = s0.stacked()
    runs = [_fixed_run(g, Y0, h, 0.5, scheme) for h in (0.05, 0.025, 0.0125)]
    e1 = np.sqrt(np.sum(np.abs(runs[0] - runs[1]) ** 2))
    e2 = np.sqrt(np.sum(np.abs(runs[1] - runs[2]) ** 2))
    assert math.log2(e1 / e2) >= order


def test_stiff_modes_stay_bounded():
    """High potential modes with nu |xi|^2 dt >> 1 must not be amplified."""
    g = make_grid(32, 2 * math.pi)
    s0 = single_mode(g, 1e-6, (10, 0), "compressible").state()
    s1, n = run_to(s0, P, StepControl(2.0))
    assert l2_norm(s1.u) < l2_norm(s0.u) and n > 10


def test_mass_conservation_mean_free():
    g = make_grid(32, 2 * math.pi * 2)
    s0 = random_spectrum(g, 1e-2, k_cut=1.5, seed=4).state()
    st = Stepper(g, P)
    Y = s0.stacked()
    for _ in range(100):
        Y = st.step(Y, 0.05)
    assert abs(Y[0, 0, 0]) * g.area <= 1e-12 and abs(Y[3, 0, 0]) * g.area <= 1e-12


def test_integrate_records():
    g = make_grid(32, 2 * math.pi * 2)
    s0 = random_spectrum(g, 1e-3, seed=5).state()
    ctl = StepControl(0.7)
    out = list(integrate(s0, P, ctl, observer_stride=3))
    ts = [rec.t for _, rec in out]
    assert ts[0] == 0.0 and ts[-1] == 0.7
    assert all(b > a for a, b in zip(ts, ts[1:]))
    only = list(integrate(s0, P, StepControl(0.0)))
    assert len(only) == 1 and only[0][1].t == 0.0
    with pytest.raises(ValueError):
        list(integrate(s0.with_time(1.0), P, StepControl(0.5)))


def test_integrate_with_passenger_returns_pair():
    g = make_grid(32, 2 * math.pi * 2)
    s0 = random_spectrum(g, 1e-3, seed=6).state()
    (st, extra), n = run_to(s0, P, StepControl(0.2), passenger=ScalarField.zeros(g))
    assert isinstance(extra, ScalarField) and n >= 1


def test_gate_trip_reports_last_valid_time():
    g = make_grid(32, 2 * math.pi)
    x1, _ = g.coordinates()
    a = ScalarField.from_values(g, 0.45 * np.cos(x1))
    u = VectorField.from_values(g, -3.0 * np.sin(x1), np.zeros(g.shape))
    s0 = PerturbationState(a, u, ScalarField.zeros(g))
    with pytest.raises(IntegrationError) as err:
        list(integrate(s0, P, StepControl(2.0)))
    assert err.value.t_last_valid is not None and 0 <= err.value.t_last_valid < 2.0
    with pytest.raises(IntegrationError):
        run_to(s0, P, StepControl(2.0))


def test_initial_invalid_state():
    g = unit_grid(16)
    s = PerturbationState(ScalarField.constant(g, -0.6), VectorField.zeros(g), ScalarField.zeros(g))
    with pytest.raises(IntegrationError) as err:
        next(integrate(s, P, StepControl(1.0)))
    assert err.value.t_last_valid is None
    with pytest.raises(StateValidityError):
        step(s, 0.01, P)


def test_step_warns_above_cfl():
    g = unit_grid(16)
    s = random_spectrum(g, 1e-4, seed=1).state()
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        step(s, 1.0, P, StepControl(1.0))
    assert any("CFL" in str(x.message) for x in w)


def test_final_step_lands_on_t_end():
    g = unit_grid(16)
    s0 = random_spectrum(g, 1e-4, seed=2).state()
    s1, n = run_to(s0, P, StepControl(0.123456))
    assert s1.t == 0.123456
