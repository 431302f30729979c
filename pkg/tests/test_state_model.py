import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_scalar, random_state, random_vector, unit_grid
from mhd25.grid_spectral import ScalarField, VectorField, gradient, helmholtz_project, l2_norm, make_grid
from mhd25.state_model import (
    PerturbationState,
    PhysicalParams,
    StateValidityError,
    compute_d,
    compute_delta,
    compute_derived,
    compute_effective_velocity,
    compute_phi,
    potential_from_d,
    rational_a,
    to_perturbation,
    to_primitive,
    validate_state,
)

seeds = st.integers(0, 2**32 - 1)


def uniform_state(g, a, b):
    return PerturbationState(ScalarField.constant(g, a), VectorField.zeros(g), ScalarField.constant(g, b))


def test_params_defaults_and_validation():
    p = PhysicalParams()
    assert p.nu == 2.0 and p.sound_speed_sq == 3.0 and p.is_reference
    for bad in (dict(mu=0), dict(lam=-3), dict(A=0), dict(gamma=0.5)):
        with pytest.raises(ValueError):
            PhysicalParams(**bad)


def test_phi_examples():
    g = unit_grid(16)
    assert np.all(compute_phi(PerturbationState.equilibrium(g)).values == 0)
    phi = compute_phi(uniform_state(g, 0.1, 0.2))
    assert np.allclose(phi.values, 0.43, atol=1e-15)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_phi_polynomial_identity(seed):
    rng = np.random.default_rng(seed)
    g = unit_grid(16)
    a = 0.4 * (2 * rng.random(g.shape) - 1)
    b = 0.4 * (2 * rng.random(g.shape) - 1)
    st_ = PerturbationState(ScalarField.from_values(g, a), VectorField.zeros(g), ScalarField.from_values(g, b))
    assert np.max(np.abs(compute_phi(st_).values - (a * a + 2 * a + 0.5 * b * b + b))) <= 1e-12


def test_phi_general_gamma_matches_primitive():
    rng = np.random.default_rng(0)
    g = unit_grid(16)
    p = PhysicalParams(A=0.7, gamma=1.4)
    a = 0.3 * (2 * rng.random(g.shape) - 1)
    b = 0.3 * (2 * rng.random(g.shape) - 1)
    s = PerturbationState(ScalarField.from_values(g, a), VectorField.zeros(g), ScalarField.from_values(g, b))
    rho, _, _, m = to_primitive(s)
    prim = p.A * rho ** p.gamma + 0.5 * m ** 2 - (p.A + 0.5)
    assert np.max(np.abs(compute_phi(s, p).values - prim)) <= 1e-13


def test_d_examples():
    g = unit_grid()
    rng = np.random.default_rng(1)
    v = gradient(random_scalar(g, rng))
    sol = VectorField(-v.u2, v.u1)
    assert l2_norm(compute_d(sol)) <= 1e-12 * l2_norm(sol)
    x1, _ = g.coordinates()
    psi = ScalarField.from_values(g, np.sin(x1))
    d = compute_d(gradient(psi))
    assert np.max(np.abs(d.values + np.sin(x1))) < 1e-12


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_d_preserves_potential_norm(seed):
    g = make_grid(32, 5.0)
    u = random_vector(g, np.random.default_rng(seed), 0.5)
    _, Q = helmholtz_project(u)
    d = compute_d(u)
    assert l2_norm(d) == pytest.approx(l2_norm(Q), rel=1e-10)
    assert l2_norm(potential_from_d(d) - Q) <= 1e-10 * l2_norm(Q)


def test_effective_velocity_examples():
    g = unit_grid()
    rng = np.random.default_rng(2)
    u = random_vector(g, rng)
    _, Q = helmholtz_project(u)
    G = compute_effective_velocity(u, ScalarField.zeros(g))
    assert l2_norm(G - Q) <= 1e-14 * l2_norm(Q)
    x1, _ = g.coordinates()
    G = compute_effective_velocity(VectorField.zeros(g), ScalarField.from_values(g, np.sin(x1)))
    assert np.max(np.abs(G.values[0] - 0.5 * np.cos(x1))) < 1e-12
    assert np.max(np.abs(G.values[1])) < 1e-12
    G = compute_effective_velocity(u, random_scalar(g, rng))
    P, _ = helmholtz_project(G)
    assert l2_norm(P) <= 1e-10 * l2_norm(G)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_effective_velocity_linear(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(32, 6.0)
    u1, u2 = random_vector(g, rng), random_vector(g, rng)
    p1, p2 = random_scalar(g, rng), random_scalar(g, rng)
    lhs = compute_effective_velocity(u1 + 2.0 * u2, p1 + 2.0 * p2)
    rhs = compute_effective_velocity(u1, p1) + 2.0 * compute_effective_velocity(u2, p2)
    assert l2_norm(lhs - rhs) <= 1e-12 * l2_norm(lhs)


def test_effective_velocity_ignores_phi_mean():
    g = unit_grid()
    rng = np.random.default_rng(3)
    u, p = random_vector(g, rng), random_scalar(g, rng)
    G1 = compute_effective_velocity(u, p)
    G2 = compute_effective_velocity(u, p + 0.3)
    assert l2_norm(G1 - G2) == 0.0


def test_delta_examples():
    g = unit_grid(16)
    z = ScalarField.zeros(g)
    assert np.all(compute_delta(z, z).values == 0)
    s = uniform_state(g, 0.1, 0.2)
    assert np.allclose(compute_delta(compute_phi(s), s.a).values, 0.13, atol=1e-15)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_delta_reconstruction(seed):
    g = unit_grid(16)
    s = random_state(g, np.random.default_rng(seed), 0.3)
    phi = compute_phi(s)
    delta = compute_delta(phi, s.a)
    assert np.max(np.abs((phi.values - delta.values) / 3 - s.a.values)) <= 1e-12


def test_rational_a():
    g = unit_grid(16)
    assert np.all(rational_a(ScalarField.zeros(g)).values == 0)
    assert np.allclose(rational_a(ScalarField.constant(g, 0.5)).values, 1 / 3, atol=1e-15)
    with pytest.raises(StateValidityError):
        rational_a(ScalarField.constant(g, -0.6))


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_rational_a_identity(seed):
    g = unit_grid(16)
    a = 0.4 * (2 * np.random.default_rng(seed).random(g.shape) - 1)
    Ia = rational_a(ScalarField.from_values(g, a)).values
    assert np.max(np.abs(Ia + a * Ia - a)) <= 1e-12


def test_validate_state():
    g = unit_grid(16)
    assert validate_state(PerturbationState.equilibrium(g)).ok
    a = np.zeros(g.shape)
    a[3, 4] = -0.6
    bad = PerturbationState(ScalarField.from_values(g, a), VectorField.zeros(g), ScalarField.zeros(g))
    rep = validate_state(bad)
    assert not rep.ok and rep.finite and "sup|a|" in rep.describe()
    a[3, 4] = np.nan
    bad = PerturbationState(ScalarField.from_values(g, a), VectorField.zeros(g), ScalarField.zeros(g))
    rep = validate_state(bad)
    assert not rep.ok and not rep.finite and "non-finite" in rep.describe()


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_primitive_round_trip(seed):
    g = unit_grid(16)
    s = random_state(g, np.random.default_rng(seed), 0.3)
    rho, u1, u2, m = to_primitive(s)
    back = to_perturbation(rho, u1, u2, m, g)
    for k in ("a", "b"):
        assert np.max(np.abs(getattr(back, k).values - getattr(s, k).values)) <= 1e-14
    assert np.max(np.abs(back.u.values - s.u.values)) <= 1e-14


def test_derived_fields_vanish_at_equilibrium():
    g = unit_grid(16)
    der = compute_derived(PerturbationState.equilibrium(g))
    for f in (der.phi, der.d, der.delta, der.Ia):
        assert np.all(f.values == 0)
    assert np.all(der.G.values == 0)


def test_state_grid_mismatch():
    with pytest.raises(ValueError):
        PerturbationState(ScalarField.zeros(unit_grid(16)), VectorField.zeros(unit_grid(32)),
                          ScalarField.zeros(unit_grid(16)))


def test_stacked_round_trip():
    g = unit_grid(16)
    s = random_state(g, np.random.default_rng(4))
    s2 = PerturbationState.from_stacked(g, s.stacked(), 1.5)
    assert np.array_equal(s2.stacked(), s.stacked()) and s2.t == 1.5
    assert s.with_time(2.0).t == 2.0 and math.isclose(s.t, 0.0)
