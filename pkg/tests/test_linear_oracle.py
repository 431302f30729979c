import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_state, unit_grid
from mhd25.grid_spectral import ScalarField, VectorField, l2_norm, make_grid
from mhd25.linear_oracle import (
    acoustic_eigenvalues,
    evolve_linear_exact,
    matrix_exponential,
    spectrum_table,
    symbol_matrix,
)
from mhd25.state_model import PerturbationState, PhysicalParams, compute_d

P = PhysicalParams()


def test_eigenvalues_at_one():
    fast, slow = acoustic_eigenvalues(1.0)
    assert {complex(round(z.real, 12), round(abs(z.imag), 12)) for z in (fast, slow)} == \
        {complex(-1.0, round(math.sqrt(2), 12))}
    assert fast.imag == pytest.approx(-slow.imag)


def test_eigenvalues_low_frequency_heat_like():
    fast, slow = acoustic_eigenvalues(0.05)
    assert fast.real == pytest.approx(-0.0025, abs=1e-6)
    assert slow.real == pytest.approx(-0.0025, abs=1e-6)


def test_slow_root_at_eight():
    fast, slow = acoustic_eigenvalues(8.0)
    expected = -64.0 + math.sqrt(4096.0 - 192.0)
    assert slow.real == pytest.approx(expected, rel=1e-12)
    assert slow.real == pytest.approx(-1.5180, abs=1e-3)
    assert slow.imag == 0 and fast.real < -120


def test_eigenvalues_match_numpy():
    for r in np.geomspace(1e-3, 1e3, 31):
        ev = np.linalg.eigvals(symbol_matrix(r).mat2)
        for z in acoustic_eigenvalues(r):
            assert np.min(np.abs(ev - z)) <= 1e-9 * max(1.0, abs(z))


def test_spectral_abscissa_negative():
    r = np.geomspace(1e-3, 1e3, 121)
    fast, slow = acoustic_eigenvalues(r)
    assert np.all(fast.real < 0) and np.all(slow.real < 0)


def test_mat3_kernel_and_eigenvalues():
    w = np.array([1.0, 0.0, -1.0])
    for r in np.geomspace(1e-3, 1e3, 31):
        M = symbol_matrix(r).mat3
        assert np.max(np.abs(w @ M)) <= 1e-10 * np.max(np.abs(M))
        ev = np.linalg.eigvals(M)
        assert np.sum(np.abs(ev) <= 1e-10 * np.max(np.abs(M))) == 1


def test_matrix_exponential_examples():
    assert np.allclose(matrix_exponential(np.zeros((3, 3))), np.eye(3), atol=0)
    E = matrix_exponential(np.diag([-1.0, -2.0]), 1.0)
    assert np.allclose(E, np.diag([math.exp(-1), math.exp(-2)]), rtol=1e-14, atol=1e-16)


def test_matrix_exponential_two_routes():
    """Pade (library) against eigen-reconstruction and a Taylor series."""
    M = symbol_matrix(1.0).mat2
    E = matrix_exponential(M, 1.0)
    lam, V = np.linalg.eig(M)
    E_eig = (V @ np.diag(np.exp(lam)) @ np.linalg.inv(V)).real
    term, E_ser = np.eye(2), np.eye(2)
    for k in range(1, 60):
        term = term @ M / k
        E_ser = E_ser + term
    assert np.max(np.abs(E - E_eig)) <= 1e-12
    assert np.max(np.abs(E - E_ser)) <= 1e-12


def test_matrix_exponential_rejects_large():
    with pytest.raises(ValueError):
        matrix_exponential(np.zeros((5, 5)))


def test_evolve_identity_and_semigroup():
    g = make_grid(32, 2 * math.pi * 2)
    s0 = random_state(g, np.random.default_rng(0), 1e-2)
    same = evolve_linear_exact(s0, 0.0)
    assert np.max(np.abs(same.stacked() - s0.stacked())) <= 1e-15
    a = evolve_linear_exact(evolve_linear_exact(s0, 0.3), 0.45)
    b = evolve_linear_exact(s0, 0.75)
    ref = np.sqrt(np.sum(np.abs(b.stacked()) ** 2))
    assert np.sqrt(np.sum(np.abs(a.stacked() - b.stacked()) ** 2)) <= 1e-10 * ref
    assert b.t == pytest.approx(0.75)


def test_a_minus_b_is_frozen():
    g = unit_grid()
    rng = np.random.default_rng(1)
    s0 = random_state(g, rng, 1e-2)
    s0 = PerturbationState(s0.a, VectorField.zeros(g), s0.a)  # b = a, d = 0
    for t in (0.1, 1.0, 5.0):
        s = evolve_linear_exact(s0, t)
        assert l2_norm(s.a - s.b) <= 1e-12 * l2_norm(s0.a)
    s1 = random_state(g, rng, 1e-2)
    diff0 = s1.a - s1.b
    s = evolve_linear_exact(s1, 2.0)
    assert l2_norm((s.a - s.b) - diff0) <= 1e-12 * l2_norm(diff0)


def test_single_mode_against_closed_form():
    """phi = 2a + b and d at one wavevector from the 2x2 eigen-solution."""
    g = make_grid(16, 2 * math.pi)
    x1, _ = g.coordinates()
    r = 3.0
    s0 = PerturbationState(ScalarField.from_values(g, 0.01 * np.cos(r * x1)), VectorField.zeros(g),
                           ScalarField.from_values(g, 0.01 * np.cos(r * x1)))
    t = 0.4
    s = evolve_linear_exact(s0, t)
    M = symbol_matrix(r).mat2
    lam, V = np.linalg.eig(M)
    y = (V @ np.diag(np.exp(lam * t)) @ np.linalg.inv(V) @ np.array([0.03, 0.0])).real
    phi_lin = (2.0 * s.a + s.b).values
    assert np.max(np.abs(phi_lin - y[0] * np.cos(r * x1))) <= 1e-14
    assert np.max(np.abs(compute_d(s.u).values - y[1] * np.cos(r * x1))) <= 1e-14


def test_solenoidal_heat_decay():
    g = unit_grid()
    x1, x2 = g.coordinates()
    u = VectorField.from_values(g, np.zeros(g.shape), np.cos(2 * x1))
    s = evolve_linear_exact(PerturbationState(ScalarField.zeros(g), u, ScalarField.zeros(g)), 0.5)
    assert np.max(np.abs(s.u.values[1] - math.exp(-4 * 0.5) * np.cos(2 * x1))) <= 1e-14


@given(st.floats(0.05, 20.0))
@settings(max_examples=30, deadline=None)
def test_eventual_monotone_decay(r):
    """||(phi, d)|| per mode is non-increasing once t exceeds a few 1/|Re lam|."""
    M = symbol_matrix(r).mat2
    fast, slow = acoustic_eigenvalues(r)
    rate = min(abs(fast.real), abs(slow.real))
    t0 = 3.0 / rate
    ts = t0 + np.linspace(0, 5.0 / rate, 60)
    y0 = np.array([1.0, 0.3])
    norms = []
    for t in ts:
        y = matrix_exponential(M, t) @ y0
        # energy weight 1/c2 on phi symmetrises the skew part
        norms.append(math.sqrt(y[0] ** 2 / P.sound_speed_sq + y[1] ** 2))
    assert np.all(np.diff(norms) <= 1e-12 * norms[0])


def test_spectrum_table_columns():
    rows = spectrum_table([1.0, 8.0])
    assert rows.shape == (2, 6)
    assert rows[1, 3] == pytest.approx(-1.518003, abs=1e-6)
    assert rows[0, 5] == -1.0


def test_symbol_rejects_zero():
    with pytest.raises(ValueError):
        symbol_matrix(0.0)
    with pytest.raises(ValueError):
        acoustic_eigenvalues(0.0)
