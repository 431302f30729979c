import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_scalar, unit_grid
from mhd25.grid_spectral import ScalarField, gradient, l2_norm, make_grid
from mhd25.littlewood_paley import (
    DEFAULT_CUTOFFS,
    BesovSpec,
    CutoffPair,
    besov_norm,
    block_range,
    build_cutoffs,
    dyadic_block,
    grid_block_range,
    low_high_split,
    negative_index_seminorm,
    partition_defect,
)

C = DEFAULT_CUTOFFS
seeds = st.integers(0, 2**32 - 1)


def unit_mode(g, m=1):
    """cos(m x1) scaled to unit L^2 norm."""
    x1, _ = g.coordinates()
    return ScalarField.from_values(g, np.cos(m * x1) * math.sqrt(2.0) / g.box_length)


def test_cutoff_values():
    assert C.chi(0.5) == 1.0
    assert C.chi(0.75) == 1.0
    assert C.chi(2.0) == 0.0
    assert C.chi(4.0 / 3.0) == 0.0
    assert C.phi(1.0) == pytest.approx(1.0 - C.chi(1.0), abs=1e-15)
    total = sum(C.phi(2.0 ** (-j)) for j in range(-40, 41))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_phi_support():
    r = np.geomspace(1e-2, 1e2, 20001)
    ph = C.phi(r)
    assert np.all(ph[(r < 0.75) | (r > 8.0 / 3.0)] == 0.0)
    assert np.all(ph >= 0)


def test_chi_monotone_and_vectorised():
    r = np.linspace(0, 3, 3001)
    c = C.chi(r)
    assert c.shape == r.shape
    assert np.all(np.diff(c) <= 0)


def test_partition_of_unity_profile():
    err, _ = partition_defect(C)
    assert err <= 1e-10


def test_partition_defect_detects_distortion():
    err, radius = partition_defect(build_cutoffs(distortion=0.05))
    assert err > 1e-3
    assert radius > 0


def test_unknown_profile():
    with pytest.raises(ValueError):
        build_cutoffs("linear")


def test_block_range():
    assert block_range(1.0, 1.0) == (-1, 0)


def test_blocks_of_unit_mode():
    g = unit_grid()
    f = unit_mode(g)
    j0, j1 = grid_block_range(g, dealiased=False)
    for j in range(j0, j1 + 1):
        n = l2_norm(dyadic_block(f, j))
        if j in (-1, 0):
            assert n > 0
        else:
            assert n <= 1e-14
    assert l2_norm(dyadic_block(ScalarField.constant(g, 2.0), 0)) == 0.0


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_blocks_sum_to_field(seed):
    g = make_grid(32, 2 * math.pi * 4)
    f = random_scalar(g, np.random.default_rng(seed), 0.5)
    j0, j1 = grid_block_range(g, dealiased=False)
    total = sum(dyadic_block(f, j).coeffs for j in range(j0, j1 + 1))
    assert np.max(np.abs(total - f.coeffs)) <= 1e-10 * np.max(np.abs(f.coeffs))


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_bernstein_bracket(seed):
    g = make_grid(64, 2 * math.pi * 8)
    f = random_scalar(g, np.random.default_rng(seed), 1.0 / 3.0)
    j0, j1 = grid_block_range(g)
    for j in range(j0, j1 + 1):
        fj = dyadic_block(f, j)
        nj = l2_norm(fj)
        if nj <= 1e-14 * l2_norm(f):
            continue
        ratio = l2_norm(gradient(fj)) / nj
        assert 0.75 * 2.0 ** j * (1 - 1e-12) <= ratio <= (8.0 / 3.0) * 2.0 ** j * (1 + 1e-12)


def test_block_almost_orthogonality():
    g = make_grid(64, 2 * math.pi * 8)
    f = random_scalar(g, np.random.default_rng(0), 0.5)
    j0, j1 = grid_block_range(g, dealiased=False)
    for j in range(j0, j1 + 1):
        for k in range(j + 2, j1 + 1):
            assert l2_norm(dyadic_block(dyadic_block(f, j), k)) == 0.0


def test_besov_norm_unit_mode():
    g = unit_grid()
    f = unit_mode(g)
    assert besov_norm(f, BesovSpec.for_grid(g, 0.0)) == pytest.approx(1.0, abs=1e-10)
    expected = 0.5 * C.phi(2.0) + C.phi(1.0)
    assert besov_norm(f, BesovSpec.for_grid(g, 1.0)) == pytest.approx(expected, rel=1e-12)
    assert besov_norm(ScalarField.zeros(g), BesovSpec.for_grid(g, 0.5)) == 0.0


@given(seeds, st.floats(-1.0, 2.0))
@settings(max_examples=20, deadline=None)
def test_norm_monotone_in_r(seed, s):
    g = make_grid(32, 2 * math.pi * 4)
    f = random_scalar(g, np.random.default_rng(seed))
    one = besov_norm(f, BesovSpec.for_grid(g, s, r=1.0))
    sup = besov_norm(f, BesovSpec.for_grid(g, s, r=math.inf))
    assert one >= sup * (1 - 1e-12)


def test_quadrature_p2_matches_parseval():
    g = make_grid(32, 2 * math.pi * 2)
    f = random_scalar(g, np.random.default_rng(3))
    spec = BesovSpec.for_grid(g, 0.5)
    from mhd25.littlewood_paley import block_norms
    a = block_norms(f, spec.blocks(g), p=2)
    # the quadrature route: evaluate the L^2 norm from samples of each block
    b = np.array([math.sqrt(np.sum(dyadic_block(f, j).values ** 2) * g.dx ** 2) for j in spec.blocks(g)])
    assert np.allclose(a, b, rtol=1e-10, atol=1e-14)


def test_low_high_split():
    g = make_grid(64, 2 * math.pi * 4)
    x1, x2 = g.coordinates()
    low_only = ScalarField.from_values(g, np.cos(x1 / 4))  # |xi| = 1/4, below the j = -1 band
    lo, hi = low_high_split(low_only, 0)
    assert l2_norm(hi) <= 1e-14 * l2_norm(low_only)
    assert l2_norm(lo - low_only) <= 1e-12 * l2_norm(low_only)
    high_only = ScalarField.from_values(g, np.cos(7 * x2))  # |xi| = 7, above 8/3
    lo, hi = low_high_split(high_only, 0)
    assert l2_norm(lo) <= 1e-14 * l2_norm(high_only)
    assert l2_norm(hi - high_only) <= 1e-12 * l2_norm(high_only)


@given(seeds, st.integers(-3, 2))
@settings(max_examples=20, deadline=None)
def test_low_high_overlap_identity(seed, j0):
    g = make_grid(32, 2 * math.pi * 8)
    f = random_scalar(g, np.random.default_rng(seed), 0.5)
    lo, hi = low_high_split(f, j0)
    overlap = dyadic_block(f, j0 - 1).coeffs + dyadic_block(f, j0).coeffs
    resid = lo.coeffs + hi.coeffs - overlap - f.coeffs
    assert np.max(np.abs(resid)) <= 1e-10 * np.max(np.abs(f.coeffs))


def test_negative_index_examples():
    g = unit_grid()
    assert negative_index_seminorm(ScalarField.zeros(g), 1.0) == 0.0
    f = unit_mode(g)
    expected = max(2.0 * C.phi(2.0), C.phi(1.0))
    assert negative_index_seminorm(f, 1.0) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        negative_index_seminorm(f, 1.5)


def test_negative_index_flat_profile():
    """|f_hat|^2 ~ |xi|^(2 sigma - 2) per lattice point makes 2^{-j sigma}||f_j|| flat."""
    g = make_grid(256, 256.0)
    sigma = 1.0
    rng = np.random.default_rng(0)
    c = np.zeros(g.spectral_shape, dtype=complex)
    sel = (g.kmag > 0) & g.dealias_mask
    c[sel] = g.kmag[sel] ** (sigma - 1) * np.exp(2j * np.pi * rng.random(sel.sum()))
    f = ScalarField(g, coeffs=g.forward(g.inverse(c)))
    jmin, _ = grid_block_range(g)
    from mhd25.littlewood_paley import block_norms
    js = np.arange(jmin + 3, 1)
    vals = 2.0 ** (-sigma * js) * block_norms(f, js)
    assert vals.max() / vals.min() < 1.3


def test_cutoffs_are_hashable_and_distinct():
    assert CutoffPair() == DEFAULT_CUTOFFS
    assert CutoffPair(distortion=0.1) != DEFAULT_CUTOFFS
