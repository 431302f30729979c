"""Periodic-box spectral machinery on a square two-dimensional grid.

Fields live on ``[0, L)^2`` sampled at ``n x n`` points.  Fourier data is
kept in the layout of the real-to-complex transform: coefficient arrays have
shape ``(n, n // 2 + 1)``, axis 0 carries the full ``x1`` lattice and axis 1
the non-negative half of the ``x2`` lattice.  The forward transform divides
by ``n**2`` (so the zero coefficient is the grid mean); the inverse does not
rescale.  That normalization is used everywhere in the package.

Wavenumber convention: the Nyquist component of each axis is given zero
wavenumber in every operator.  Odd derivatives are not representable on that
row/column, and using a single wavevector array keeps identities such as
``div(grad f) == laplacian(f)`` and the Helmholtz orthogonality exact.  The
three modes whose wavevector is then zero (besides the mean) are treated like
the mean by homogeneous operators.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft


def fft_workers() -> int:
    """Worker count for transforms, capped by ``MHD25_THREADS`` if set."""
    env = os.environ.get("MHD25_THREADS")
    cores = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cores))
        except ValueError:
            pass
    return cores


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Square periodic box with its Fourier lattice and 2/3-rule mask.

    Equality and hashing use ``(n_points, box_length)`` only, so two grids
    built from the same parameters are interchangeable.
    """

    n_points: int
    box_length: float
    lattice: tuple = field(init=False, repr=False)
    k1: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)
    kmag: np.ndarray = field(init=False, repr=False)
    kradius: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n_points)
        if not _is_power_of_two(n) or n < 8:
            raise ValueError(f"n_points must be a power of two >= 8, got {self.n_points!r}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive, got {self.box_length!r}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "box_length", float(self.box_length))

        dk = 2.0 * np.pi / self.box_length
        m1 = np.fft.fftfreq(n, 1.0 / n).astype(int)  # -n/2 appears once
        m2 = np.arange(n // 2 + 1)
        m2_signed = np.where(m2 == n // 2, -n // 2, m2)
        lat1 = np.broadcast_to((m1 * dk)[:, None], (n, n // 2 + 1))
        lat2 = np.broadcast_to((m2_signed * dk)[None, :], (n, n // 2 + 1))

        d1 = np.where(np.abs(m1) == n // 2, 0, m1) * dk
        d2 = np.where(m2 == n // 2, 0, m2) * dk
        k1 = np.broadcast_to(d1[:, None], (n, n // 2 + 1)).copy()
        k2 = np.broadcast_to(d2[None, :], (n, n // 2 + 1)).copy()
        kmag = np.hypot(k1, k2)
        # radial filters need the true distance, Nyquist components included
        kradius = np.hypot(lat1, lat2)

        cut = n / 3.0  # (2/3) of the Nyquist index n/2
        mask = (np.abs(m1)[:, None] < cut) & (np.abs(m2_signed)[None, :] < cut)

        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        weights = np.broadcast_to(w[None, :], (n, n // 2 + 1)).copy()

        for arr in (k1, k2, kmag, kradius, mask, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "lattice", (lat1, lat2))
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "kmag", kmag)
        object.__setattr__(self, "kradius", kradius)
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "weights", weights)

    def __eq__(self, other):
        if not isinstance(other, SpectralGrid):
            return NotImplemented
        return (self.n_points, self.box_length) == (other.n_points, other.box_length)

    def __hash__(self):
        return hash((self.n_points, self.box_length))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_points, self.n_points)

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.n_points, self.n_points // 2 + 1)

    @property
    def dx(self) -> float:
        return self.box_length / self.n_points

    @property
    def area(self) -> float:
        return self.box_length ** 2

    @property
    def dk(self) -> float:
        """Lattice spacing, which is also the smallest nonzero |xi|."""
        return 2.0 * np.pi / self.box_length

    @property
    def k_nyquist(self) -> float:
        return np.pi * self.n_points / self.box_length

    @property
    def k_dealias(self) -> float:
        """Per-component cutoff of the 2/3 rule."""
        return 2.0 * self.k_nyquist / 3.0

    @property
    def kmax_dealiased(self) -> float:
        """Largest |xi| admitted by the dealias mask (a corner of the square)."""
        return float(self.kmag[self.dealias_mask].max())

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n_points) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Real samples -> coefficients over the last two axes (divides by n^2)."""
        return scipy.fft.rfft2(values, norm="forward", workers=fft_workers())

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return scipy.fft.irfft2(coeffs, s=self.shape, norm="forward", workers=fft_workers())


def make_grid(n_points: int, box_length: float) -> SpectralGrid:
    return SpectralGrid(n_points, box_length)


class ScalarField:
    """Real scalar field with lazily synchronized sample and Fourier views.

    Instances are treated as immutable; both arrays are flagged read-only.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: SpectralGrid, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("ScalarField needs values or coefficients")
        self.grid = grid
        self._values = None
        self._coeffs = None
        if values is not None:
            values = np.asarray(values, dtype=float)
            if values.shape != grid.shape:
                raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
            values.setflags(write=False)
            self._values = values
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=complex)
            if coeffs.shape != grid.spectral_shape:
                raise ValueError(f"coefficient shape {coeffs.shape} != {grid.spectral_shape}")
            coeffs.setflags(write=False)
            self._coeffs = coeffs

    @classmethod
    def from_values(cls, grid, values):
        return cls(grid, values=np.array(values, dtype=float))

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(grid, coeffs=coeffs)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, coeffs=np.zeros(grid.spectral_shape, dtype=complex))

    @classmethod
    def constant(cls, grid, value):
        c = np.zeros(grid.spectral_shape, dtype=complex)
        c[0, 0] = value
        return cls(grid, coeffs=c)

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            v = self.grid.inverse(self._coeffs)
            v.setflags(write=False)
            self._values = v
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            c = self.grid.forward(self._values)
            c.setflags(write=False)
            self._coeffs = c
        return self._coeffs

    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def integral(self) -> float:
        return self.mean() * self.grid.area

    def mean_free(self) -> "ScalarField":
        c = self.coeffs.copy()
        c[0, 0] = 0.0
        return ScalarField(self.grid, coeffs=c)

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, coeffs=self.coeffs + other.coeffs)
        return ScalarField(self.grid, coeffs=_add_constant(self.coeffs, other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, coeffs=self.coeffs - other.coeffs)
        return ScalarField(self.grid, coeffs=_add_constant(self.coeffs, -other))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return ScalarField(self.grid, coeffs=-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, ScalarField):
            raise TypeError("use pointwise_product for field products")
        return ScalarField(self.grid, coeffs=self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return ScalarField(self.grid, coeffs=self.coeffs / scalar)

    def __repr__(self):
        return f"ScalarField(n={self.grid.n_points}, L={self.grid.box_length:g})"


def _add_constant(coeffs, value):
    c = coeffs.copy()
    c[0, 0] += value
    return c


@dataclass(frozen=True)
class VectorField:
    """Planar vector field; both components share one grid."""

    u1: ScalarField
    u2: ScalarField

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ValueError("vector components live on different grids")

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(ScalarField(grid, coeffs=coeffs[0]), ScalarField(grid, coeffs=coeffs[1]))

    @classmethod
    def from_values(cls, grid, v1, v2):
        return cls(ScalarField.from_values(grid, v1), ScalarField.from_values(grid, v2))

    @classmethod
    def zeros(cls, grid):
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @property
    def grid(self) -> SpectralGrid:
        return self.u1.grid

    @property
    def components(self) -> tuple[ScalarField, ScalarField]:
        return (self.u1, self.u2)

    @property
    def coeffs(self) -> np.ndarray:
        return np.stack([self.u1.coeffs, self.u2.coeffs])

    @property
    def values(self) -> np.ndarray:
        return np.stack([self.u1.values, self.u2.values])

    def __iter__(self):
        return iter((self.u1, self.u2))

    def __add__(self, other):
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __neg__(self):
        return VectorField(-self.u1, -self.u2)

    def __mul__(self, scalar):
        return VectorField(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__


# -- array-level kernels (used directly by the right-hand sides) -------------


def grad_coeffs(grid: SpectralGrid, fhat: np.ndarray) -> np.ndarray:
    return np.stack([1j * grid.k1 * fhat, 1j * grid.k2 * fhat])


def div_coeffs(grid: SpectralGrid, vhat: np.ndarray) -> np.ndarray:
    return 1j * (grid.k1 * vhat[0] + grid.k2 * vhat[1])


def multiplier_power(grid: SpectralGrid, s: float) -> np.ndarray:
    """|xi|^s with the zero-wavevector modes mapped to 0."""
    out = np.zeros(grid.spectral_shape)
    nz = grid.kmag > 0
    out[nz] = grid.kmag[nz] ** s
    return out


def project_coeffs(grid: SpectralGrid, vhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solenoidal and potential parts of ``vhat`` (shape (2, n, n//2+1))."""
    k2 = grid.kmag ** 2
    inv = np.zeros_like(k2)
    np.divide(1.0, k2, out=inv, where=k2 > 0)
    kdotv = (grid.k1 * vhat[0] + grid.k2 * vhat[1]) * inv
    q = np.stack([grid.k1 * kdotv, grid.k2 * kdotv])
    return vhat - q, q


def inner_coeffs(grid: SpectralGrid, fhat: np.ndarray, ghat: np.ndarray) -> float:
    """L^2(box) inner product from coefficients (discrete Parseval)."""
    return float(grid.area * np.sum(grid.weights * (fhat * np.conj(ghat)).real))


def _check_mean_free(f: ScalarField, what: str, rtol: float = 1e-10):
    mean = abs(f.coeffs[0, 0])
    scale = l2_norm(f) / f.grid.box_length  # rms
    if mean > rtol * scale and mean > 0:
        raise ValueError(
            f"{what} is undefined on constants: input mean {mean:.3e} exceeds "
            f"{rtol:g} x rms {scale:.3e}"
        )


# -- field-level operations ---------------------------------------------------


def gradient(f: ScalarField) -> VectorField:
    return VectorField.from_coeffs(f.grid, grad_coeffs(f.grid, f.coeffs))


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, coeffs=div_coeffs(v.grid, v.coeffs))


def curl(v: VectorField) -> ScalarField:
    """Scalar curl d1 v2 - d2 v1."""
    g = v.grid
    return ScalarField(g, coeffs=1j * (g.k1 * v.u2.coeffs - g.k2 * v.u1.coeffs))


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, coeffs=-(f.grid.kmag ** 2) * f.coeffs)


def fractional_laplacian(f: ScalarField, s: float) -> ScalarField:
    """Fourier multiplier |xi|^s; the zero mode is always sent to zero.

    For ``s < 0`` the input must be mean-free, otherwise ``ValueError``.
    """
    if s < 0:
        _check_mean_free(f, f"Lambda^{s:g}")
    return ScalarField(f.grid, coeffs=multiplier_power(f.grid, s) * f.coeffs)


def inverse_laplacian(f: ScalarField) -> ScalarField:
    _check_mean_free(f, "inverse Laplacian")
    g = f.grid
    return ScalarField(g, coeffs=-multiplier_power(g, -2.0) * f.coeffs)


def helmholtz_project(v: VectorField) -> tuple[VectorField, VectorField]:
    """Split ``v`` into (divergence-free, curl-free) parts.

    The mean of ``v`` is assigned to the divergence-free part.
    """
    p, q = project_coeffs(v.grid, v.coeffs)
    return VectorField.from_coeffs(v.grid, p), VectorField.from_coeffs(v.grid, q)


def dealias(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, coeffs=np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def pointwise_product(f: ScalarField, g: ScalarField, *, dealiased: bool = True) -> ScalarField:
    out = ScalarField.from_values(f.grid, f.values * g.values)
    return dealias(out) if dealiased else out


def inner(f, g) -> float:
    """L^2 inner product of two scalar or two vector fields."""
    if isinstance(f, VectorField):
        return inner(f.u1, g.u1) + inner(f.u2, g.u2)
    return inner_coeffs(f.grid, f.coeffs, g.coeffs)


def l2_norm(f) -> float:
    """sqrt of the integral of |f|^2 over the box, computed from coefficients."""
    if isinstance(f, VectorField):
        return float(np.hypot(l2_norm(f.u1), l2_norm(f.u2)))
    c = f.coeffs
    return float(np.sqrt(f.grid.area * np.sum(f.grid.weights * (c.real ** 2 + c.imag ** 2))))


def l2_norm_samples(f: ScalarField) -> float:
    """Same norm by midpoint quadrature of the samples."""
    return float(np.sqrt(np.sum(f.values ** 2) * f.grid.dx ** 2))
