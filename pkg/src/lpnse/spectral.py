"""
Periodic-box spectral representation.

Fields live on the torus [0, L)^3 sampled at n^3 collocation points.  The
forward transform carries the 1/n^3 factor, so a coefficient equals the
Fourier coefficient of the trigonometric interpolant:

    f(x) = sum_k  f_hat(k) exp(i k.x),      k in (2 pi / L) {-n/2+1, ..., n/2}^3

Array layout follows FFT order along each axis; the Nyquist index n/2 is
reported as +n/2.  First-order derivatives use a wavevector whose Nyquist
component is zero so that real fields stay real (the Nyquist derivative is
sign-ambiguous on an even grid).  The Leray projector uses that same
wavevector, which keeps it consistent with the discrete divergence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, ParameterError, SymmetryError

SPATIAL_AXES = (-3, -2, -1)
HERMITIAN_RTOL = 1e-10
SNAPSHOT_MAGIC = b"LPNSE1"
_SNAPSHOT_HEADER = struct.Struct("<6sQdQ")


@dataclass(frozen=True)
class Grid:
    """Cubic periodic box with ``n`` points per axis."""

    n: int
    box_length: float = 2 * np.pi

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ConfigurationError(f"n must be an even integer >= 8, got {self.n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ConfigurationError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def volume(self) -> float:
        return self.box_length**3

    @property
    def scale(self) -> float:
        """Physical wavenumber of lattice index 1."""
        return 2 * np.pi / self.box_length

    @cached_property
    def lattice(self) -> np.ndarray:
        """Integer wavenumbers along one axis in FFT order, Nyquist as +n/2."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n)
        m[self.n // 2] = self.n // 2
        return m

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable wavevector components, shapes (n,1,1), (1,n,1), (1,1,n)."""
        k1 = self.lattice * self.scale
        return (k1[:, None, None], k1[None, :, None], k1[None, None, :])

    @cached_property
    def k_deriv(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavevector used for odd-order derivatives (Nyquist component zeroed)."""
        k1 = self.lattice * self.scale
        k1[self.n // 2] = 0.0
        return (k1[:, None, None], k1[None, :, None], k1[None, None, :])

    @cached_property
    def k_squared(self) -> np.ndarray:
        k1, k2, k3 = self.k
        return k1**2 + k2**2 + k3**2

    @cached_property
    def k_magnitude(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @property
    def k_max(self) -> float:
        """Largest resolved |k| (corner of the lattice)."""
        return float(np.sqrt(3.0) * (self.n // 2) * self.scale)

    @cached_property
    def coordinates(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def mesh(self) -> np.ndarray:
        """Collocation points, shape (3, n, n, n), x1 varying slowest."""
        x = self.coordinates
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    def dealias_mask(self, rule: str = "two-thirds") -> np.ndarray:
        """Boolean mask of retained modes; two-thirds drops |k_i| > n/3."""
        if rule == "none":
            return np.ones(self.shape, dtype=bool)
        if rule != "two-thirds":
            raise ParameterError(f"unknown dealias rule {rule!r}")
        keep = np.abs(self.lattice) <= self.n / 3
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]


def conj_reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return conj(c(-k)) on the FFT-ordered lattice (last three axes)."""
    flipped = np.flip(coeffs, axis=SPATIAL_AXES)
    return np.conj(np.roll(flipped, 1, axis=SPATIAL_AXES))


def hermitian_defect(coeffs: np.ndarray) -> float:
    """max |c(k) - conj(c(-k))| relative to max |c|; 0 for the zero field."""
    scale = np.abs(coeffs).max(initial=0.0)
    if scale == 0.0:
        return 0.0
    return float(np.abs(coeffs - conj_reflect(coeffs)).max() / scale)


class _SpectralBase:
    grid: Grid
    coeffs: np.ndarray

    def _check(self, lead: tuple[int, ...]):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != lead + self.grid.shape:
            raise ConfigurationError(
                f"coefficient shape {coeffs.shape} does not match {lead + self.grid.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    def _new(self, coeffs):
        return type(self)(self.grid, coeffs)

    def _coerce(self, other):
        if isinstance(other, _SpectralBase):
            if other.grid != self.grid:
                raise ConfigurationError("fields live on different grids")
            return other.coeffs
        return NotImplemented

    def __add__(self, other):
        c = self._coerce(other)
        return NotImplemented if c is NotImplemented else self._new(self.coeffs + c)

    def __sub__(self, other):
        c = self._coerce(other)
        return NotImplemented if c is NotImplemented else self._new(self.coeffs - c)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self._new(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.coeffs)

    @property
    def mean(self):
        return self.coeffs[..., 0, 0, 0]

    def without_mean(self):
        c = self.coeffs.copy()
        c[..., 0, 0, 0] = 0.0
        return self._new(c)

    def inner(self, other) -> complex:
        """Spectral inner product sum_k conj(a(k)) b(k) over all components."""
        return complex(np.vdot(self.coeffs, self._coerce(other)))


@dataclass(frozen=True, eq=False)
class SpectralField(_SpectralBase):
    """Fourier coefficients of a scalar field."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        self._check(())


@dataclass(frozen=True, eq=False)
class SpectralVectorField(_SpectralBase):
    """Fourier coefficients of a 3-component field, stored as one (3, n, n, n) array."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        self._check((3,))

    @classmethod
    def from_components(cls, components: Sequence[SpectralField]) -> SpectralVectorField:
        if len(components) != 3:
            raise ConfigurationError("a vector field needs exactly three components")
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise ConfigurationError("components must share one grid")
        return cls(grid, np.stack([c.coeffs for c in components]))

    @property
    def components(self) -> tuple[SpectralField, SpectralField, SpectralField]:
        return tuple(SpectralField(self.grid, c) for c in self.coeffs)

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralVectorField:
        return cls(grid, np.zeros((3,) + grid.shape, dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class PhysicalField:
    """Real collocation values, shape (n, n, n) or (3, n, n, n)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape[-3:] != self.grid.shape or values.ndim not in (3, 4):
            raise ConfigurationError(
                f"values of shape {values.shape} do not fit grid n={self.grid.n}"
            )
        if values.ndim == 4 and values.shape[0] != 3:
            raise ConfigurationError("vector physical fields must have 3 components")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("physical field contains NaN or Inf")
        object.__setattr__(self, "values", values)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 4


AnySpectral = Union[SpectralField, SpectralVectorField]


def forward(values: np.ndarray) -> np.ndarray:
    """Raw forward DFT over the last three axes with the 1/n^3 factor."""
    return sfft.fftn(values, axes=SPATIAL_AXES, norm="forward")


def backward(coeffs: np.ndarray) -> np.ndarray:
    """Raw inverse DFT returning the real part; no symmetry check."""
    return sfft.ifftn(coeffs, axes=SPATIAL_AXES, norm="forward").real


def transform(f: PhysicalField) -> AnySpectral:
    """Forward transform of a physical field (scalar or vector)."""
    coeffs = forward(f.values)
    if f.is_vector:
        return SpectralVectorField(f.grid, coeffs)
    return SpectralField(f.grid, coeffs)


def inverse_transform(F: AnySpectral, rtol: float = HERMITIAN_RTOL) -> PhysicalField:
    """Inverse transform; raises SymmetryError unless F represents a real field."""
    defect = hermitian_defect(F.coeffs)
    if defect > rtol:
        raise SymmetryError(f"coefficients are not Hermitian (relative defect {defect:.3e})")
    return PhysicalField(F.grid, backward(F.coeffs))


def derivative(F: AnySpectral, axis: int, order: int = 1) -> AnySpectral:
    """Spectral derivative along ``axis`` (1, 2 or 3, as in x1, x2, x3)."""
    if axis not in (1, 2, 3):
        raise ParameterError(f"axis must be 1, 2 or 3, got {axis}")
    if int(order) != order or order < 1:
        raise ParameterError(f"order must be a positive integer, got {order}")
    k = (F.grid.k_deriv if order % 2 else F.grid.k)[axis - 1]
    return F._new(F.coeffs * (1j * k) ** order)


def gradient_coeffs(u: AnySpectral) -> np.ndarray:
    """Coefficients of du/dx_j stacked on a new leading axis j."""
    return np.stack([1j * kj * u.coeffs for kj in u.grid.k_deriv])


def laplacian(F: AnySpectral) -> AnySpectral:
    return F._new(-F.grid.k_squared * F.coeffs)


def divergence(u: SpectralVectorField) -> SpectralField:
    k = u.grid.k_deriv
    return SpectralField(u.grid, 1j * sum(kj * uj for kj, uj in zip(k, u.coeffs)))


def divergence_defect(u: SpectralVectorField) -> float:
    """max_k |k.u(k)| / max_k |u(k)|, with the derivative wavevector."""
    scale = np.abs(u.coeffs).max(initial=0.0)
    if scale == 0.0:
        return 0.0
    return float(np.abs(divergence(u).coeffs).max() / scale)


def _leray(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    k = grid.k_deriv
    kk = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    inv = np.divide(1.0, kk, out=np.zeros_like(kk), where=kk > 0)
    kdotu = (k[0] * coeffs[0] + k[1] * coeffs[1] + k[2] * coeffs[2]) * inv
    return np.stack([coeffs[i] - k[i] * kdotu for i in range(3)])


def leray_project(u: SpectralVectorField) -> SpectralVectorField:
    """Orthogonal projection onto divergence-free fields; k = 0 untouched."""
    return SpectralVectorField(u.grid, _leray(u.coeffs, u.grid))


def convective_term(u: SpectralVectorField) -> np.ndarray:
    """Physical-space (u.grad)u from a spectral velocity, no dealiasing."""
    uphys = backward(u.coeffs)
    grads = backward(gradient_coeffs(u))  # grads[j, i] = d u_i / d x_j
    return np.einsum("jxyz,jixyz->ixyz", uphys, grads)


def pressure_from(u: SpectralVectorField) -> SpectralField:
    """Zero-mean pressure solving -lap(pi) = div((u.grad)u)."""
    grid = u.grid
    nonlinear = forward(convective_term(u))
    k = grid.k_deriv
    kk = grid.k_squared
    div_n = 1j * (k[0] * nonlinear[0] + k[1] * nonlinear[1] + k[2] * nonlinear[2])
    pi_hat = np.divide(div_n, kk, out=np.zeros_like(div_n), where=kk > 0)
    pi_hat[0, 0, 0] = 0.0
    return SpectralField(grid, pi_hat)


def write_snapshot(path, field: Union[PhysicalField, AnySpectral]) -> None:
    """Write a field in the LPNSE1 binary snapshot format."""
    if not isinstance(field, PhysicalField):
        field = inverse_transform(field)
    values = field.values if field.is_vector else field.values[None]
    header = _SNAPSHOT_HEADER.pack(
        SNAPSHOT_MAGIC, field.grid.n, field.grid.box_length, values.shape[0]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_snapshot(path) -> PhysicalField:
    data = Path(path).read_bytes()
    if len(data) < _SNAPSHOT_HEADER.size:
        raise ConfigurationError(f"{path}: truncated snapshot header")
    magic, n, box_length, ncomp = _SNAPSHOT_HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"{path}: bad magic {magic!r}")
    if ncomp not in (1, 3):
        raise ConfigurationError(f"{path}: unsupported component count {ncomp}")
    grid = Grid(n, box_length)
    payload = data[_SNAPSHOT_HEADER.size :]
    expected = ncomp * n**3 * 8
    if len(payload) != expected:
        raise ConfigurationError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f8").reshape((ncomp,) + grid.shape)
    return PhysicalField(grid, values if ncomp == 3 else values[0])
