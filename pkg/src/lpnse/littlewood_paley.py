"""
Dyadic frequency decomposition on the periodic lattice.

A cutoff profile ``phi_hat(r)`` equals 1 for r <= 1 and 0 for r >= 2.  The
low-pass operator S_j multiplies coefficients by phi_hat(|k| / 2^j) and the
band-pass block is the difference

    Delta_j f = S_j f - S_{j-1} f,

so the reconstruction identity telescopes.  Both operators act as Fourier
multipliers, which on the torus is the same thing as convolving with the
rescaled kernels.

The dyadic range [j_min, j_max] is finite: every nonzero lattice mode lies
above 2^{j_min} and below 2^{j_max - 1}.  The k = 0 mode never enters a block;
on the torus S_j f tends to the mean of f (not to 0) as j decreases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigurationError, InvalidProfileError
from .spectral import AnySpectral, Grid

Profile = Callable[[np.ndarray], np.ndarray]


def box_profile(r):
    """Sharp cutoff: 1 on [0, 1], 0 beyond."""
    return np.where(np.asarray(r) <= 1.0, 1.0, 0.0)


def smooth_profile(r):
    """C^2 quintic ramp from 1 at r = 1 down to 0 at r = 2."""
    t = np.clip(np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


PROFILES: dict[str, Profile] = {"box": box_profile, "smooth": smooth_profile}


def validate_profile(phi_hat: Profile, samples: int = 4001) -> None:
    """Raise InvalidProfileError unless phi_hat is a valid cutoff profile."""
    r = np.linspace(0.0, 3.0, samples)
    v = np.asarray(phi_hat(r), dtype=float)
    if v.shape != r.shape or not np.all(np.isfinite(v)):
        raise InvalidProfileError("profile must map arrays to finite arrays of the same shape")
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise InvalidProfileError("profile values must lie in [0, 1]")
    if np.any(v[r <= 1.0] != 1.0):
        raise InvalidProfileError("profile must equal 1 for r <= 1")
    if np.any(v[r >= 2.0] != 0.0):
        raise InvalidProfileError("profile must vanish for r >= 2")
    if np.any(np.diff(v) > 0.0):
        raise InvalidProfileError("profile must be nonincreasing")


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Dyadic partition of unity fitted to one grid."""

    grid: Grid
    profile: str
    phi_hat: Profile
    j_min: int
    j_max: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def indices(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def low_pass_multiplier(self, j: int) -> np.ndarray:
        """phi_hat(|k| / 2^j) on the lattice (cached)."""
        mult = self._cache.get(j)
        if mult is None:
            mult = np.asarray(self.phi_hat(self.grid.k_magnitude / 2.0**j), dtype=float)
            mult.setflags(write=False)
            self._cache[j] = mult
        return mult

    def band_multiplier(self, j: int) -> np.ndarray:
        """psi_hat_j = phi_hat(|k|/2^j) - phi_hat(|k|/2^(j-1))."""
        return self.low_pass_multiplier(j) - self.low_pass_multiplier(j - 1)

    def partition_sum(self) -> np.ndarray:
        """sum_j psi_hat_j over the dyadic range; 1 at every nonzero mode."""
        total = np.zeros(self.grid.shape)
        for j in self.indices:
            total += self.band_multiplier(j)
        return total


def build_partition(grid: Grid, profile: Union[str, Profile] = "smooth") -> DyadicPartition:
    """Partition whose range covers all nonzero modes of ``grid``."""
    if isinstance(profile, str):
        try:
            phi_hat = PROFILES[profile]
        except KeyError:
            raise InvalidProfileError(f"unknown profile {profile!r}; use one of {sorted(PROFILES)}")
        name = profile
    else:
        validate_profile(profile)
        phi_hat, name = profile, getattr(profile, "__name__", "custom")
    # Smallest nonzero |k| must satisfy |k| >= 2^j_min so that S_{j_min-1} keeps only the mean.
    j_min = math.floor(math.log2(grid.scale))
    j_max = math.ceil(math.log2(grid.k_max)) + 1
    return DyadicPartition(grid, name, phi_hat, j_min, j_max)


@dataclass(frozen=True, eq=False)
class DyadicBlock:
    j: int
    field: AnySpectral


def _check_grid(f: AnySpectral, P: DyadicPartition):
    if f.grid != P.grid:
        raise ConfigurationError("partition was built for a different grid")


def low_pass(f: AnySpectral, j: int, P: DyadicPartition) -> AnySpectral:
    """S_j f."""
    _check_grid(f, P)
    return f._new(f.coeffs * P.low_pass_multiplier(j))


def band_pass(f: AnySpectral, j: int, P: DyadicPartition) -> DyadicBlock:
    """Delta_j f, computed as S_j f - S_{j-1} f."""
    return DyadicBlock(j, low_pass(f, j, P) - low_pass(f, j - 1, P))


def decompose(f: AnySpectral, P: DyadicPartition) -> list[DyadicBlock]:
    return [band_pass(f, j, P) for j in P.indices]


def reconstruct(blocks: Sequence[DyadicBlock]) -> AnySpectral:
    """Sum of the blocks; add the mean mode back to recover f."""
    if not blocks:
        raise ValueError("cannot reconstruct from an empty block list")
    total = blocks[0].field
    for block in blocks[1:]:
        total = total + block.field
    return total
