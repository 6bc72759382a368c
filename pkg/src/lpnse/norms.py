"""
Lebesgue, homogeneous Sobolev and homogeneous Besov norms on the torus.

Homogeneous norms ignore the k = 0 mode.  L^infinity is the maximum over
collocation points, which is a lower bound on the true supremum.  Vector and
tensor fields are measured with the pointwise Euclidean (Frobenius) magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, ParameterError
from .littlewood_paley import DyadicPartition
from .spectral import Grid, PhysicalField, SpectralField, SpectralVectorField, backward

SpectralLike = Union[SpectralField, SpectralVectorField, Sequence[Union[SpectralField, SpectralVectorField]]]
PhysicalLike = Union[PhysicalField, Sequence[PhysicalField]]

SERRIN_TOL = 1e-9
MEAN_ZERO_RTOL = 1e-12


def _stack_spectral(f: SpectralLike) -> tuple[Grid, np.ndarray]:
    """Component stack of shape (m, n, n, n)."""
    if isinstance(f, (SpectralField, SpectralVectorField)):
        return f.grid, f.coeffs.reshape((-1,) + f.grid.shape)
    f = list(f)
    if not f:
        raise ParameterError("empty component list")
    grid = f[0].grid
    if any(c.grid != grid for c in f):
        raise ConfigurationError("components live on different grids")
    return grid, np.concatenate([c.coeffs.reshape((-1,) + grid.shape) for c in f])


def _stack_physical(f: PhysicalLike) -> tuple[Grid, np.ndarray]:
    if isinstance(f, PhysicalField):
        return f.grid, f.values.reshape((-1,) + f.grid.shape)
    f = list(f)
    if not f:
        raise ParameterError("empty component list")
    grid = f[0].grid
    if any(c.grid != grid for c in f):
        raise ConfigurationError("components live on different grids")
    return grid, np.concatenate([c.values.reshape((-1,) + grid.shape) for c in f])


def _check_exponent(q, name="q"):
    q = float(q)
    if not q >= 1.0:
        raise ParameterError(f"{name} must lie in [1, inf], got {q}")
    return q


def _lp_of_values(values: np.ndarray, q: float, grid: Grid) -> float:
    """Collocation L^q norm of a component stack."""
    if values.shape[0] == 1:
        mag = np.abs(values[0])
    else:
        mag = np.sqrt(np.einsum("i...,i...->...", values, values))
    if math.isinf(q):
        return float(mag.max())
    if q == 2.0:
        return float(np.sqrt(grid.spacing**3 * np.sum(mag * mag)))
    return float((grid.spacing**3 * np.sum(mag**q)) ** (1.0 / q))


def lp_norm(f: PhysicalLike, q: float) -> float:
    """(h^3 sum |f|^q)^(1/q); q = inf gives max |f|."""
    q = _check_exponent(q)
    grid, values = _stack_physical(f)
    return _lp_of_values(values, q, grid)


def spectral_lp_norm(f: SpectralLike, q: float) -> float:
    """lp_norm of the inverse transform, without a Hermitian check."""
    q = _check_exponent(q)
    grid, coeffs = _stack_spectral(f)
    return _lp_of_values(backward(coeffs), q, grid)


def sobolev_norm(f: SpectralLike, s: float) -> float:
    """Homogeneous H^s norm, normalised so s = 0 matches the L^2 norm of a mean-zero field."""
    grid, coeffs = _stack_spectral(f)
    kk = grid.k_squared
    weight = np.zeros_like(kk)
    nz = kk > 0
    weight[nz] = kk[nz] ** s
    power = np.sum(np.abs(coeffs) ** 2, axis=0)
    return float(np.sqrt(grid.volume * np.sum(weight * power)))


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = math.inf
    q: float = math.inf

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ParameterError("Besov regularity s must be finite")
        object.__setattr__(self, "p", _check_exponent(self.p, "p"))
        object.__setattr__(self, "q", _check_exponent(self.q, "q"))


def block_norms(f: SpectralLike, p: float, P: DyadicPartition) -> dict[int, float]:
    """||Delta_j f||_{L^p} for every j in the partition's range."""
    p = _check_exponent(p, "p")
    grid, coeffs = _stack_spectral(f)
    if grid != P.grid:
        raise ConfigurationError("partition was built for a different grid")
    out = {}
    for j in P.indices:
        block = coeffs * P.low_pass_multiplier(j) - coeffs * P.low_pass_multiplier(j - 1)
        out[j] = _lp_of_values(backward(block), p, grid) if np.any(block) else 0.0
    return out


def combine_blocks(norms: Mapping[int, float], s: float, q: float) -> float:
    """l^q over j of 2^(js) ||Delta_j f||."""
    weighted = np.array([2.0**(j * s) * v for j, v in sorted(norms.items())])
    if weighted.size == 0:
        return 0.0
    if math.isinf(q):
        return float(weighted.max())
    return float(np.sum(weighted**q) ** (1.0 / q))


def besov_norm(f: SpectralLike, params: BesovParams, P: DyadicPartition) -> float:
    """Homogeneous Besov norm over the partition's dyadic range."""
    return combine_blocks(block_norms(f, params.p, P), params.s, params.q)


@dataclass(frozen=True)
class InterpolationReport:
    """Terms of ||f||_{L^q} <= C ||f||_{H^{a(q/2-1)}}^{2/q} ||f||_{B^{-a}_{inf,inf}}^{1-2/q}."""

    q: float
    alpha: float
    lq: float
    sobolev: float
    besov: float
    ratio: float


def _check_interp_params(q, alpha):
    if not (2.0 < q < math.inf):
        raise ParameterError(f"interpolation requires 2 < q < inf, got q={q}")
    if not alpha > 0.0:
        raise ParameterError(f"interpolation requires alpha > 0, got alpha={alpha}")


def interpolation_ratio(lq: float, sobolev: float, besov: float, q: float) -> float:
    denom = sobolev ** (2.0 / q) * besov ** (1.0 - 2.0 / q)
    if denom == 0.0:
        raise DegenerateInputError("interpolation denominator vanishes (zero field?)")
    return lq / denom


def check_interpolation(
    f: SpectralLike,
    q: float,
    alpha: float,
    P: DyadicPartition,
    sup_blocks: Mapping[int, float] | None = None,
) -> InterpolationReport:
    """Ratio R(f) of the interpolation inequality; R <= C for a universal C.

    ``sup_blocks`` may carry precomputed ``block_norms(f, inf, P)`` so that a
    corpus sweep over several (q, alpha) pairs inverts the blocks only once.
    """
    _check_interp_params(q, alpha)
    grid, coeffs = _stack_spectral(f)
    scale = np.abs(coeffs).max(initial=0.0)
    if scale == 0.0:
        raise DegenerateInputError("check_interpolation needs a nonzero field")
    if np.abs(coeffs[:, 0, 0, 0]).max() > MEAN_ZERO_RTOL * scale:
        raise ParameterError("check_interpolation needs a mean-zero field")
    if sup_blocks is None:
        sup_blocks = block_norms(f, math.inf, P)
    lq = _lp_of_values(backward(coeffs), q, grid)
    sob = sobolev_norm(f, alpha * (q / 2.0 - 1.0))
    bes = combine_blocks(sup_blocks, -alpha, math.inf)
    return InterpolationReport(q, alpha, lq, sob, bes, interpolation_ratio(lq, sob, bes, q))


def lq_key(q: float) -> str:
    """Column name under which a spatial L^q norm is stored in NormReport.extras."""
    return "linf" if math.isinf(q) else f"l{q:g}"


# Documented column order for NormReport extras; unknown keys follow alphabetically.
EXTRA_ORDER = ("l3", "l6", "linf", "grad_l3")


@dataclass(frozen=True)
class NormReport:
    time: float
    l2: float
    grad_l2: float
    lap_l2: float
    besov_m1_inf_inf: float
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        values = [self.l2, self.grad_l2, self.lap_l2, self.besov_m1_inf_inf, *self.extras.values()]
        if not all(math.isfinite(v) and v >= 0.0 for v in values):
            raise ParameterError("norm values must be finite and nonnegative")

    def extra_keys(self) -> list[str]:
        return ordered_extras(self.extras)

    def columns(self) -> list[str]:
        return ["time", "l2", "grad_l2", "lap_l2", "besov_m1_inf_inf", *self.extra_keys()]

    def values(self) -> list[float]:
        base = [self.time, self.l2, self.grad_l2, self.lap_l2, self.besov_m1_inf_inf]
        return base + [self.extras[k] for k in self.extra_keys()]


def ordered_extras(keys: Iterable[str]) -> list[str]:
    keys = set(keys)
    known = [k for k in EXTRA_ORDER if k in keys]
    return known + sorted(keys - set(EXTRA_ORDER))


def serrin_quantity(history: Sequence[NormReport], p: float, q: float) -> float:
    """(int_0^T ||u||_{L^q}^p dt)^(1/p) by the trapezoidal rule; p = inf gives the sup."""
    p, q = float(p), float(q)
    if not (3.0 <= q <= math.inf) or p < 1.0:
        raise ParameterError(f"Serrin exponents need 3 <= q <= inf, got (p, q) = ({p}, {q})")
    if abs(2.0 / p + 3.0 / q - 1.0) > SERRIN_TOL:
        raise ParameterError(f"(p, q) = ({p}, {q}) is off the line 2/p + 3/q = 1")
    if not history:
        return 0.0
    key = lq_key(q)
    try:
        values = np.array([r.extras[key] for r in history])
    except KeyError:
        raise ParameterError(f"history lacks stored {key} values")
    times = np.array([r.time for r in history])
    if np.any(np.diff(times) < 0):
        raise ParameterError("history must be time-ordered")
    if math.isinf(p):
        return float(values.max())
    if len(history) == 1:
        return 0.0
    return float(np.trapezoid(values**p, times) ** (1.0 / p))
