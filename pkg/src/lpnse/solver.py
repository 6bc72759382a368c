"""
Pseudospectral Navier-Stokes on the periodic box.

    u_t + (u.grad)u - nu lap(u) + grad(pi) = 0,    div(u) = 0

The pressure is never stepped: the Leray projector removes grad(pi) from the
nonlinear term.  Time integration is integrating-factor RK4, exact for the
viscous term.  The advection term is evaluated pseudospectrally in
physical space and dealiased with the two-thirds rule.

Budget diagnostics follow from dotting the momentum equation with u and with
-lap(u):

    d/dt ||u||^2 / 2      = -nu ||grad u||^2
    d/dt ||grad u||^2 / 2 = -nu ||lap u||^2 + I,    I = int ((u.grad)u) . lap(u) dx
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.fft as sfft

from .errors import BlowUpError, ParameterError, StepRejectedError
from .spectral import (
    Grid,
    SpectralVectorField,
    backward,
    divergence_defect,
    forward,
    gradient_coeffs,
)

DEALIAS_RULES = ("two-thirds", "none")
CFL_SAFETY = 0.5
BLOWUP_ENSTROPHY_FACTOR = 1e8
DIVERGENCE_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    dt: float
    t_end: float
    viscosity: float = 1.0
    dealias: str = "two-thirds"
    diag_every: int = 10

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ParameterError(f"t_end must be positive, got {self.t_end}")
        if not (math.isfinite(self.viscosity) and self.viscosity > 0):
            raise ParameterError(f"viscosity must be positive, got {self.viscosity}")
        if self.dealias not in DEALIAS_RULES:
            raise ParameterError(f"dealias must be one of {DEALIAS_RULES}, got {self.dealias!r}")
        if int(self.diag_every) != self.diag_every or self.diag_every < 1:
            raise ParameterError(f"diag_every must be a positive integer, got {self.diag_every}")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0) or round(steps) < 1:
            raise ParameterError(f"t_end={self.t_end} is not a whole number of steps of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def cfl_limit(grid: Grid, max_speed: float) -> float:
    """Largest admissible dt for a field whose peak speed is ``max_speed``."""
    if max_speed <= 0.0:
        return math.inf
    return CFL_SAFETY * grid.spacing / max_speed


@dataclass(frozen=True)
class SolverState:
    t: float
    u: SpectralVectorField
    step_count: int = 0


def _to_half(coeffs: np.ndarray, n: int) -> np.ndarray:
    return np.ascontiguousarray(coeffs[..., : n // 2 + 1])


def _to_full(half: np.ndarray, n: int) -> np.ndarray:
    full = np.empty(half.shape[:-1] + (n,), dtype=np.complex128)
    full[..., : n // 2 + 1] = half
    tail = half[..., 1 : n // 2][..., ::-1]
    tail = np.roll(np.flip(tail, axis=(-3, -2)), 1, axis=(-3, -2))
    full[..., n // 2 + 1 :] = np.conj(tail)
    return full


class _Kernel:
    """Precomputed half-spectrum operators for one (grid, dt, viscosity, dealias)."""

    def __init__(self, grid: Grid, dt: float, viscosity: float, dealias: str):
        n = grid.n
        h = n // 2 + 1
        self.grid = grid
        self.shape = grid.shape
        k1, k2, k3 = grid.k_deriv
        self.k = (k1, k2, k3[..., :h])
        self.ik = tuple(np.broadcast_to(1j * kj, (n, n, h)).copy() for kj in self.k)
        kk_eff = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        self.inv_kk = np.divide(1.0, kk_eff, out=np.zeros_like(kk_eff), where=kk_eff > 0)
        mask = grid.dealias_mask(dealias)[..., :h].copy()
        mask[0, 0, 0] = False
        self.mask = mask
        ksq = grid.k_squared[..., :h]
        self.E = np.exp(-viscosity * ksq * dt)
        self.E2 = np.exp(-viscosity * ksq * dt / 2)
        # Half-spectrum weights so that sum(w |c|^2) equals the full-lattice sum.
        w = np.full(h, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.enstrophy_weight = w * kk_eff * grid.volume
        self.dt = dt

    def physical(self, uh):
        return sfft.irfftn(uh, s=self.shape, axes=(-3, -2, -1), norm="forward")

    def nonlinear(self, uh):
        """-P[mask (omega x u)] and the peak speed of u.

        (u.grad)u and omega x u differ by grad(|u|^2/2), which the projector
        removes; inside the two-thirds band both forms give the same term.
        """
        ik1, ik2, ik3 = self.ik
        vort = np.stack([
            ik2 * uh[2] - ik3 * uh[1],
            ik3 * uh[0] - ik1 * uh[2],
            ik1 * uh[1] - ik2 * uh[0],
        ])
        u = self.physical(uh)
        w = self.physical(vort)
        cross = np.stack([
            w[1] * u[2] - w[2] * u[1],
            w[2] * u[0] - w[0] * u[2],
            w[0] * u[1] - w[1] * u[0],
        ])
        nh = sfft.rfftn(cross, axes=(-3, -2, -1), norm="forward")
        nh *= self.mask
        kdotn = (self.k[0] * nh[0] + self.k[1] * nh[1] + self.k[2] * nh[2]) * self.inv_kk
        for i in range(3):
            nh[i] -= self.k[i] * kdotn
        speed = float(np.sqrt((u * u).sum(axis=0).max()))
        return -nh, speed

    def enstrophy(self, uh) -> float:
        return float(np.sum(self.enstrophy_weight * (uh.real**2 + uh.imag**2)))

    def advance(self, uh):
        """One IF-RK4 step; returns (new half spectrum, peak speed at the start)."""
        dt, E, E2 = self.dt, self.E, self.E2
        a, speed = self.nonlinear(uh)
        limit = cfl_limit(self.grid, speed)
        if dt > limit * (1 + 1e-12):
            raise StepRejectedError(f"dt={dt} exceeds CFL limit {limit:.6g}", limit=limit)
        b, _ = self.nonlinear(E2 * (uh + 0.5 * dt * a))
        c, _ = self.nonlinear(E2 * uh + 0.5 * dt * b)
        d, _ = self.nonlinear(E * uh + dt * E2 * c)
        return E * uh + (dt / 6.0) * (E * a + 2.0 * E2 * (b + c) + d), speed


@lru_cache(maxsize=16)
def _kernel(grid: Grid, dt: float, viscosity: float, dealias: str) -> _Kernel:
    return _Kernel(grid, dt, viscosity, dealias)


def advection(u: SpectralVectorField, dealias: str = "two-thirds") -> SpectralVectorField:
    """Pseudospectral (u.grad)u with the requested dealiasing."""
    uphys = backward(u.coeffs)
    grads = backward(gradient_coeffs(u))
    conv = np.einsum("jxyz,jixyz->ixyz", uphys, grads)
    return SpectralVectorField(u.grid, forward(conv) * u.grid.dealias_mask(dealias))


def initial_state(u0: SpectralVectorField, cfg: SolverConfig) -> SolverState:
    """Validate u0 and truncate it to the dealiased band."""
    if u0.grid != cfg.grid:
        raise ParameterError("initial field and solver config use different grids")
    scale = np.abs(u0.coeffs).max(initial=0.0)
    if scale and np.abs(u0.mean).max() > 1e-12 * scale:
        raise ParameterError("initial field must have zero mean")
    if divergence_defect(u0) > DIVERGENCE_TOL:
        raise ParameterError("initial field is not divergence-free")
    coeffs = u0.coeffs * cfg.grid.dealias_mask(cfg.dealias)
    coeffs[:, 0, 0, 0] = 0.0
    return SolverState(0.0, SpectralVectorField(cfg.grid, coeffs), 0)


def step(state: SolverState, cfg: SolverConfig) -> SolverState:
    """Advance one time step of size cfg.dt."""
    kern = _kernel(cfg.grid, cfg.dt, cfg.viscosity, cfg.dealias)
    n = cfg.grid.n
    try:
        uh, _ = kern.advance(_to_half(state.u.coeffs, n))
    except StepRejectedError as exc:
        exc.state = state
        raise
    if not np.all(np.isfinite(uh)):
        raise BlowUpError(f"non-finite values at t={state.t + cfg.dt:g}", last_state=state)
    count = state.step_count + 1
    return SolverState(count * cfg.dt, SpectralVectorField(cfg.grid, _to_full(uh, n)), count)


@dataclass
class SimulationResult:
    final: SolverState
    samples: list = field(default_factory=list)
    status: str = "ok"
    message: str = ""


def simulate(
    cfg: SolverConfig,
    u0: Union[SpectralVectorField, SolverState],
    on_sample: Optional[Callable[[SolverState], object]] = None,
) -> SimulationResult:
    """Run to cfg.t_end, calling ``on_sample`` at t = 0, every diag_every steps and at the end.

    The return values of ``on_sample`` are collected in ``samples``.  A
    blow-up or CFL rejection stops the run; the samples gathered so far and
    the last good state are kept and ``status`` names the failure.
    """
    state = u0 if isinstance(u0, SolverState) else initial_state(u0, cfg)
    kern = _kernel(cfg.grid, cfg.dt, cfg.viscosity, cfg.dealias)
    n = cfg.grid.n
    sample = on_sample or budget_sample_factory(cfg.viscosity)
    result = SimulationResult(final=state)
    result.samples.append(sample(state))
    uh = _to_half(state.u.coeffs, n)
    enstrophy0 = kern.enstrophy(uh)
    count = state.step_count
    for i in range(1, cfg.n_steps + 1):
        t_next = (count + 1) * cfg.dt
        try:
            new, _ = kern.advance(uh)
        except StepRejectedError as exc:
            result.status, result.message = "rejected", f"t={t_next:g}: {exc}"
            break
        if not np.all(np.isfinite(new)):
            result.status, result.message = "blowup", f"non-finite values at t={t_next:g}"
            break
        if enstrophy0 > 0 and kern.enstrophy(new) > BLOWUP_ENSTROPHY_FACTOR * enstrophy0:
            result.status = "blowup"
            result.message = f"enstrophy exceeded {BLOWUP_ENSTROPHY_FACTOR:g}x its initial value at t={t_next:g}"
            break
        uh, count = new, count + 1
        if i % cfg.diag_every == 0 or i == cfg.n_steps:
            state = SolverState(count * cfg.dt, SpectralVectorField(cfg.grid, _to_full(uh, n)), count)
            result.samples.append(sample(state))
    if state.step_count != count:
        state = SolverState(count * cfg.dt, SpectralVectorField(cfg.grid, _to_full(uh, n)), count)
    result.final = state
    return result


def field_diagnostics(u: SpectralVectorField) -> dict[str, float]:
    """L^q norms of u, grad u, lap u and the nonlinear integral I from one set of transforms.

    I is a collocation quadrature of the undealiased product; for fields
    inside the two-thirds band it equals the exact integral.
    """
    grid = u.grid
    h3 = grid.spacing**3
    uphys = backward(u.coeffs)
    grads = backward(gradient_coeffs(u))
    lap = backward(-grid.k_squared * u.coeffs)
    conv = np.einsum("jxyz,jixyz->ixyz", uphys, grads)
    umag = np.sqrt(np.einsum("ixyz,ixyz->xyz", uphys, uphys))
    gmag = np.sqrt(np.einsum("jixyz,jixyz->xyz", grads, grads))
    lmag2 = np.einsum("ixyz,ixyz->xyz", lap, lap)
    return {
        "l2": float(np.sqrt(h3 * np.sum(umag**2))),
        "l3": float((h3 * np.sum(umag**3)) ** (1 / 3)),
        "l6": float((h3 * np.sum(umag**6)) ** (1 / 6)),
        "linf": float(umag.max()),
        "grad_l2": float(np.sqrt(h3 * np.sum(gmag**2))),
        "grad_l3": float((h3 * np.sum(gmag**3)) ** (1 / 3)),
        "lap_l2": float(np.sqrt(h3 * np.sum(lmag2))),
        "I": float(h3 * np.sum(conv * lap)),
    }


def nonlinear_integral_I(u: SpectralVectorField) -> float:
    """Collocation quadrature of ((u.grad)u) . lap(u) over the box."""
    return field_diagnostics(u)["I"]


def holder_bound(u: SpectralVectorField) -> float:
    """||u||_{L^6} ||grad u||_{L^3} ||lap u||_{L^2}."""
    d = field_diagnostics(u)
    return d["l6"] * d["grad_l3"] * d["lap_l2"]


@dataclass(frozen=True)
class BudgetSample:
    """Quadratic budget terms of one state; squared norms, not norms."""

    t: float
    energy: float  # ||u||^2
    enstrophy: float  # ||grad u||^2
    lap_sq: float  # ||lap u||^2
    I: float
    viscosity: float

    @property
    def enstrophy_rate(self) -> float:
        """d/dt ||grad u||^2 implied by the enstrophy balance."""
        return 2.0 * (self.I - self.viscosity * self.lap_sq)


def budget_sample(state: SolverState, viscosity: float = 1.0) -> BudgetSample:
    d = field_diagnostics(state.u)
    return BudgetSample(state.t, d["l2"] ** 2, d["grad_l2"] ** 2, d["lap_l2"] ** 2, d["I"], viscosity)


def budget_sample_factory(viscosity: float):
    return lambda state: budget_sample(state, viscosity)


def _as_samples(history, viscosity: float) -> list[BudgetSample]:
    return [h if isinstance(h, BudgetSample) else budget_sample(h, viscosity) for h in history]


def fd_weights(x0: float, nodes: Sequence[float], order: int = 1) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at x0 (Fornberg's recursion)."""
    x = np.asarray(nodes, dtype=float)
    m = len(x)
    c = np.zeros((m, order + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, x[0] - x0
    for i in range(1, m):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def time_derivative(times: Sequence[float], values: Sequence[float], width: int = 5) -> np.ndarray:
    """d/dt of sampled values on a centred (one-sided at the ends) stencil of ``width`` points."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    m = len(t)
    width = min(width, m)
    out = np.empty(m)
    for i in range(m):
        lo = min(max(i - width // 2, 0), m - width)
        idx = slice(lo, lo + width)
        out[i] = fd_weights(0.0, t[idx] - t[i]) @ v[idx]
    return out


@dataclass
class EnstrophyBalance:
    """Residual of d/dt(||grad u||^2/2) + nu ||lap u||^2 = I at each diagnostic time."""

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    dissipation: np.ndarray
    residual: np.ndarray

    @property
    def relative_residual(self) -> np.ndarray:
        scale = np.where(self.dissipation > 0, self.dissipation, 1.0)
        return self.residual / scale


def enstrophy_balance(history, viscosity: float = 1.0) -> EnstrophyBalance:
    """Compare the finite-difference enstrophy rate plus dissipation with I."""
    samples = _as_samples(history, viscosity)
    if len(samples) < 2:
        raise ParameterError("enstrophy balance needs at least two samples")
    times = np.array([s.t for s in samples])
    half_enstrophy = np.array([0.5 * s.enstrophy for s in samples])
    dissipation = np.array([s.viscosity * s.lap_sq for s in samples])
    rhs = np.array([s.I for s in samples])
    lhs = time_derivative(times, half_enstrophy) + dissipation
    return EnstrophyBalance(times, lhs, rhs, dissipation, np.abs(lhs - rhs))


@dataclass
class EnergyLedger:
    """Energy inequality bookkeeping: ||u(t)||^2 + 2 nu int_0^t ||grad u||^2 ds - ||u_0||^2 <= tol."""

    times: np.ndarray
    energy: np.ndarray
    dissipated: np.ndarray
    residual: np.ndarray
    tolerance: float
    violations: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations


def energy_ledger(history, u0_l2: Optional[float] = None, viscosity: float = 1.0,
                  rtol: float = 1e-6) -> EnergyLedger:
    """Accumulate dissipation with the endpoint-corrected trapezoidal rule.

    The correction term uses the enstrophy rate from the balance identity, which
    makes the quadrature fourth order at the diagnostic cadence.
    """
    samples = _as_samples(history, viscosity)
    if not samples:
        raise ParameterError("energy ledger needs at least one sample")
    times = np.array([s.t for s in samples])
    if np.any(np.diff(times) <= 0):
        raise ParameterError("history must be strictly time-ordered")
    e0 = samples[0].energy if u0_l2 is None else u0_l2**2
    f = np.array([2.0 * s.viscosity * s.enstrophy for s in samples])
    fdot = np.array([2.0 * s.viscosity * s.enstrophy_rate for s in samples])
    dt = np.diff(times)
    pieces = 0.5 * dt * (f[:-1] + f[1:]) - dt**2 / 12.0 * (fdot[1:] - fdot[:-1])
    dissipated = np.concatenate([[0.0], np.cumsum(pieces)])
    energy = np.array([s.energy for s in samples])
    residual = energy + dissipated - e0
    tol = rtol * e0
    violations = [(float(t), float(r)) for t, r in zip(times, residual) if r > tol]
    return EnergyLedger(times, energy, dissipated, residual, tol, violations)
