"""IMEX time stepping for the sixth-order Cahn-Hilliard state equation.

The state equation is advanced in the single-equation form

    d/dt phi = lap mu + u - sigma phi,
    mu = lap^2 phi + NL(phi),
    NL(phi) = -lap f(phi) + (f'(phi) + nu) w,   w = -lap phi + f(phi),

so that ``lap mu = lap^3 phi + lap NL(phi)``.  Per mode ``k`` one step reads

    phi_k <- [phi_k + dt (u_k - omega_k NL_k + (A omega_k^2 + B omega_k) phi_k)]
             / [1 + dt (omega_k^3 + A omega_k^2 + B omega_k + sigma)],

i.e. the sixth-order term, the stabilisation shifts and the reaction are
implicit and everything else is explicit.  On the mean mode this is exactly
implicit Euler for ``d/dt mean + sigma mean = mean(u)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import kernels
from .potential import ModelParams, PotentialError
from .spectral import Grid, GridField, SpectralField

__all__ = [
    "StepperConfig",
    "StateTrajectory",
    "BlowUpError",
    "chemical_potential",
    "chemical_potential_via_w",
    "w_field",
    "step",
    "simulate",
    "energy",
    "mass_ode_reference",
    "residual_energy_identity",
    "control_schedule",
    "n_steps",
]

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    """The nodal maximum of the state left the admissible range."""

    def __init__(self, t: float, value: float, bound: float):
        super().__init__(f"state blew up at t={t:.6g}: max|phi| = {value:.6g} > {bound:g}")
        self.t = t
        self.value = value
        self.bound = bound


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    stab_A: float = 2.0
    stab_B: float = 2.0
    dealias: bool = False
    blowup: float = 1e3

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.stab_A < 0 or self.stab_B < 0:
            raise ValueError("stabilisation coefficients must be >= 0")
        if not self.blowup > 0:
            raise ValueError("blow-up bound must be > 0")


def n_steps(T: float, dt: float) -> int:
    """Number of steps; ``T / dt`` must be an integer up to 1e-9 relative slack."""
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T}")
    m = int(round(T / dt))
    if m < 1 or abs(m * dt - T) > 1e-9 * T:
        raise ValueError(f"T = {T} is not an integer multiple of dt = {dt}")
    return m


class _Ops:
    """Per-(grid, params, config) constants and the pseudo-spectral plumbing."""

    def __init__(self, grid: Grid, params: ModelParams, cfg: StepperConfig):
        self.grid = grid
        self.params = params
        self.cfg = cfg
        om = np.asarray(grid.eigenvalues)
        self.om = om
        self.shift = np.ascontiguousarray((cfg.stab_A * om**2 + cfg.stab_B * om).ravel())
        denom = 1.0 + cfg.dt * (om**3 + cfg.stab_A * om**2 + cfg.stab_B * om + params.sigma)
        self.inv_denom = np.ascontiguousarray((1.0 / denom).ravel())
        self.fc = params.potential.f_coeffs
        self.nu = float(params.nu)
        self.fine = grid.padded() if cfg.dealias else None
        self.zero_src = np.zeros(om.size)

    @property
    def nodal_shape(self):
        return (self.fine or self.grid).modes

    def nodal(self, coeffs: np.ndarray) -> np.ndarray:
        if self.fine is None:
            return self.grid.inverse(coeffs)
        return self.grid.inverse_padded(coeffs, self.fine)

    def spectral(self, values: np.ndarray) -> np.ndarray:
        if self.fine is None:
            return self.grid.forward(values)
        return self.grid.forward_truncated(values, self.fine)

    def state_nodal(self, phi: np.ndarray):
        """Nodal ``phi`` and ``lap phi``."""
        both = self.nodal(np.stack([phi, -self.om * phi]))
        return both[0], both[1]

    def nonlinear(self, phi: np.ndarray):
        """Spectral ``NL(phi)`` and nodal ``phi``."""
        ph, lap = self.state_nodal(phi)
        fv, b = kernels.state_terms(self.fc, self.nu, ph.ravel(), lap.ravel())
        shape = ph.shape
        hat = self.spectral(np.stack([fv.reshape(shape), b.reshape(shape)]))
        return self.om * hat[0] + hat[1], ph

    def advance(self, x: np.ndarray, expl: np.ndarray, src: Optional[np.ndarray]) -> np.ndarray:
        s = self.zero_src if src is None else src.ravel()
        out = kernels.imex_update(x.ravel(), expl.ravel(), s, self.shift, self.inv_denom, self.cfg.dt)
        return out.reshape(x.shape)

    def step(self, phi: np.ndarray, u_hat: Optional[np.ndarray]):
        nl, ph = self.nonlinear(phi)
        return self.advance(phi, -self.om * nl, u_hat), ph


def _check_params(params: ModelParams):
    rep = params.potential.report
    if rep is not None and not rep.ok and not params.potential.verification_only:
        raise PotentialError(f"potential fails {rep.failed()[0].name}")


def control_schedule(u, grid: Grid, m: int) -> np.ndarray:
    """Normalise a control to a nodal array of shape ``(m, *grid.modes)``.

    Accepts a scalar, a single field (constant in time), a nodal array of
    the grid's shape, or a full per-step array.
    """
    if isinstance(u, SpectralField):
        u = u.nodal()
    if isinstance(u, GridField):
        if u.grid != grid:
            raise ValueError("control lives on a different grid")
        u = u.values
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        return np.full((m,) + grid.modes, float(u))
    if u.shape == grid.modes:
        return np.broadcast_to(u, (m,) + grid.modes).copy()
    if u.shape == (m,) + grid.modes:
        return u
    raise ValueError(f"control shape {u.shape} incompatible with {m} steps on grid {grid.modes}")


def _as_coeffs(phi, grid: Grid | None = None) -> tuple[Grid, np.ndarray]:
    if isinstance(phi, GridField):
        phi = phi.spectral()
    if not isinstance(phi, SpectralField):
        raise TypeError("expected a SpectralField or GridField")
    if grid is not None and phi.grid != grid:
        raise ValueError("field lives on a different grid")
    return phi.grid, phi.coeffs


# -- derived fields -----------------------------------------------------------------


def w_field(phi: SpectralField, params: ModelParams) -> SpectralField:
    """``w = -lap phi + f(phi)``."""
    grid, c = _as_coeffs(phi)
    ph = grid.inverse(c)
    fv = params.potential.f(ph)
    return SpectralField(grid, grid.eigenvalues * c + grid.forward(np.asarray(fv, dtype=float) * np.ones_like(ph)))


def chemical_potential(phi: SpectralField, params: ModelParams, dealias: bool = False) -> SpectralField:
    """``mu = lap^2 phi - lap f(phi) - (f'(phi) + nu) lap phi + (f'(phi) + nu) f(phi)``.

    Derivatives are spectral, products nodal.
    """
    _check_params(params)
    grid, c = _as_coeffs(phi)
    ops = _Ops(grid, params, StepperConfig(1.0, dealias=dealias))
    nl, _ = ops.nonlinear(c)
    return SpectralField(grid, grid.eigenvalues**2 * c + nl)


def chemical_potential_via_w(phi: SpectralField, params: ModelParams) -> SpectralField:
    """Same as :func:`chemical_potential`, assembled as ``-lap w + (f'(phi) + nu) w``."""
    _check_params(params)
    grid, c = _as_coeffs(phi)
    w = w_field(phi, params).coeffs
    ph = grid.inverse(c)
    wn = grid.inverse(w)
    dfv = params.potential.df(ph) * np.ones_like(ph)
    return SpectralField(grid, grid.eigenvalues * w + grid.forward((dfv + params.nu) * wn))


def energy(phi: SpectralField, params: ModelParams) -> float:
    """``E = 1/2 int (-lap phi + f(phi))^2 + nu int (|grad phi|^2 / 2 + F(phi))``.

    Nonlinear integrands use the nodal midpoint rule; the gradient term is
    evaluated exactly from the coefficients.
    """
    grid, c = _as_coeffs(phi)
    return _energy_raw(grid, params, c)


def _energy_raw(grid: Grid, params: ModelParams, c: np.ndarray, nodal=None) -> float:
    if nodal is None:
        both = grid.inverse(np.stack([c, -grid.eigenvalues * c]))
        ph, lap = both[0], both[1]
    else:
        ph, lap = nodal
    pot = params.potential
    h = grid.cell_volume
    w = -lap + pot.f(ph)
    e = 0.5 * h * float(np.sum(w * w))
    if params.nu != 0.0:
        grad2 = float(np.sum(grid.eigenvalues * c * c))
        e += params.nu * (0.5 * grad2 + h * float(np.sum(pot.F(ph) * np.ones_like(ph))))
    return e


# -- time stepping ------------------------------------------------------------------


def step(phi: SpectralField, u, params: ModelParams, cfg: StepperConfig, t: float = 0.0) -> SpectralField:
    """Advance ``phi`` by one step of size ``cfg.dt`` under control ``u``.

    Raises
    ------
    BlowUpError
        If the new state exceeds ``cfg.blowup`` in nodal maximum norm; the
        error carries the time ``t + dt``.
    """
    _check_params(params)
    grid, c = _as_coeffs(phi)
    ops = _Ops(grid, params, cfg)
    u_hat = grid.forward(control_schedule(u, grid, 1)[0])
    new, _ = ops.step(c, u_hat)
    big = float(np.max(np.abs(grid.inverse(new)))) if np.all(np.isfinite(new)) else np.inf
    if not big <= cfg.blowup:
        raise BlowUpError(t + cfg.dt, big, cfg.blowup)
    return SpectralField(grid, new)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """Full-storage state trajectory.

    ``phi[n]`` are the coefficients at ``times[n]``; ``u[n]`` is the nodal
    control acting on ``[times[n], times[n+1])``.
    """

    grid: Grid
    times: np.ndarray
    phi: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    params: ModelParams
    cfg: StepperConfig
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return self.cfg.dt

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def snapshot(self, n: int) -> SpectralField:
        return SpectralField(self.grid, self.phi[n])

    def final(self) -> SpectralField:
        return self.snapshot(-1)

    def mu(self, n: int) -> SpectralField:
        return chemical_potential(self.snapshot(n), self.params, self.cfg.dealias)

    def w(self, n: int) -> SpectralField:
        return w_field(self.snapshot(n), self.params)

    @cached_property
    def _ops(self) -> _Ops:
        return _Ops(self.grid, self.params, self.cfg)

    @cached_property
    def frozen(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodal ``zeta = f'(phi)`` and ``xi = f''(phi) w`` at every time level."""
        ops = self._ops
        zs, xs = [], []
        for c in self.phi:
            ph, lap = ops.state_nodal(c)
            z, x = kernels.frozen_terms(ops.fc, ph.ravel(), lap.ravel())
            zs.append(z)
            xs.append(x)
        return np.array(zs), np.array(xs)

    def means(self) -> np.ndarray:
        return self.phi[(slice(None),) + (0,) * self.grid.dim] / np.sqrt(self.grid.volume)


def simulate(phi0, u, params: ModelParams, cfg: StepperConfig, T: float,
             diagnostics: bool = True) -> StateTrajectory:
    """Integrate the state equation on ``[0, T]`` with ``round(T / dt)`` steps.

    Parameters
    ----------
    phi0 : SpectralField or GridField
        Initial datum.
    u : scalar, field or array
        Control; see :func:`control_schedule`.
    diagnostics : bool
        Record per-step energy, mean and nodal maximum.

    Raises
    ------
    BlowUpError
        If the nodal maximum exceeds ``cfg.blowup`` at some step.
    ValueError
        If ``T`` is not an integer multiple of ``dt``.
    """
    _check_params(params)
    grid, c0 = _as_coeffs(phi0)
    m = n_steps(T, cfg.dt)
    us = control_schedule(u, grid, m)
    u_hat = grid.forward(us)
    ops = _Ops(grid, params, cfg)

    phis = np.empty((m + 1,) + grid.modes)
    phis[0] = c0
    diag = {"energy": [], "mean": [], "max": [], "max_df": []} if diagnostics else {}
    x = c0
    for n in range(m):
        x_new, ph = ops.step(x, u_hat[n])
        big = float(np.max(np.abs(ph)))
        if not big <= cfg.blowup:
            raise BlowUpError(n * cfg.dt, big, cfg.blowup)
        if not np.all(np.isfinite(x_new)):
            raise BlowUpError((n + 1) * cfg.dt, np.inf, cfg.blowup)
        if diagnostics:
            _record(diag, grid, params, x, ph)
        phis[n + 1] = x_new
        x = x_new
    last = grid.inverse(x)
    big = float(np.max(np.abs(last)))
    if not big <= cfg.blowup:
        raise BlowUpError(m * cfg.dt, big, cfg.blowup)
    if diagnostics:
        _record(diag, grid, params, x, None)
        diag = {k: np.array(v) for k, v in diag.items()}
        need = float(np.max(diag["max_df"])) + abs(params.nu)
        if cfg.stab_A < need:
            log.warning("stab_A = %g is below max|f'(phi)| + |nu| = %g along the run", cfg.stab_A, need)
    times = np.arange(m + 1) * cfg.dt
    return StateTrajectory(grid, times, phis, us, params, cfg, diag)


def _record(diag, grid, params, c, ph):
    both = grid.inverse(np.stack([c, -grid.eigenvalues * c]))
    diag["energy"].append(_energy_raw(grid, params, c, (both[0], both[1])))
    diag["mean"].append(float(c[(0,) * grid.dim] / np.sqrt(grid.volume)))
    diag["max"].append(float(np.max(np.abs(both[0]))))
    diag["max_df"].append(float(np.max(np.abs(params.potential.df(both[0])))))


# -- diagnostics --------------------------------------------------------------------


def mass_ode_reference(mean0: float, u_mean, sigma: float, t: float, dt: float | None = None) -> float:
    """Exact solution of ``d/dt m + sigma m = u_mean`` at time ``t``.

    ``u_mean`` is a constant, or a sequence of per-step values held constant
    on intervals of length ``dt``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")

    def advance(m, ubar, tau):
        if sigma > 0:
            e = np.exp(-sigma * tau)
            return e * m + ubar / sigma * (1.0 - e)
        return m + ubar * tau

    if np.ndim(u_mean) == 0:
        return float(advance(mean0, float(u_mean), t))
    if dt is None:
        raise ValueError("piecewise-constant u_mean needs dt")
    m, left = float(mean0), float(t)
    for ubar in np.asarray(u_mean, dtype=float):
        if left <= 0:
            break
        tau = min(dt, left)
        m = advance(m, ubar, tau)
        left -= tau
    if left > 1e-12 * max(t, 1.0):
        raise ValueError("u_mean schedule shorter than t")
    return float(m)


def residual_energy_identity(traj: StateTrajectory) -> tuple[np.ndarray, float]:
    """Per-step residual of ``d/dt E + int |grad mu|^2 = int (u - sigma phi) mu``.

    The time derivative is the one-sided difference of the energy over the
    step; the dissipation and source integrals are averaged over the two
    step endpoints (with the step's control at both).

    Returns
    -------
    series : ndarray, shape (M,)
    max_abs : float
    """
    grid, params = traj.grid, traj.params
    om = grid.eigenvalues
    sig = params.sigma
    E = traj.diagnostics.get("energy")
    if E is None or len(E) != traj.n_steps + 1:
        E = np.array([_energy_raw(grid, params, c) for c in traj.phi])
    mus = [traj.mu(n).coeffs for n in range(traj.n_steps + 1)]
    diss = np.array([float(np.sum(om * mu * mu)) for mu in mus])
    u_hat = grid.forward(traj.u)
    res = np.empty(traj.n_steps)
    for n in range(traj.n_steps):
        s0 = float(np.sum((u_hat[n] - sig * traj.phi[n]) * mus[n]))
        s1 = float(np.sum((u_hat[n] - sig * traj.phi[n + 1]) * mus[n + 1]))
        res[n] = (E[n + 1] - E[n]) / traj.dt + 0.5 * (diss[n] + diss[n + 1]) - 0.5 * (s0 + s1)
    return res, float(np.max(np.abs(res))) if res.size else 0.0
