"""Linearized (forward) and adjoint (backward) systems on a frozen state.

Both solvers reuse the state stepper's per-mode denominators.  With the
nodal coefficients ``zeta = f'(phi)`` and ``xi = f''(phi) w`` taken from the
state trajectory at the start of each step:

linearized, for a control variation ``h``::

    d/dt psi = lap eta - sigma psi + h
    eta   = -lap omega + xi psi + (zeta + nu) omega
    omega = -lap psi + zeta psi,           psi(0) = 0

adjoint, integrated backward from ``p(T) = alpha2 (phi(T) - phi_Omega)``::

    -d/dt p = lap r - sigma p - xi q - zeta r + rho1
    q = -lap p,   r = -lap q + (nu + zeta) q,   rho1 = alpha1 (phi - phi_Q)

The tracking source ``rho1`` is sampled at the same left-endpoint nodes
``t_0 .. t_{M-1}`` as the cost functional, so the backward step leaving
``t_M`` carries no tracking source.  The control gradient on
``[t_n, t_{n+1})`` pairs with ``p(t_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .spectral import Grid, SpectralField
from .state import StateTrajectory, control_schedule, simulate

__all__ = [
    "LinTrajectory",
    "AdjTrajectory",
    "solve_linearized",
    "solve_adjoint",
    "taylor_remainder_test",
    "TaylorReport",
]


@dataclass(frozen=True, eq=False)
class LinTrajectory:
    grid: Grid
    times: np.ndarray
    psi: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)

    def snapshot(self, n: int) -> SpectralField:
        return SpectralField(self.grid, self.psi[n])


@dataclass(frozen=True, eq=False)
class AdjTrajectory:
    grid: Grid
    times: np.ndarray
    p: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)

    def snapshot(self, n: int) -> SpectralField:
        return SpectralField(self.grid, self.p[n])

    def p_nodal(self) -> np.ndarray:
        """Nodal ``p`` at ``t_0 .. t_{M-1}`` (one field per control step)."""
        return self.grid.inverse(self.p[:-1])


def _lin_explicit(ops, zeta, xi, psi):
    """Spectral ``L`` with ``eta = lap^2 psi + L`` and nodal ``zeta psi``."""
    om = ops.om
    both = ops.nodal(np.stack([psi, -om * psi]))
    shape = both.shape[1:]
    a, b = kernels.lin_terms(ops.nu, zeta, xi, both[0].ravel(), both[1].ravel())
    hat = ops.spectral(np.stack([a.reshape(shape), b.reshape(shape)]))
    return om * hat[0] + hat[1], hat[0]


def solve_linearized(state: StateTrajectory, h) -> LinTrajectory:
    """Directional derivative of the control-to-state map along ``h``.

    ``h`` is any control-like input accepted by
    :func:`~ch6opt.state.control_schedule`.
    """
    grid, ops, m = state.grid, state._ops, state.n_steps
    hs = control_schedule(h, grid, m)
    h_hat = grid.forward(hs)
    zeta, xi = state.frozen
    om = ops.om

    psi = np.zeros((m + 1,) + grid.modes)
    eta = np.empty_like(psi)
    omg = np.empty_like(psi)
    for n in range(m + 1):
        L, a_hat = _lin_explicit(ops, zeta[n], xi[n], psi[n])
        omg[n] = om * psi[n] + a_hat
        eta[n] = om**2 * psi[n] + L
        if n < m:
            psi[n + 1] = ops.advance(psi[n], -om * L, h_hat[n])
    return LinTrajectory(grid, state.times.copy(), psi, eta, omg)


def _adj_explicit(ops, zeta, xi, p):
    """Explicit adjoint terms at ``p`` plus spectral ``q`` and ``r``."""
    om = ops.om
    q = om * p
    both = ops.nodal(np.stack([q, om * q]))
    shape = both.shape[1:]
    a, r, b = kernels.adj_terms(ops.nu, zeta, xi, both[0].ravel(), both[1].ravel())
    hat = ops.spectral(np.stack([a.reshape(shape), b.reshape(shape)]))
    return -om * hat[0] + hat[1], q, om * q + hat[0]


def solve_adjoint(state: StateTrajectory, cost) -> AdjTrajectory:
    """Backward adjoint solve for the tracking cost ``cost`` (a ``CostConfig``)."""
    grid, ops, m = state.grid, state._ops, state.n_steps
    if state.phi.shape[0] != m + 1:
        raise ValueError("state trajectory has no terminal snapshot")
    zeta, xi = state.frozen
    tq = cost.target_Q_coeffs(grid, m)
    t_om = cost.target_Omega_coeffs(grid)

    p = np.empty((m + 1,) + grid.modes)
    q = np.empty_like(p)
    r = np.empty_like(p)
    p[m] = cost.alpha2 * (state.phi[m] - t_om)
    for n in range(m, -1, -1):
        expl, q[n], r[n] = _adj_explicit(ops, zeta[n], xi[n], p[n])
        if n == 0:
            break
        src = cost.alpha1 * (state.phi[n] - tq[n]) if (n < m and cost.alpha1) else None
        p[n - 1] = ops.advance(p[n], expl, src)
    return AdjTrajectory(grid, state.times.copy(), p, q, r)


@dataclass(frozen=True)
class TaylorReport:
    eps: tuple[float, ...]
    remainders: tuple[float, ...]
    ratios: tuple[float, ...]

    @property
    def spread(self) -> float:
        """max/min of the ratios ``R(eps) / eps**2``."""
        r = np.asarray(self.ratios)
        if np.all(r == 0):
            return 1.0
        return float(np.max(r) / np.min(r)) if np.min(r) > 0 else np.inf


def taylor_remainder_test(u, h, eps_list: Sequence[float], params, cfg, phi0, T: float) -> TaylorReport:
    """Remainders ``R(eps) = ||S(u + eps h) - S(u) - eps psi||_{C0 H}``.

    ``S`` maps a control to the whole state trajectory and ``psi`` solves the
    linearized system along ``h``; differentiability predicts bounded
    ``R(eps) / eps**2``.
    """
    base = simulate(phi0, u, params, cfg, T, diagnostics=False)
    m = base.n_steps
    us = control_schedule(u, base.grid, m)
    hs = control_schedule(h, base.grid, m)
    lin = solve_linearized(base, hs)
    rems, ratios = [], []
    for eps in eps_list:
        pert = simulate(phi0, us + eps * hs, params, cfg, T, diagnostics=False)
        diff = pert.phi - base.phi - eps * lin.psi
        axes = tuple(range(1, diff.ndim))
        R = float(np.max(np.sqrt(np.sum(diff * diff, axis=axes))))
        rems.append(R)
        ratios.append(R / eps**2)
    return TaylorReport(tuple(float(e) for e in eps_list), tuple(rems), tuple(ratios))
