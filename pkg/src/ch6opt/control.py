"""Tracking cost, reduced gradient and projected-gradient optimisation.

Controls are nodal arrays of shape ``(M, *grid.modes)``, piecewise constant
in time on the step grid.  Time integrals use the left-endpoint rule, which
is exact for the control and matches what the adjoint differentiates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .potential import ModelParams
from .sensitivity import AdjTrajectory, solve_adjoint
from .spectral import Grid, GridField, SpectralField
from .state import BlowUpError, StateTrajectory, StepperConfig, control_schedule, n_steps, simulate

__all__ = [
    "CostConfig",
    "BoxConstraints",
    "ControlProblem",
    "OptimizeOptions",
    "OptimizeResult",
    "GradientCheck",
    "OptimizationError",
    "cost",
    "reduced_gradient",
    "project_box",
    "stationarity_residual",
    "l2q_inner",
    "l2q_norm",
    "optimize",
    "gradient_check",
]

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"forward solve failed at iterate {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause


def _target_coeffs(target, grid: Grid) -> np.ndarray:
    if isinstance(target, GridField):
        target = target.spectral()
    if isinstance(target, SpectralField):
        if target.grid != grid:
            raise ValueError("target lives on a different grid")
        return target.coeffs
    t = np.asarray(target, dtype=float)
    if t.ndim == 0:
        return grid.constant(float(t)).coeffs
    if t.shape[-grid.dim:] != grid.modes:
        raise ValueError(f"target shape {t.shape} does not match grid {grid.modes}")
    # nodal arrays (single field or per-step stack)
    return grid.forward(t)


@dataclass(frozen=True, eq=False)
class CostConfig:
    """Weights and targets of the tracking functional.

    ``phi_Q`` is a constant, a field, or a per-step nodal stack of shape
    ``(M + 1, *modes)`` (or ``(M, *modes)``); ``phi_Omega`` a constant or a
    field.
    """

    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float = 0.0
    phi_Q: object = 0.0
    phi_Omega: object = 0.0

    def __post_init__(self):
        a = (self.alpha1, self.alpha2, self.alpha3)
        if any(not np.isfinite(x) or x < 0 for x in a):
            raise ValueError(f"cost weights must be >= 0, got {a}")
        if not any(a):
            raise ValueError("cost weights must not all be zero")

    def target_Q_coeffs(self, grid: Grid, m: int) -> np.ndarray:
        c = _target_coeffs(self.phi_Q, grid)
        if c.shape == grid.modes:
            return np.broadcast_to(c, (m + 1,) + grid.modes)
        if c.shape[0] == m:
            c = np.concatenate([c, c[-1:]])
        if c.shape[0] != m + 1:
            raise ValueError(f"phi_Q has {c.shape[0]} time levels, expected {m + 1}")
        return c

    def target_Omega_coeffs(self, grid: Grid) -> np.ndarray:
        c = _target_coeffs(self.phi_Omega, grid)
        if c.shape != grid.modes:
            raise ValueError("phi_Omega must be a single field")
        tot = float(np.sum(c * c))
        hi = c[tuple(slice(n // 2, None) for n in grid.modes)]
        if tot > 0 and float(np.sum(hi * hi)) > 1e-6 * tot:
            log.warning("phi_Omega carries noticeable energy in the upper half of the spectrum; "
                        "the adjoint terminal datum is expected to be smooth")
        return c


@dataclass(frozen=True, eq=False)
class BoxConstraints:
    """Pointwise bounds ``u_min <= u <= u_max`` (constants or arrays)."""

    u_min: object = -np.inf
    u_max: object = np.inf

    def __post_init__(self):
        lo = np.asarray(self.u_min, dtype=float)
        hi = np.asarray(self.u_max, dtype=float)
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("box bounds must not be NaN")
        if np.any(lo > hi):
            raise ValueError("admissible set is empty: u_min > u_max somewhere")
        object.__setattr__(self, "u_min", lo)
        object.__setattr__(self, "u_max", hi)

    def contains(self, u: np.ndarray) -> bool:
        return bool(np.all(u >= self.u_min) and np.all(u <= self.u_max))


def l2q_inner(a: np.ndarray, b: np.ndarray, grid: Grid, dt: float) -> float:
    """``int_Q a b`` for nodal schedules (left-endpoint in time, midpoint in space)."""
    return float(dt * grid.cell_volume * np.sum(a * b))


def l2q_norm(a: np.ndarray, grid: Grid, dt: float) -> float:
    return float(np.sqrt(max(l2q_inner(a, a, grid, dt), 0.0)))


def cost(state: StateTrajectory, u: Optional[np.ndarray], cfg: CostConfig) -> float:
    """``J = a1/2 int_Q |phi - phi_Q|^2 + a2/2 int |phi(T) - phi_Omega|^2 + a3/2 int_Q |u|^2``."""
    grid, m, dt = state.grid, state.n_steps, state.dt
    u = state.u if u is None else control_schedule(u, grid, m)
    J = 0.0
    if cfg.alpha1:
        d = state.phi[:m] - cfg.target_Q_coeffs(grid, m)[:m]
        J += 0.5 * cfg.alpha1 * dt * float(np.sum(d * d))
    if cfg.alpha2:
        d = state.phi[m] - cfg.target_Omega_coeffs(grid)
        J += 0.5 * cfg.alpha2 * float(np.sum(d * d))
    if cfg.alpha3:
        J += 0.5 * cfg.alpha3 * l2q_inner(u, u, grid, dt)
    return J


def reduced_gradient(u: np.ndarray, adjoint: AdjTrajectory, alpha3: float) -> np.ndarray:
    """``alpha3 u + p`` per control step (nodal)."""
    p = adjoint.p_nodal()
    return alpha3 * np.asarray(u, dtype=float) + p


def project_box(u: np.ndarray, box: BoxConstraints) -> np.ndarray:
    """Nodal clamp onto ``[u_min, u_max]`` (the L2 projection for box sets)."""
    return np.clip(u, box.u_min, box.u_max)


def stationarity_residual(u: np.ndarray, gradient: np.ndarray, box: BoxConstraints, grid: Grid,
                          dt: float, trial_step: float = 1.0) -> float:
    """``||u - P(u - s g)||_{L2(Q)} / s``; zero iff the variational inequality holds."""
    if not trial_step > 0:
        raise ValueError("trial_step must be > 0")
    return l2q_norm(u - project_box(u - trial_step * gradient, box), grid, dt) / trial_step


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Initial datum, model, discretisation, cost and admissible box."""

    phi0: SpectralField
    params: ModelParams
    stepper: StepperConfig
    T: float
    cost: CostConfig
    box: BoxConstraints = field(default_factory=BoxConstraints)

    @property
    def grid(self) -> Grid:
        return self.phi0.grid

    @property
    def n_steps(self) -> int:
        return n_steps(self.T, self.stepper.dt)

    def schedule(self, u) -> np.ndarray:
        return control_schedule(u, self.grid, self.n_steps)

    def state(self, u) -> StateTrajectory:
        return simulate(self.phi0, u, self.params, self.stepper, self.T, diagnostics=False)

    def objective(self, u) -> tuple[float, StateTrajectory]:
        st = self.state(u)
        return cost(st, st.u, self.cost), st

    def gradient(self, u, state: Optional[StateTrajectory] = None) -> tuple[np.ndarray, AdjTrajectory]:
        st = self.state(u) if state is None else state
        adj = solve_adjoint(st, self.cost)
        return reduced_gradient(st.u, adj, self.cost.alpha3), adj

    def inner(self, a, b) -> float:
        return l2q_inner(a, b, self.grid, self.stepper.dt)

    def norm(self, a) -> float:
        return l2q_norm(a, self.grid, self.stepper.dt)


@dataclass(frozen=True)
class OptimizeOptions:
    max_iters: int = 200
    step0: float = 1.0
    armijo_c1: float = 1e-4
    shrink: float = 0.5
    tol: float = 1e-4
    grow: float = 2.0
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.step0 > 0:
            raise ValueError("step0 must be > 0")
        if not 0 < self.armijo_c1 < 1:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.tol >= 0:
            raise ValueError("tol must be >= 0")
        if not self.grow >= 1:
            raise ValueError("grow must be >= 1")


@dataclass(eq=False)
class OptimizeResult:
    u_star: np.ndarray
    J_history: list
    stationarity_history: list
    step_history: list
    state: StateTrajectory
    adjoint: AdjTrajectory
    gradient: np.ndarray
    reason: str
    iterations: int
    iterates: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.reason == "converged"


def optimize(u0, problem: ControlProblem, opts: OptimizeOptions = OptimizeOptions(),
             keep_iterates: bool = False, callback=None) -> OptimizeResult:
    """Projected gradient descent with Armijo backtracking.

    Each iteration tries ``u(s) = P(u - s g)`` starting from the previous
    accepted step times ``opts.grow`` and shrinking by ``opts.shrink`` until

        J(u(s)) <= J(u) + c1 <g, u(s) - u>   and   J(u(s)) < J(u).

    Terminates when the stationarity residual (unit trial step) drops to
    ``opts.tol`` ("converged"), after ``opts.max_iters`` iterations
    ("max_iters"), or when no step is accepted ("step-collapse").

    Raises
    ------
    OptimizationError
        If the state solve blows up at an accepted iterate.
    """
    box = problem.box
    u = project_box(problem.schedule(u0), box)
    try:
        J, st = problem.objective(u)
    except BlowUpError as exc:
        raise OptimizationError(0, exc) from exc
    g, adj = problem.gradient(u, st)
    res = stationarity_residual(u, g, box, problem.grid, problem.stepper.dt)
    J_hist, r_hist, s_hist = [J], [res], []
    iterates = [u.copy()] if keep_iterates else []
    s = opts.step0
    reason = "max_iters"
    k = 0
    while True:
        if res <= opts.tol:
            reason = "converged"
            break
        if k >= opts.max_iters:
            break
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = project_box(u - s * g, box)
            d = trial - u
            slope = problem.inner(g, d)
            try:
                Jt, st_t = problem.objective(trial)
            except BlowUpError:
                s *= opts.shrink
                continue
            if Jt <= J + opts.armijo_c1 * slope and Jt < J:
                accepted = True
                break
            s *= opts.shrink
        if not accepted:
            reason = "step-collapse"
            break
        k += 1
        u, J, st = trial, Jt, st_t
        g, adj = problem.gradient(u, st)
        res = stationarity_residual(u, g, box, problem.grid, problem.stepper.dt)
        J_hist.append(J)
        r_hist.append(res)
        s_hist.append(s)
        if keep_iterates:
            iterates.append(u.copy())
        if callback is not None:
            callback(k, J, res, s)
        s *= opts.grow
    return OptimizeResult(u, J_hist, r_hist, s_hist, st, adj, g, reason, k, iterates)


@dataclass(frozen=True)
class GradientCheck:
    adjoint: np.ndarray
    finite_difference: np.ndarray
    eps: float

    @property
    def rel_errors(self) -> np.ndarray:
        return np.abs(self.adjoint - self.finite_difference) / np.maximum(np.abs(self.finite_difference), 1e-300)

    @property
    def max_rel_error(self) -> float:
        return float(np.max(self.rel_errors))


def random_directions(grid: Grid, m: int, count: int, seed: int = 0, modes: int = 4) -> list[np.ndarray]:
    """Smooth random control directions: a few low cosine modes with linear time profiles."""
    rng = np.random.default_rng(seed)
    t = (np.arange(m) + 0.5) / m
    out = []
    keep = tuple(slice(0, min(modes, n)) for n in grid.modes)
    for _ in range(count):
        c0 = np.zeros(grid.modes)
        c1 = np.zeros(grid.modes)
        c0[keep] = rng.standard_normal(c0[keep].shape)
        c1[keep] = rng.standard_normal(c1[keep].shape)
        coeffs = c0[None] + (t - 0.5).reshape((m,) + (1,) * grid.dim) * c1[None]
        h = grid.inverse(coeffs)
        out.append(h / np.sqrt(dt_free_norm2(h, grid, m)))
    return out


def dt_free_norm2(h: np.ndarray, grid: Grid, m: int) -> float:
    return float(grid.cell_volume * np.sum(h * h) / m)


def gradient_check(problem: ControlProblem, u, directions: int = 5, eps: float = 1e-4,
                   seed: int = 0) -> GradientCheck:
    """Compare adjoint directional derivatives with central differences of ``J``."""
    u = problem.schedule(u)
    g, _ = problem.gradient(u)
    hs = random_directions(problem.grid, problem.n_steps, directions, seed)
    adj = np.array([problem.inner(g, h) for h in hs])
    fd = np.array([(problem.objective(u + eps * h)[0] - problem.objective(u - eps * h)[0]) / (2 * eps)
                   for h in hs])
    return GradientCheck(adj, fd, eps)
