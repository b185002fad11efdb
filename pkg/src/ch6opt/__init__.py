"""Sixth-order Cahn-Hilliard state solver, sensitivities and optimal control."""

from .control import (
    BoxConstraints,
    ControlProblem,
    CostConfig,
    OptimizeOptions,
    OptimizeResult,
    cost,
    gradient_check,
    optimize,
    project_box,
    reduced_gradient,
    stationarity_residual,
)
from .potential import ModelParams, Potential, eval_g, eval_gamma, make_potential, validate_assumptions
from .sensitivity import solve_adjoint, solve_linearized, taylor_remainder_test
from .spectral import (
    Grid,
    GridField,
    SpectralField,
    build_grid,
    inner_h,
    laplacian,
    mean,
    neumann_inverse,
    norm,
    to_nodal,
    to_spectral,
)
from .state import (
    BlowUpError,
    StateTrajectory,
    StepperConfig,
    chemical_potential,
    energy,
    mass_ode_reference,
    residual_energy_identity,
    simulate,
    step,
    w_field,
)

__version__ = "0.1.0"
