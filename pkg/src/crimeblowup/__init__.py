"""Radially symmetric solvers for the reduced crime model and its nonlocal limit problem."""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    GridMismatchError,
    Profile,
    RadialGrid,
    integrate,
    linf_norm,
    lp_norm,
    make_grid,
    radial_derivative,
    radial_flux_divergence,
    radial_laplacian,
)
from .initial_data import InitialDataParams, construct_w0, verify_w0  # noqa: E402
from .scalar import (  # noqa: E402
    ScalarMode,
    ScalarState,
    StepControl,
    detect_T1,
    k_of,
    ode_minorant_blowup_time,
    reaction_term,
    run,
    step,
)
from .coupled import CoupledControl, CoupledState, quasi_steady_residual, run_coupled, step_coupled  # noqa: E402

__all__ = [
    "__version__",
    "CoupledControl",
    "CoupledState",
    "GridMismatchError",
    "InitialDataParams",
    "Profile",
    "RadialGrid",
    "ScalarMode",
    "ScalarState",
    "StepControl",
    "construct_w0",
    "detect_T1",
    "integrate",
    "k_of",
    "linf_norm",
    "lp_norm",
    "make_grid",
    "ode_minorant_blowup_time",
    "quasi_steady_residual",
    "radial_derivative",
    "radial_flux_divergence",
    "radial_laplacian",
    "reaction_term",
    "run",
    "run_coupled",
    "step",
    "step_coupled",
    "verify_w0",
]
