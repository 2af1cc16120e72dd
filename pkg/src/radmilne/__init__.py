"""Solvers and verification suite for the nonlinear Milne problem of
radiative heat transfer: a second-order temperature ODE coupled to a
kinetic transport equation on a slab, with monotone-iteration and
contraction-mapping construction of solutions and numerical checks of
the weighted energy, decay and spectral estimates."""

from .discretization import (BoundaryData, Grid, IntensityField,
                             TemperatureField, bracket, ddx, moment)
from .elliptic import (PhiExtension, green_apply, ode_monotone_check,
                       solve_monotone_ode)
from .errors import ContractViolationError, IterationFailureError
from .linearized import (LinearizedSolution, delta_constant, n_beta, phi_map,
                         solve_linearized_bounded, solve_linearized_general)
from .milne import (HalfspaceExtension, MilneSolution, SubSolution,
                    extend_to_halfspace, scaled_subsolution,
                    solve_bounded_milne, uniqueness_probe,
                    validate_subsolution, verify_monotone_ladder,
                    zero_subsolution)
from .spectral import (PerturbationStability, RayleighResult, SpectralReport,
                       boundary_gap, build_report, compute_A0, compute_A1,
                       compute_Cb, m_alpha, perturbation_stability,
                       rayleigh_test)
from .transport import (BoundedSourceOperator, monotone_check, solve_bounded,
                        solve_halfspace)
from .diagnostics import (ConservationReport, conservation_report,
                          decay_envelope, intensity_decay,
                          weighted_estimate_nonlinear)

__version__ = "0.1.0"

__all__ = [
    "BoundaryData", "Grid", "IntensityField", "TemperatureField",
    "bracket", "ddx", "moment",
    "PhiExtension", "green_apply", "ode_monotone_check", "solve_monotone_ode",
    "ContractViolationError", "IterationFailureError",
    "LinearizedSolution", "delta_constant", "n_beta", "phi_map",
    "solve_linearized_bounded", "solve_linearized_general",
    "HalfspaceExtension", "MilneSolution", "SubSolution",
    "extend_to_halfspace", "scaled_subsolution", "solve_bounded_milne",
    "uniqueness_probe", "validate_subsolution", "verify_monotone_ladder",
    "zero_subsolution",
    "PerturbationStability", "RayleighResult", "SpectralReport",
    "boundary_gap", "build_report", "compute_A0", "compute_A1", "compute_Cb",
    "m_alpha", "perturbation_stability", "rayleigh_test",
    "BoundedSourceOperator", "monotone_check", "solve_bounded",
    "solve_halfspace",
    "ConservationReport", "conservation_report", "decay_envelope",
    "intensity_decay", "weighted_estimate_nonlinear",
    "__version__",
]
