"""Noise-assisted feedback stabilization of the Brockett integrator.

The package splits into an SDE toolbox (:mod:`stostab.sde`), Lyapunov
machinery (:mod:`stostab.lyapunov`), the Brockett plant with its diffusion
design (:mod:`stostab.brockett`), numerical verification routines
(:mod:`stostab.verify`), and a command-line front end (:mod:`stostab.cli`).
"""

from .brockett import (CONTINUITY_RADII, ClosedLoop, DesignReport,
                       DiffusionDesign, SystemParams, check_design_conditions,
                       closed_loop, controllability_rank, diffusion_b,
                       eigs_sym2, g_matrix, h_matrix, prefeedback_v,
                       randomized_drift, sigma, sigma_jacobian, sontag_terms)
from .lyapunov import (GeneratorBreakdown, ScalarField, fd_gradient,
                       fd_hessian, field_from_value, generator, sontag_control,
                       v1_eval, v1_field, v1_gradient, v1_hessian, v2_eval,
                       v2_field, v2_gradient, v2_hessian)
from .sde import (ITO, STRATONOVICH, IntegrationDiverged, PiecewiseLinearNoise,
                  SdeSystem, Trajectory, WienerPath, euler_maruyama,
                  heun_stratonovich, ode_drive, piecewise_linear_lift,
                  sample_wiener, stratonovich_to_ito, trajectory_to_csv)
from .verify import (FormulaCheckReport, GridSpec, ScanReport, SclfReport,
                     SmallControlReport, StabilityReport, WongZakaiReport,
                     lfv2_formula_check, mc_stability, scan_generator,
                     sclf_condition_check, small_control_scan,
                     strong_order_estimate, wilson_interval,
                     wong_zakai_experiment, write_scan_csv, write_summary)

__version__ = "0.1.0"

__all__ = [
    "ITO", "STRATONOVICH", "IntegrationDiverged", "PiecewiseLinearNoise",
    "SdeSystem", "Trajectory", "WienerPath", "euler_maruyama",
    "heun_stratonovich", "ode_drive", "piecewise_linear_lift", "sample_wiener",
    "stratonovich_to_ito", "trajectory_to_csv",
    "GeneratorBreakdown", "ScalarField", "fd_gradient", "fd_hessian",
    "field_from_value", "generator", "sontag_control", "v1_eval", "v1_field",
    "v1_gradient", "v1_hessian", "v2_eval", "v2_field", "v2_gradient",
    "v2_hessian",
    "CONTINUITY_RADII", "ClosedLoop", "DesignReport", "DiffusionDesign",
    "SystemParams", "check_design_conditions", "closed_loop",
    "controllability_rank", "diffusion_b", "eigs_sym2", "g_matrix", "h_matrix",
    "prefeedback_v", "randomized_drift", "sigma", "sigma_jacobian",
    "sontag_terms",
    "FormulaCheckReport", "GridSpec", "ScanReport", "SclfReport",
    "SmallControlReport", "StabilityReport", "WongZakaiReport",
    "lfv2_formula_check", "mc_stability", "scan_generator",
    "sclf_condition_check", "small_control_scan", "strong_order_estimate",
    "wilson_interval", "wong_zakai_experiment", "write_scan_csv",
    "write_summary",
    "__version__",
]
