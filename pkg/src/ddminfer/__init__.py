"""First-passage-time densities and drift inference for diffusion decision models.

The package covers three layers:

- closed-form densities and moments for constant and single-switch drift,
  plus the two-boundary constant-drift series density (:mod:`ddminfer.analytic`);
- a Kolmogorov-forward-equation solver for arbitrary piecewise-constant
  drift (:mod:`ddminfer.piecewise`), used as the exact likelihood engine;
- simulators (:mod:`ddminfer.simulate`) and estimators
  (:mod:`ddminfer.inference`) that contrast exact maximum likelihood with
  the time-averaged drift approximation (TADA).

``ddminfer.cli`` wires these into reproducible experiments.
"""

__version__ = "0.1.0"

from .analytic import (
    OneBoundaryModel,
    SwitchModel,
    TwoBoundaryModel,
    fptd_addm_switch,
    fptd_one_boundary,
    fptd_two_boundary,
    npd,
    survival_after_T,
    tada_density,
    truncated_mean,
)
from .inference import (
    ADDMParams,
    EstimationResult,
    asymptotic_tada_limit,
    effective_drift,
    fit_addm,
    mle_one_boundary,
    mle_two_boundary,
    tada_estimator_closed_form,
)
from .piecewise import FptdCurve, PiecewiseDrift, SolverConfig, loglik_trial, solve_forward
from .simulate import (
    FixationConfig,
    FixationTrajectory,
    RngSeed,
    Trial,
    sample_fixations,
    sample_ratings,
    simulate_addm_dataset,
    simulate_one_boundary,
    simulate_two_boundary,
)

__all__ = [
    "ADDMParams",
    "EstimationResult",
    "FixationConfig",
    "FixationTrajectory",
    "FptdCurve",
    "OneBoundaryModel",
    "PiecewiseDrift",
    "RngSeed",
    "SolverConfig",
    "SwitchModel",
    "Trial",
    "TwoBoundaryModel",
    "asymptotic_tada_limit",
    "effective_drift",
    "fit_addm",
    "fptd_addm_switch",
    "fptd_one_boundary",
    "fptd_two_boundary",
    "loglik_trial",
    "mle_one_boundary",
    "mle_two_boundary",
    "npd",
    "sample_fixations",
    "sample_ratings",
    "simulate_addm_dataset",
    "simulate_one_boundary",
    "simulate_two_boundary",
    "solve_forward",
    "survival_after_T",
    "tada_density",
    "tada_estimator_closed_form",
    "truncated_mean",
    "__version__",
]
