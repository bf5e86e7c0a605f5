"""Neural lumped thermal model, discrete-adjoint fitting and cubic power-profile control
for the friction-stir-processing plunge."""
from .control import (REGIMES, REFERENCE_PROFILES, ControlResult, ControlSpec, control_loss,
                      detect_handoff, evaluate_profile, optimize_profile)
from .adjoint import LossReport, finite_diff_check, grad_control, grad_sysid
from .errors import (ConfigurationError, ControlInfeasible, DomainError, FitFailed, FSPError,
                     IntegrationDiverged, MetricUndefined, RunFileError, SpecInvalid)
from .model import EfficiencyNetwork, ThermalModel, eval_efficiency, eval_rhs
from .ode import RolloutGrid, Trajectory, rk4_step, rollout
from .profiles import CubicProfile, LinearProfile, TabulatedProfile, eval_power
from .synth import SyntheticPlant, SyntheticPlantSpec, default_dataset, generate_runs
from .sysid import ExperimentRun, FitConfig, FitReport, compute_mae, compute_mape, fit

__version__ = "0.1.0"
