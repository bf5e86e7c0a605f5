"""Open-loop trajectory optimization of the cubic plunge power profile.

The plant model is frozen; only (phi2, phi3, phi4) move.  phi1 stays at the
machine's idle draw so the profile is continuous with pre-contact power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adjoint import LossReport, control_objective
from .errors import ConfigurationError, ControlInfeasible
from .model import ThermalModel
from .ode import RolloutGrid, Trajectory, rollout
from .optim import adam, lbfgs, safe_eval
from .profiles import KW, CubicProfile
from .sysid import mape

REGIMES = {
    "fast": (1.0, 1.0e3, 1.0e6, 1.0e3),
    "slow": (1.0, 1.0e3, 1.0e7, 1.0e3),
}
# optimizer works on (phi2*10, phi3*1e3, phi4*1e5), kW units
PHI_SCALE = np.array([10.0, 1.0e3, 1.0e5])
DEFAULT_PHI_FREE_KW = (0.1, 0.0, 0.0)

# Reference batch profiles from the plunge trials, kW units: (batch, condition) -> (phi1..phi4)
REFERENCE_PROFILES = {
    (1, "775C/Fast"): (1.0, 1.14e-1, -1.80e-3, 7.93e-6),
    (1, "750C/Fast"): (1.0, 9.53e-2, -1.47e-3, 6.63e-6),
    (2, "775C/Fast"): (1.0, 9.80e-2, -1.40e-3, 5.87e-6),
    (2, "750C/Fast"): (1.0, 9.43e-2, -1.37e-3, 5.78e-6),
    (2, "775C/Slow"): (1.0, 6.45e-2, -6.61e-4, 2.13e-6),
    (2, "750C/Slow"): (1.0, 6.42e-2, -7.39e-4, 2.58e-6),
}


@dataclass(frozen=True)
class ControlSpec:
    setpoint: float
    T0: float
    weights: tuple = REGIMES["fast"]
    t_end: float = 120.0
    dt: float = 0.1
    phi1_fixed: float = 1000.0  # W
    regime: str = "fast"
    smoothing: str = "squared"

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != 4 or any(not (v >= 0 and math.isfinite(v)) for v in w):
            raise ConfigurationError("control weights must be four nonnegative numbers")
        object.__setattr__(self, "weights", w)
        if not self.setpoint > self.T0:
            raise ConfigurationError("setpoint must exceed the initial temperature")
        if not (self.t_end > 0 and self.dt > 0):
            raise ConfigurationError("t_end and dt must be positive")
        if self.smoothing not in ("squared", "literal"):
            raise ConfigurationError("smoothing must be 'squared' or 'literal'")
        if self.regime not in ("fast", "slow", "custom"):
            raise ConfigurationError("regime must be fast, slow or custom")

    @classmethod
    def for_regime(cls, regime: str, setpoint, T0, **kw) -> "ControlSpec":
        if regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {regime!r}")
        return cls(setpoint=setpoint, T0=T0, weights=REGIMES[regime], regime=regime, **kw)

    @property
    def grid(self) -> RolloutGrid:
        return RolloutGrid(0.0, self.t_end, self.dt)


@dataclass
class ControlResult:
    phi_kw: tuple
    trajectory: Trajectory
    loss: LossReport
    handoff: float | None
    max_temperature: float
    spec: ControlSpec
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def end_temperature(self) -> float:
        return self.trajectory.end_temperature

    @property
    def profile(self) -> CubicProfile:
        return CubicProfile.from_kw(self.phi_kw)


def control_loss(model: ThermalModel, phi_free_kw, spec: ControlSpec) -> LossReport:
    """Setpoint + energy + smoothing + overshoot loss and its gradient in kW coefficient units."""
    report, _ = control_objective(model, phi_free_kw, spec)
    return report


def detect_handoff(traj: Trajectory, setpoint, tol_fraction=0.01):
    """First sample time at which T >= setpoint * (1 - tol_fraction), else None."""
    hit = np.nonzero(np.asarray(traj.temperatures) >= setpoint * (1.0 - tol_fraction))[0]
    return float(traj.times[hit[0]]) if hit.size else None


def max_power_step(traj: Trajectory) -> float:
    """Largest |P(k+1) - P(k)| over the applied (clamped) power samples, W."""
    return float(np.max(np.abs(np.diff(traj.powers)))) if len(traj.powers) > 1 else 0.0


def optimize_profile(model: ThermalModel, spec: ControlSpec, init_phi_free_kw=DEFAULT_PHI_FREE_KW,
                     adam_iters=500, adam_lr=1e-3, lbfgs_tol=1e-8, lbfgs_max_iters=500) -> ControlResult:
    """Adam then L-BFGS on the scaled free coefficients; returns the best phi seen."""

    def objective(u):
        report, _ = control_objective(model, u / PHI_SCALE, spec)
        return report.total, report.gradient / PHI_SCALE

    u0 = np.asarray(init_phi_free_kw, dtype=float) * PHI_SCALE
    f0, g0 = safe_eval(objective, u0)
    best_u, best_f, best_g = u0, f0, g0
    history = [f0]
    if adam_iters > 0:
        res = adam(objective, u0, adam_iters, adam_lr)
        history.extend(res.history[1:])
        if res.fun < best_f:
            best_u, best_f, best_g = res.x, res.fun, res.grad
    if not math.isfinite(best_f):
        raise ControlInfeasible("no finite-loss profile found")
    res = lbfgs(objective, best_u, gtol=lbfgs_tol, max_iters=lbfgs_max_iters, f0=best_f, g0=best_g)
    history.extend(res.history)
    if res.fun <= best_f:
        best_u, best_f = res.x, res.fun
    phi_free = best_u / PHI_SCALE
    report, traj = control_objective(model, phi_free, spec)
    phi_kw = (spec.phi1_fixed / KW, *(float(v) for v in phi_free))
    return ControlResult(
        phi_kw=phi_kw,
        trajectory=traj,
        loss=report,
        handoff=detect_handoff(traj, spec.setpoint),
        max_temperature=traj.max_temperature,
        spec=spec,
        message=res.message,
        history=history,
    )


@dataclass
class ProfileEvaluation:
    end_temperature: float
    max_temperature: float
    handoff: float | None
    mape: float | None
    trajectory: Trajectory


def evaluate_profile(plant, phi_kw, spec: ControlSpec, reference: Trajectory | None = None,
                     tol_fraction=0.01) -> ProfileEvaluation:
    """Replay a cubic profile open-loop on ``plant`` (model or truth plant).

    When ``reference`` is given, MAPE of this rollout against it is computed
    from t = 0 up to the reference's handoff (or its end if it never hands off).
    """
    traj = rollout(plant, CubicProfile.from_kw(phi_kw), spec.T0, spec.grid)
    handoff = detect_handoff(traj, spec.setpoint, tol_fraction)
    err = None
    if reference is not None:
        ref_T = np.interp(traj.times, reference.times, reference.temperatures)
        t_h = detect_handoff(reference, spec.setpoint, tol_fraction)
        window = traj.times <= (t_h if t_h is not None else traj.times[-1]) + 1e-9
        err = mape(traj.temperatures[window], ref_T[window])
    return ProfileEvaluation(traj.end_temperature, traj.max_temperature, handoff, err, traj)
