"""System identification: fit the neural thermal model to measured plunge runs."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .adjoint import prepare_runs, sysid_loss
from .errors import ConfigurationError, FitFailed, MetricUndefined
from .model import ThermalModel
from .ode import RolloutGrid, rollout
from .optim import adam, lbfgs, safe_eval
from .profiles import TabulatedProfile


@dataclass(frozen=True, eq=False)
class ExperimentRun:
    """One plunge time series on a uniform grid: times (s), temps (degC), powers (W)."""

    id: str
    times: np.ndarray
    measured_temps: np.ndarray
    measured_powers: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        T = np.array(self.measured_temps, dtype=float)
        P = np.array(self.measured_powers, dtype=float)
        if not (t.shape == T.shape == P.shape) or t.ndim != 1 or t.size < 2:
            raise ConfigurationError(f"run {self.id!r}: need >= 2 equal-length samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(T)) and np.all(np.isfinite(P))):
            raise ConfigurationError(f"run {self.id!r}: non-finite samples")
        dt = np.diff(t)
        if not np.all(dt > 0):
            raise ConfigurationError(f"run {self.id!r}: times must be strictly increasing")
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
            raise ConfigurationError(f"run {self.id!r}: times must be uniformly spaced")
        if np.any(P < 0):
            raise ConfigurationError(f"run {self.id!r}: negative power")
        for a in (t, T, P):
            a.setflags(write=False)
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "measured_temps", T)
        object.__setattr__(self, "measured_powers", P)

    @property
    def initial_temp(self) -> float:
        return float(self.measured_temps[0])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def grid(self) -> RolloutGrid:
        return RolloutGrid(float(self.times[0]), float(self.times[-1]), self.dt)

    @property
    def power_profile(self) -> TabulatedProfile:
        return TabulatedProfile(self.times, self.measured_powers)


@dataclass(frozen=True)
class FitConfig:
    adam_epochs: int = 200
    adam_lr: float = 0.01
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    lbfgs_memory: int = 10
    lbfgs_grad_tol: float = 1e-6
    lbfgs_max_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.adam_epochs < 0 or self.lbfgs_max_iters < 0:
            raise ConfigurationError("iteration counts must be nonnegative")
        if not (self.adam_lr > 0 and self.adam_eps > 0 and self.lbfgs_grad_tol > 0 and self.lbfgs_memory > 0):
            raise ConfigurationError("fit hyperparameters must be positive")
        b1, b2 = self.adam_betas
        if not (0 < b1 < 1 and 0 < b2 < 1):
            raise ConfigurationError("adam betas must lie in (0, 1)")
        object.__setattr__(self, "adam_betas", (float(b1), float(b2)))


@dataclass
class FitReport:
    final_loss: float
    mae: dict
    mape: dict
    loss_history: list
    wall_time: float
    adam_iterations: int = 0
    lbfgs_iterations: int = 0
    message: str = ""

    def to_dict(self, include_wall_time=False) -> dict:
        d = {
            "final_loss": self.final_loss,
            "mae_C": dict(self.mae),
            "mape_percent": {k: (None if math.isnan(v) else v) for k, v in self.mape.items()},
            "adam_iterations": self.adam_iterations,
            "lbfgs_iterations": self.lbfgs_iterations,
            "n_history": len(self.loss_history),
            "message": self.message,
        }
        if include_wall_time:
            d["wall_time_s"] = self.wall_time
        return d


def simulate_run(model: ThermalModel, run: ExperimentRun):
    """Model rollout under the run's measured power, starting from its first sample."""
    return rollout(model, run.power_profile, run.initial_temp, run.grid)


def compute_mae(model: ThermalModel, run: ExperimentRun) -> float:
    traj = simulate_run(model, run)
    return float(np.mean(np.abs(traj.temperatures - run.measured_temps)))


def mape(predicted, measured):
    """Mean absolute percent error; measured temperatures must be positive."""
    predicted = np.asarray(predicted, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if measured.size == 0:
        raise MetricUndefined("MAPE over an empty window")
    if np.any(measured <= 0):
        raise MetricUndefined("MAPE undefined: measured temperature <= 0 degC in window")
    return float(100.0 * np.mean(np.abs(predicted - measured) / measured))


def compute_mape(model: ThermalModel, run: ExperimentRun, t_handoff=None) -> float:
    """MAPE from first contact (first sample) up to and including ``t_handoff``."""
    if t_handoff is None:
        t_handoff = float(run.times[-1])
    if not run.times[0] <= t_handoff <= run.times[-1]:
        raise MetricUndefined(f"handoff time {t_handoff} outside run span")
    traj = simulate_run(model, run)
    window = run.times <= t_handoff + 1e-9
    return mape(traj.temperatures[window], run.measured_temps[window])


def fit(runs, init: ThermalModel | None = None, cfg: FitConfig = FitConfig()):
    """Adam for ``cfg.adam_epochs`` full-batch steps, then L-BFGS from the best Adam iterate.

    ``init=None`` starts from ``ThermalModel.initial(cfg.seed)``.  Returns
    ``(model, report)``; the model carries the lowest loss seen.
    """
    if not runs:
        raise ConfigurationError("fit needs at least one run")
    if init is None:
        init = ThermalModel.initial(cfg.seed)
    start = time.perf_counter()
    prepared = prepare_runs(runs)

    def objective(theta):
        total, _, grad = sysid_loss(theta, init, prepared)
        return total, grad

    theta0 = init.to_vector()
    f0, g0 = safe_eval(objective, theta0)
    if g0 is None:
        raise FitFailed("initial model diverges on the training runs")

    history = [f0]
    best_theta, best_f, best_g = theta0, f0, g0
    n_adam = 0
    if cfg.adam_epochs > 0:
        res = adam(objective, theta0, cfg.adam_epochs, cfg.adam_lr, cfg.adam_betas, cfg.adam_eps)
        history.extend(res.history[1:])
        n_adam = len(res.history) - 1
        if res.fun < best_f:
            best_theta, best_f, best_g = res.x, res.fun, res.grad
    res = lbfgs(objective, best_theta, cfg.lbfgs_memory, cfg.lbfgs_grad_tol,
                cfg.lbfgs_max_iters, f0=best_f, g0=best_g)
    if res.fun <= best_f:
        best_theta, best_f = res.x, res.fun
    history.extend(res.history)
    if not history or history[-1] != best_f:
        history.append(best_f)
    if not math.isfinite(best_f):
        raise FitFailed("no finite-loss iterate found")

    model = init.with_vector(best_theta)
    report = FitReport(
        final_loss=float(best_f),
        mae={r.id: compute_mae(model, r) for r in runs},
        mape={r.id: _safe_mape(model, r) for r in runs},
        loss_history=[float(v) for v in history],
        wall_time=time.perf_counter() - start,
        adam_iterations=n_adam,
        lbfgs_iterations=res.n_iter,
        message=res.message,
    )
    return model, report


def _safe_mape(model, run):
    try:
        return compute_mape(model, run)
    except MetricUndefined:
        return math.nan
