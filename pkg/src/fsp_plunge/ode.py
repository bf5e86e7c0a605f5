"""Fixed-step RK4 rollouts of the thermal ODE on a uniform time grid."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, IntegrationDiverged
from .model import ThermalModel
from .profiles import KW, clamp_power

DIVERGENCE_LIMIT = _kernels.DIVERGENCE_LIMIT


@dataclass(frozen=True)
class RolloutGrid:
    """Uniform grid t0, t0 + dt, ..., with t_end snapped down to the last grid point."""

    t0: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError("grid dt must be positive")
        if not self.t_end >= self.t0:
            raise ConfigurationError("grid t_end must not precede t0")
        # 1e-9 guards against (120 - 0) / 0.1 = 1199.9999999999998
        steps = int(math.floor((self.t_end - self.t0) / self.dt + 1e-9))
        object.__setattr__(self, "t_end", self.t0 + steps * self.dt)

    @property
    def n_samples(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) * self.dt

    def stage_times(self) -> np.ndarray:
        """(K-1, 3) array of the distinct RK4 evaluation times of each step."""
        times = self.times
        t = times[:-1]
        return np.stack([t, t + 0.5 * self.dt, times[1:]], axis=1)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    temperatures: np.ndarray
    powers: np.ndarray  # clamped power actually applied at each sample, W

    def __post_init__(self):
        if not (len(self.times) == len(self.temperatures) == len(self.powers)):
            raise ConfigurationError("trajectory vectors differ in length")

    @property
    def end_temperature(self) -> float:
        return float(self.temperatures[-1])

    @property
    def max_temperature(self) -> float:
        return float(np.max(self.temperatures))

    def to_csv(self) -> str:
        lines = ["time_s,temp_C,power_kW"]
        for t, T, p in zip(self.times, self.temperatures, self.powers):
            lines.append(f"{float(t)!r},{float(T)!r},{float(p) / KW!r}")
        return "\n".join(lines) + "\n"


def rk4_step(model, profile, t, T, dt):
    """One classical RK4 step of dT/dt = model.rhs(T, P(t)).

    ``model`` is anything with an ``rhs(T, P)`` method; power is sampled
    (and clamped at zero) at t, t + dt/2 and t + dt.
    """
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    p1, p2, p4 = (float(clamp_power(profile(s))) for s in (t, t + 0.5 * dt, t + dt))
    return _rk4_update(model, t, T, dt, p1, p2, p4)


def _rk4_update(model, t, T, dt, p1, p2, p4):
    half = 0.5 * dt
    k1 = float(model.rhs(T, p1))
    k2 = float(model.rhs(T + half * k1, p2))
    k3 = float(model.rhs(T + half * k2, p2))
    y4 = T + dt * k3
    k4 = float(model.rhs(y4, p4))
    out = T + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not (abs(out) <= DIVERGENCE_LIMIT and abs(y4) <= DIVERGENCE_LIMIT):
        raise IntegrationDiverged(t)
    return out


def stage_powers(profile, grid: RolloutGrid):
    """Clamped powers at every stage time plus the raw values (for clamp masks)."""
    raw = np.asarray(profile(grid.stage_times()), dtype=float)
    return clamp_power(raw), raw


def _sample_powers(pstage, profile, grid):
    if pstage.shape[0] == 0:
        return clamp_power(np.atleast_1d(np.asarray(profile(grid.times), dtype=float)))
    return np.concatenate([pstage[:, 0], pstage[-1:, 2]])


def rollout_theta(theta, model: ThermalModel, pstage, T0, dt, t0=0.0):
    """Kernel call on a raw parameter vector.  Raises IntegrationDiverged."""
    s_t, s_p = model.network.input_scale
    T, Y, bad = _kernels.rk4_forward(theta, model.sink_temperature, s_t, s_p, pstage, float(T0), float(dt))
    if bad >= 0:
        raise IntegrationDiverged(t0 + bad * dt)
    return T, Y


def rollout(model, profile, T0, grid: RolloutGrid) -> Trajectory:
    """Integrate from ``T0`` over ``grid`` under ``profile``.

    ThermalModel instances run through the compiled kernel; any other object
    with an ``rhs(T, P)`` method (e.g. a synthetic truth plant) is stepped in
    Python with :func:`rk4_step`.
    """
    times = grid.times
    if isinstance(model, ThermalModel):
        pstage, _ = stage_powers(profile, grid)
        T, _ = rollout_theta(model.to_vector(), model, pstage, T0, grid.dt, grid.t0)
        powers = _sample_powers(pstage, profile, grid)
    else:
        # same stage powers as the kernel path (end-of-step power at the exact grid time)
        pstage, _ = stage_powers(profile, grid)
        T = np.empty(times.size)
        T[0] = T0
        for k in range(times.size - 1):
            T[k + 1] = _rk4_update(model, times[k], T[k], grid.dt, *pstage[k])
        powers = _sample_powers(pstage, profile, grid)
    return Trajectory(times, T, powers)
