"""Ground-truth plants and seeded synthetic plunge datasets.

The truth plant has the same lumped structure as the fitted model, but its
efficiency is either a constant or a single logistic surface
``eta = sigmoid(a0 + a1 T/1000 + a2 P/10000)``, so it generally lies outside
the network's hypothesis class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationDiverged, SpecInvalid
from .ode import RolloutGrid, rollout
from .profiles import KW, ramp_hold_profile
from .sysid import ExperimentRun


@dataclass(frozen=True)
class SyntheticPlantSpec:
    eta: object = (0.6, -1.2, 2.0)  # float constant in (0,1), or logistic (a0, a1, a2)
    C_truth: float = 100.0
    h_truth: float = 2.0
    T_sink: float = 25.0
    noise_std: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not (self.C_truth > 0 and self.h_truth > 0):
            raise SpecInvalid("C_truth and h_truth must be positive")
        if not self.noise_std >= 0:
            raise SpecInvalid("noise_std must be nonnegative")
        if not math.isfinite(self.T_sink):
            raise SpecInvalid("T_sink must be finite")
        if isinstance(self.eta, (int, float)):
            if not 0.0 < float(self.eta) < 1.0:
                raise SpecInvalid("constant eta must lie in (0, 1)")
            object.__setattr__(self, "eta", float(self.eta))
        else:
            coeffs = tuple(float(v) for v in self.eta)
            if len(coeffs) != 3 or not all(math.isfinite(v) for v in coeffs):
                raise SpecInvalid("logistic eta needs three finite coefficients (a0, a1, a2)")
            object.__setattr__(self, "eta", coeffs)

    @property
    def eta_kind(self) -> str:
        return "constant" if isinstance(self.eta, float) else "logistic"

    def to_dict(self) -> dict:
        eta = self.eta if isinstance(self.eta, float) else list(self.eta)
        return {"kind": "synthetic", "eta": eta, "C_truth": self.C_truth, "h_truth": self.h_truth,
                "T_sink": self.T_sink, "noise_std": self.noise_std, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticPlantSpec":
        eta = d["eta"]
        return cls(eta if isinstance(eta, (int, float)) else tuple(eta), d["C_truth"], d["h_truth"],
                   d["T_sink"], d.get("noise_std", 0.0), d.get("seed", 0))


class SyntheticPlant:
    """Truth dynamics C dT/dt = eta(T, P) P - h (T - T_sink)."""

    def __init__(self, spec: SyntheticPlantSpec):
        self.spec = spec

    def efficiency(self, temperature, power):
        eta = self.spec.eta
        if isinstance(eta, float):
            return np.full(np.broadcast(temperature, power).shape, eta) if np.ndim(temperature) else eta
        a0, a1, a2 = eta
        z = a0 + a1 * np.asarray(temperature) / 1000.0 + a2 * np.asarray(power) / 10000.0
        return 0.5 * (1.0 + np.tanh(0.5 * z))  # overflow-free logistic

    def rhs(self, temperature, power):
        s = self.spec
        return (self.efficiency(temperature, power) * power
                - s.h_truth * (np.asarray(temperature) - s.T_sink)) / s.C_truth

    def perturbed(self, h_scale=1.0, C_scale=1.0) -> "SyntheticPlant":
        s = self.spec
        return SyntheticPlant(SyntheticPlantSpec(s.eta, s.C_truth * C_scale, s.h_truth * h_scale,
                                                 s.T_sink, s.noise_std, s.seed))


def generate_runs(spec: SyntheticPlantSpec, profiles, T0, grid: RolloutGrid, ids=None):
    """Roll the truth plant out under each profile and add seeded Gaussian noise.

    Measured powers are the (clamped) profile values on the grid.  One noise
    stream is drawn from ``spec.seed`` in profile order.
    """
    plant = SyntheticPlant(spec)
    rng = np.random.default_rng(spec.seed)
    runs = []
    for i, prof in enumerate(profiles):
        try:
            traj = rollout(plant, prof, T0, grid)
        except IntegrationDiverged as exc:
            raise SpecInvalid(f"truth rollout {i} diverged at t={exc.time:g} s") from None
        temps = traj.temperatures
        if spec.noise_std > 0:
            temps = temps + rng.normal(0.0, spec.noise_std, temps.size)
        run_id = ids[i] if ids is not None else f"run{i:02d}"
        runs.append(ExperimentRun(run_id, traj.times, temps, traj.powers))
    return runs


# ----------------------------------------------------------------------------- profile families

TRAINING_PLATEAUS_C = (700.0, 712.0, 725.0, 738.0, 762.0, 788.0, 800.0)
TRAINING_SLOPES_KW = (0.04, 0.06, 0.08, 0.1, 0.12, 0.15, 0.2)
HELDOUT_PLATEAU_C = 745.0
HELDOUT_SLOPE_KW = 0.09
DATA_DT = 0.5
RUN_LENGTH_S = 240.0


def hold_power(plant: SyntheticPlant, plateau, p_max=1.0e6):
    """Power (W) whose truth-plant steady state is ``plateau`` degC (bisection)."""
    s = plant.spec

    def net(p):
        return plant.efficiency(plateau, p) * p - s.h_truth * (plateau - s.T_sink)

    lo, hi = 0.0, 1.0
    while net(hi) < 0:
        hi *= 2.0
        if hi > p_max:
            raise SpecInvalid(f"plateau {plateau} degC needs more than {p_max} W")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if net(mid) < 0 else (lo, mid)
    return hi


def plateau_profile(plant: SyntheticPlant, plateau, slope_kw, t_end=RUN_LENGTH_S, dt=DATA_DT, p_start_kw=1.0):
    """Hand-tuned style ramp from 1 kW at ``slope_kw`` kW/s up to the hold power of ``plateau``."""
    return ramp_hold_profile(p_start_kw * KW, slope_kw * KW, hold_power(plant, plateau), t_end, dt)


def default_profiles(spec: SyntheticPlantSpec = SyntheticPlantSpec(), include_heldout=True):
    plant = SyntheticPlant(spec)
    targets = list(TRAINING_PLATEAUS_C)
    slopes = list(TRAINING_SLOPES_KW)
    ids = [f"train{i}" for i in range(len(targets))]
    if include_heldout:
        targets.append(HELDOUT_PLATEAU_C)
        slopes.append(HELDOUT_SLOPE_KW)
        ids.append("heldout")
    return [plateau_profile(plant, T, s) for T, s in zip(targets, slopes)], ids


def default_dataset(spec: SyntheticPlantSpec = SyntheticPlantSpec(), T0=25.0, include_heldout=True):
    """Seven ramp-and-hold training runs with plateaus spanning 700-800 degC, plus one held-out run.

    No training plateau sits within 10 degC of 750 or 775 degC.
    """
    profiles, ids = default_profiles(spec, include_heldout)
    grid = RolloutGrid(0.0, RUN_LENGTH_S, DATA_DT)
    return generate_runs(spec, profiles, T0, grid, ids)
