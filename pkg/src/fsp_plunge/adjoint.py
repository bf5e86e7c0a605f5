"""Reverse-mode sensitivities through the unrolled fixed-step RK4 rollout.

Two losses are differentiated here:

* the system-identification mismatch, summed over experiment runs, with
  respect to the 63 plant parameters (log C, log h, network weights);
* the four-term control objective with respect to the free cubic
  coefficients (phi2, phi3, phi4) in kW units, with the plant frozen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, IntegrationDiverged
from .model import ThermalModel
from .ode import RolloutGrid, Trajectory, rollout_theta
from .profiles import KW, CubicProfile, TabulatedProfile, clamp_power

SYSID_NAMES = ("log_capacitance", "log_heat_loss") + tuple(
    [f"w_hidden[{j},{k}]" for j in range(15) for k in range(2)]
    + [f"b_hidden[{j}]" for j in range(15)]
    + [f"w_out[{j}]" for j in range(15)]
    + ["b_out"]
)
CONTROL_NAMES = ("phi2_kW_per_s", "phi3_kW_per_s2", "phi4_kW_per_s3")
FD_STEP = 1e-4
FD_FLOOR = 1e-8


@dataclass
class LossReport:
    total: float
    terms: dict
    gradient: np.ndarray
    names: tuple = field(default=())


# ----------------------------------------------------------------------------- system ID


def _run_stage_powers(run):
    times = np.asarray(run.times, dtype=float)
    prof = TabulatedProfile(times, run.measured_powers)
    dt = times[1] - times[0]
    t = times[:-1]
    stages = np.stack([t, t + 0.5 * dt, times[1:]], axis=1)
    return clamp_power(prof(stages)), dt


def prepare_runs(runs):
    """Sort runs by id (the reduction order) and precompute their stage powers."""
    order = sorted(range(len(runs)), key=lambda i: runs[i].id)
    prepared = []
    for i in order:
        run = runs[i]
        pstage, dt = _run_stage_powers(run)
        prepared.append((i, run, pstage, dt))
    return prepared


def sysid_loss(theta, model: ThermalModel, prepared, with_grad=True):
    """Sum of squared temperature residuals over all runs, plus its gradient.

    ``prepared`` comes from :func:`prepare_runs`.  Divergence raises
    IntegrationDiverged tagged with the caller's run index.
    """
    theta = np.ascontiguousarray(theta, dtype=float)
    s_t, s_p = model.network.input_scale
    terms = {}
    total = 0.0
    grad = np.zeros(theta.size)
    for index, run, pstage, dt in prepared:
        measured = np.asarray(run.measured_temps, dtype=float)
        try:
            T, Y = rollout_theta(theta, model, pstage, measured[0], dt, run.times[0])
        except IntegrationDiverged as exc:
            raise IntegrationDiverged(exc.time, run_index=index) from None
        resid = T - measured
        value = float(np.dot(resid, resid))
        key = run.id
        while key in terms:
            key = key + "'"
        terms[key] = value
        total += value
        if with_grad:
            g, _, _ = _kernels.rk4_backward(theta, model.sink_temperature, s_t, s_p,
                                            pstage, Y, dt, 2.0 * resid, True)
            grad += g
    return total, terms, grad


def grad_sysid(model: ThermalModel, runs) -> LossReport:
    """Mismatch loss and its exact gradient with respect to all 63 parameters."""
    if not runs:
        raise DomainError("grad_sysid needs at least one run")
    total, terms, grad = sysid_loss(model.to_vector(), model, prepare_runs(runs))
    return LossReport(total, terms, grad, SYSID_NAMES)


# ----------------------------------------------------------------------------- control


def _control_terms(T, p_kw, spec, K, dt):
    """Loss terms and their direct partials w.r.t. sample temps and sample powers (kW)."""
    lam1, lam2, lam3, lam4 = spec.weights
    sp = spec.setpoint
    err = T - sp
    over = err > 0.0
    terms = {
        "setpoint": lam1 / K * float(np.dot(err, err)),
        "energy": 0.0,
        "smoothing": 0.0,
        "overshoot": lam4 * float(np.sum(err[over])),
    }
    dT = 2.0 * lam1 / K * err + lam4 * over
    dp = np.zeros(K)
    if K > 1:
        terms["energy"] = lam2 * energy_integral(p_kw, dt)
        dp += lam2 * dt
        dp[0] -= 0.5 * lam2 * dt
        dp[-1] -= 0.5 * lam2 * dt
        diff = np.diff(p_kw)
        if spec.smoothing == "literal":
            terms["smoothing"] = lam3 / (K - 1) * float(np.sum(diff))
            dp[-1] += lam3 / (K - 1)
            dp[0] -= lam3 / (K - 1)
        else:
            terms["smoothing"] = lam3 / (K - 1) * float(np.dot(diff, diff))
            d = 2.0 * lam3 / (K - 1) * diff
            dp[1:] += d
            dp[:-1] -= d
    return terms, dT, dp


def energy_integral(p_kw, dt):
    """Trapezoid rule on a uniform grid (kW * s)."""
    p = np.asarray(p_kw, dtype=float)
    if p.size < 2:
        return 0.0
    return float(dt * (np.sum(p) - 0.5 * (p[0] + p[-1])))


def smoothing_penalty(p_kw, weight=1.0, mode="squared"):
    """lambda3/(K-1) times the summed (squared or raw) increments of ``p_kw``."""
    p = np.asarray(p_kw, dtype=float)
    if p.size < 2:
        return 0.0
    diff = np.diff(p)
    body = np.dot(diff, diff) if mode == "squared" else np.sum(diff)
    return float(weight / (p.size - 1) * body)


def control_objective(model: ThermalModel, phi_free_kw, spec, with_grad=True):
    """Evaluate the control loss for free coefficients (phi2, phi3, phi4) in kW units.

    Returns (LossReport, Trajectory).  Power is clamped at zero inside the
    rollout and in the energy/smoothing terms; the clamp contributes a zero
    derivative where the raw polynomial is negative.
    """
    phi = np.asarray(phi_free_kw, dtype=float)
    coeffs_kw = np.array([spec.phi1_fixed / KW, phi[0], phi[1], phi[2]])
    grid = RolloutGrid(0.0, spec.t_end, spec.dt)
    times = grid.times
    K = times.size
    stage_t = grid.stage_times()

    # same W-unit Horner evaluation as CubicProfile, so replaying the result
    # through rollout() reproduces this trajectory bit for bit
    profile = CubicProfile.from_kw(coeffs_kw)
    raw_stage = profile(stage_t)
    pstage = clamp_power(raw_stage)
    theta = model.to_vector()
    T, Y = rollout_theta(theta, model, pstage, spec.T0, grid.dt)
    raw_samples = np.concatenate([raw_stage[:, 0], raw_stage[-1:, 2]]) if K > 1 else profile(times)
    p_kw = clamp_power(raw_samples) / KW
    terms, dT, dp = _control_terms(T, p_kw, spec, K, grid.dt)
    total = terms["setpoint"] + terms["energy"] + terms["smoothing"] + terms["overshoot"]
    traj = Trajectory(times, T, clamp_power(raw_samples))
    grad = np.zeros(3)
    if with_grad:
        s_t, s_p = model.network.input_scale
        _, gP, _ = _kernels.rk4_backward(theta, model.sink_temperature, s_t, s_p,
                                         pstage, Y, grid.dt, dT, False)
        gP = gP * (raw_stage > 0.0) * KW
        dp = dp * (raw_samples > 0.0)
        for j in range(3):
            grad[j] = np.sum(gP * stage_t ** (j + 1)) + np.sum(dp * times ** (j + 1))
    return LossReport(total, terms, grad, CONTROL_NAMES), traj


def grad_control(model: ThermalModel, phi_free_kw, spec) -> LossReport:
    report, _ = control_objective(model, phi_free_kw, spec)
    return report


# ----------------------------------------------------------------------------- verification


def finite_diff_gradient(loss, at, step=FD_STEP):
    """Central differences of a scalar function, one coordinate at a time."""
    x = np.array(at, dtype=float)
    out = np.empty(x.size)
    for i in range(x.size):
        probes = []
        for sign in (1.0, -1.0):
            xp = x.copy()
            xp[i] += sign * step
            v = float(loss(xp))
            if not math.isfinite(v):
                raise DomainError(f"loss non-finite at probe coordinate {i} = {xp[i]!r}")
            probes.append(v)
        out[i] = (probes[0] - probes[1]) / (2.0 * step)
    return out


def relative_errors(gradient, reference, floor=FD_FLOOR):
    g = np.asarray(gradient, dtype=float)
    return np.abs(np.asarray(reference) - g) / np.maximum(np.abs(g), floor)


def finite_diff_check(loss, at, gradient, step=FD_STEP):
    """Worst per-coordinate relative error between ``gradient`` and central differences."""
    fd = finite_diff_gradient(loss, at, step)
    return float(np.max(relative_errors(gradient, fd)))
