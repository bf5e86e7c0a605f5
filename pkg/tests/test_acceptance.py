"""Acceptance gate: one PASS/FAIL line per criterion.

Run under pytest (lines are repeated in the terminal summary) or directly
with ``python tests/test_acceptance.py``.  Tolerances are the contract
values; nothing here is tuned to make a criterion pass.
"""
import functools
import math
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from fsp_plunge.control import REFERENCE_PROFILES, ControlSpec, evaluate_profile, max_power_step, optimize_profile
from fsp_plunge.io import ingest, write_run
from fsp_plunge.model import ThermalModel, model_json
from fsp_plunge.ode import RolloutGrid, rollout
from fsp_plunge.profiles import CubicProfile, eval_power
from fsp_plunge.synth import SyntheticPlant, SyntheticPlantSpec, default_dataset
from fsp_plunge.sysid import FitConfig, compute_mae, fit

from gradcheck import control_fd_error, random_control_setup, short_runs, sysid_fd_error

RESULTS = []

GRAD_TOL = 1e-5
GRAD_SEEDS = 20
GRAD_RUNTIME_S = 60.0
ORDER_RATIO = 12.0
ORDER_RUNTIME_S = 5.0
CLOSED_FORM_TOL_C = 1e-3
CLOSED_FORM_RUNTIME_S = 1.0
HELDOUT_MAE_C = 5.0
FIT_RUNTIME_S = 300.0
SETPOINTS_C = (750.0, 775.0)
SETPOINT_TOL = 0.01
OVERSHOOT_C = 8.0
CONTROL_RUNTIME_S = 180.0
REGIME_SEEDS = 5
REFERENCE_T60_KW = 3.07288
REFERENCE_TOL_KW = 1e-9


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@functools.lru_cache(maxsize=None)
def fitted_default(seed=0):
    """Fit on the 7 training runs of the default synthetic plant (noise seed and init seed = ``seed``)."""
    runs = default_dataset(SyntheticPlantSpec(seed=seed))
    t0 = time.perf_counter()
    model, rep = fit(runs[:7], cfg=FitConfig(seed=seed))
    return runs, model, rep, time.perf_counter() - t0


def design_T0(runs):
    return float(np.mean([r.initial_temp for r in runs[:7]]))


@functools.lru_cache(maxsize=None)
def designed(seed, setpoint, regime):
    runs, model, _, _ = fitted_default(seed)
    spec = ControlSpec.for_regime(regime, setpoint, design_T0(runs))
    t0 = time.perf_counter()
    res = optimize_profile(model, spec)
    elapsed = time.perf_counter() - t0
    truth = evaluate_profile(SyntheticPlant(SyntheticPlantSpec(seed=seed)), res.phi_kw, spec)
    return res, truth, elapsed


def criterion_1():
    t0 = time.perf_counter()
    worst_sys = worst_ctl = 0.0
    for seed in range(GRAD_SEEDS):
        model = ThermalModel.initial(seed, capacitance=float(50 + 10 * seed), heat_loss=float(1 + 0.2 * seed))
        worst_sys = max(worst_sys, sysid_fd_error(model, short_runs(seed)))
        m, spec, phi = random_control_setup(seed)
        worst_ctl = max(worst_ctl, control_fd_error(m, phi, spec))
    elapsed = time.perf_counter() - t0
    ok = worst_sys <= GRAD_TOL and worst_ctl <= GRAD_TOL and elapsed <= GRAD_RUNTIME_S
    return report(1, ok, f"max rel err sysid {worst_sys:.2e}, control {worst_ctl:.2e} (tol {GRAD_TOL:g}) "
                         f"over {GRAD_SEEDS} seeds, {elapsed:.1f} s (limit {GRAD_RUNTIME_S:g} s)")


def criterion_2():
    t0 = time.perf_counter()
    m = ThermalModel.constant_efficiency(0.5, 10.0, 10.0)
    errs = {}
    for dt in (0.2, 0.1):
        tr = rollout(m, CubicProfile(2000.0), 25.0, RolloutGrid(0.0, 5.0, dt))
        errs[dt] = float(np.max(np.abs(tr.temperatures - (25.0 + 100.0 * (1.0 - np.exp(-tr.times))))))
    elapsed = time.perf_counter() - t0
    ratio = errs[0.2] / errs[0.1]
    ok = ratio >= ORDER_RATIO and elapsed <= ORDER_RUNTIME_S
    return report(2, ok, f"error {errs[0.2]:.3e} -> {errs[0.1]:.3e}, ratio {ratio:.2f} (need >= {ORDER_RATIO:g}), "
                         f"{elapsed:.2f} s")


def criterion_3():
    m = ThermalModel.constant_efficiency(0.5, 1000.0, 10.0)
    rollout(m, CubicProfile(2000.0), 40.0, RolloutGrid(0.0, 1.0, 0.1))  # compile outside the timer
    t0 = time.perf_counter()
    tr = rollout(m, CubicProfile(2000.0), 40.0, RolloutGrid(0.0, 120.0, 0.1))
    elapsed = time.perf_counter() - t0
    decay = np.exp(-m.heat_loss * tr.times / m.capacitance)
    exact = 25.0 + (0.5 * 2000.0 / m.heat_loss) * (1.0 - decay) + (40.0 - 25.0) * decay
    err = float(np.max(np.abs(tr.temperatures - exact)))
    ok = err <= CLOSED_FORM_TOL_C and elapsed <= CLOSED_FORM_RUNTIME_S
    return report(3, ok, f"max |T - closed form| {err:.2e} C (tol {CLOSED_FORM_TOL_C:g}), {elapsed * 1e3:.1f} ms")


def criterion_4():
    runs, model, rep, elapsed = fitted_default(0)
    mae = compute_mae(model, runs[7])
    ok = mae <= HELDOUT_MAE_C and elapsed <= FIT_RUNTIME_S
    return report(4, ok, f"held-out MAE {mae:.3f} C (limit {HELDOUT_MAE_C:g}), fit {elapsed:.1f} s "
                         f"(limit {FIT_RUNTIME_S:g} s), {rep.message}")


def _setpoint_check(res, truth, setpoint):
    err = abs(truth.end_temperature - setpoint) / setpoint
    over = max(0.0, truth.max_temperature - setpoint)
    return err <= SETPOINT_TOL and over <= OVERSHOOT_C, err, over


def criterion_5():
    ok_all, parts = True, []
    for sp in SETPOINTS_C:
        res, truth, elapsed = designed(0, sp, "fast")
        ok, err, over = _setpoint_check(res, truth, sp)
        ok = ok and elapsed <= CONTROL_RUNTIME_S
        ok_all &= ok
        parts.append(f"{sp:g} C: truth end {truth.end_temperature:.1f} C ({100 * err:.1f} % off, tol "
                     f"{100 * SETPOINT_TOL:g} %), overshoot {over:.1f} C, model end {res.end_temperature:.1f} C, "
                     f"{elapsed:.1f} s")
    return report(5, ok_all, "; ".join(parts))


def criterion_6():
    strict, tol_ok, parts = True, True, []
    for seed in range(REGIME_SEEDS):
        fast, fast_truth, _ = designed(seed, 775.0, "fast")
        slow, slow_truth, _ = designed(seed, 775.0, "slow")
        dp_fast, dp_slow = max_power_step(fast.trajectory), max_power_step(slow.trajectory)
        strict &= dp_slow < dp_fast
        tol_ok &= _setpoint_check(fast, fast_truth, 775.0)[0] and _setpoint_check(slow, slow_truth, 775.0)[0]
        parts.append(f"seed {seed}: max|dP| {dp_fast:.2f} -> {dp_slow:.2f} W, truth end "
                     f"{fast_truth.end_temperature:.0f}/{slow_truth.end_temperature:.0f} C")
    return report(6, strict and tol_ok, f"strict reduction {'yes' if strict else 'no'}, setpoint tolerance "
                                        f"{'yes' if tol_ok else 'no'}; " + "; ".join(parts))


def criterion_7():
    starts = [eval_power(CubicProfile.from_kw(phi), 0.0) / 1000.0 for phi in REFERENCE_PROFILES.values()]
    p60 = eval_power(CubicProfile.from_kw(REFERENCE_PROFILES[(1, "775C/Fast")]), 60.0) / 1000.0
    ok = all(p == 1.0 for p in starts) and len(starts) == 6 and abs(p60 - REFERENCE_T60_KW) <= REFERENCE_TOL_KW
    return report(7, ok, f"six rows at t=0: {sorted(set(starts))} kW; Batch 1 775C/Fast at 60 s {p60!r} kW")


def _cli(*argv):
    proc = subprocess.run([sys.executable, "-m", "fsp_plunge", *map(str, argv)], capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr.strip())


def _pipeline(root):
    d = root / "data"
    _cli("synth", "--out", d)
    train = sorted(str(p) for p in d.glob("train*.csv"))
    _cli("fit", "--runs", *train, "--out", root / "fit")
    _cli("fit", "--runs", *train, "--warm-start", root / "fit/model.json", "--adam-epochs", 10,
         "--lbfgs-max-iters", 10, "--out", root / "refit")
    _cli("control", "--model", root / "fit/model.json", "--setpoint", 775, "--regime", "slow", "--runs", *train,
         "--out", root / "ctl")
    _cli("simulate", "--profile", root / "ctl/profile.json", "--plant", d / "plant.json", "--out", root / "truth.csv")
    _cli("simulate", "--profile", root / "ctl/profile.json", "--model", root / "fit/model.json",
         "--out", root / "model.csv")
    _cli("eval", "--trajectory", root / "truth.csv", "--reference", root / "model.csv", "--profile",
         root / "ctl/profile.json", "--model", root / "fit/model.json", "--runs", d / "heldout.csv",
         "--out", root / "metrics.json")
    _cli("plot", "--trajectory", root / "model.csv", "--trajectory", root / "truth.csv", "--profile",
         root / "ctl/profile.json", "--out", root / "plot.svg")


def criterion_8():
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        _pipeline(a)
        _pipeline(b)
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        differing = [str(f) for f in files if (a / f).read_bytes() != (b / f).read_bytes()]
        missing = [str(f) for f in files if not (b / f).exists()]

        model = ThermalModel.initial(21, capacitance=123.0, heat_loss=3.3)
        back = ThermalModel.from_dict(__import__("json").loads(model_json(model)))
        model_ok = np.array_equal(back.to_vector(), model.to_vector())
        run = default_dataset(SyntheticPlantSpec(seed=9))[2]
        again = ingest(write_run(Path(tmp) / "rt.csv", run), run.dt)
        run_ok = (np.array_equal(again.times, run.times) and np.array_equal(again.measured_temps, run.measured_temps)
                  and float(np.max(np.abs(again.measured_powers - run.measured_powers))) <= 1e-9)
    ok = not differing and not missing and model_ok and run_ok and len(files) >= 15
    return report(8, ok, f"{len(files)} CLI artifacts from 6 commands, {len(differing)} differ; model JSON lossless "
                         f"{model_ok}; run CSV round-trip {run_ok}")


def test_criterion_1_gradient_exactness():
    assert criterion_1(), RESULTS[-1]


def test_criterion_2_integrator_order():
    assert criterion_2(), RESULTS[-1]


def test_criterion_3_closed_form():
    assert criterion_3(), RESULTS[-1]


def test_criterion_4_sysid_recovery():
    assert criterion_4(), RESULTS[-1]


def test_criterion_5_control_to_setpoint():
    assert criterion_5(), RESULTS[-1]


def test_criterion_6_fast_slow():
    assert criterion_6(), RESULTS[-1]


def test_criterion_7_reference_fixture():
    assert criterion_7(), RESULTS[-1]


def test_criterion_8_determinism_round_trip():
    assert criterion_8(), RESULTS[-1]


if __name__ == "__main__":
    outcomes = [c() for c in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
                              criterion_7, criterion_8)]
    print(f"{sum(outcomes)}/{len(outcomes)} criteria pass")
    sys.exit(0 if all(outcomes) else 1)
