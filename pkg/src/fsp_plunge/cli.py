"""Command-line pipeline: synth -> fit -> control -> simulate -> eval -> plot.

Every command writes its outputs atomically and stamps them with the hash
of its resolved parameters (input files enter by content digest, output
locations not at all) and the seed, so a repeated invocation reproduces
the same bytes.  Failures print one JSON line on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .control import REGIMES, ControlSpec, detect_handoff, evaluate_profile, optimize_profile
from .errors import ConfigurationError, FSPError
from .ode import Trajectory
from .profiles import KW
from .svg import render
from .synth import SyntheticPlant, default_dataset
from .sysid import FitConfig, compute_mae, fit, mape, _safe_mape

EXIT_FAILURE = 1


def _job(args) -> fio.JobConfig:
    return fio.JobConfig.load(args.config) if args.config else fio.JobConfig()


def _seed(args, job):
    return job.seed if args.seed is None else args.seed


def _inputs(**paths):
    out = {}
    for name, p in paths.items():
        if p is None:
            continue
        if isinstance(p, (list, tuple)):
            out[name] = [fio.file_digest(x) for x in p]
        else:
            out[name] = fio.file_digest(p)
    return out


def _stamp(command, params, inputs, seed):
    return fio.provenance(fio.config_hash({"command": command, "params": params, "inputs": inputs,
                                           "seed": seed}), seed)


def _out_dir(args, job) -> Path:
    d = args.out or job.out_dir
    if d is None:
        raise ConfigurationError("no output directory (use --out or out_dir in the config)")
    return Path(d)


# ----------------------------------------------------------------------------- synth


def cmd_synth(args):
    job = _job(args)
    section = job.plant
    seed = _seed(args, job)
    if args.seed is not None:
        section = fio.PlantSection(**{**section.__dict__, "seed": seed})
    if args.noise_std is not None:
        section = fio.PlantSection(**{**section.__dict__, "noise_std": args.noise_std})
    spec = section.spec()
    out = _out_dir(args, job)
    prov = _stamp("synth", {"plant": spec.to_dict(), "T0": args.T0}, {}, spec.seed)
    runs = default_dataset(spec, T0=args.T0)
    fio.write_json(out / "plant.json", fio.plant_document(spec, prov))
    for run in runs:
        fio.write_run(out / f"{run.id}.csv", run, prov)
    return {"plant": str(out / "plant.json"), "runs": [str(out / f"{r.id}.csv") for r in runs]}


# ----------------------------------------------------------------------------- fit


def _fit_config(args, job) -> FitConfig:
    cfg = job.fit
    seed = _seed(args, job)
    kw = dict(cfg.__dict__)
    kw["seed"] = seed if args.seed is not None else cfg.seed
    if args.adam_epochs is not None:
        kw["adam_epochs"] = args.adam_epochs
    if args.lbfgs_max_iters is not None:
        kw["lbfgs_max_iters"] = args.lbfgs_max_iters
    return FitConfig(**kw)


def cmd_fit(args):
    job = _job(args)
    paths = list(args.runs or job.runs)
    if not paths:
        raise ConfigurationError("fit needs at least one run file (--runs or runs in the config)")
    dt = args.dt if args.dt is not None else job.data_dt
    cfg = _fit_config(args, job)
    runs = [fio.ingest(p, dt) for p in paths]
    init = fio.load_model(args.warm_start) if args.warm_start else None
    out = _out_dir(args, job)
    params = {"fit": json.loads(json.dumps(cfg.__dict__)), "data_dt": dt}
    prov = _stamp("fit", params, _inputs(runs=sorted(paths), warm_start=args.warm_start), cfg.seed)
    model, report = fit(runs, init, cfg)
    fio.write_json(out / "model.json", fio.model_document(model, prov))
    doc = report.to_dict()
    doc["runs"] = sorted(r.id for r in runs)
    doc["provenance"] = prov
    fio.write_json(out / "fit_report.json", doc)
    fio.atomic_write(out / "loss_history.csv", fio.loss_history_csv(report.loss_history, prov))
    return {"model": str(out / "model.json"), "final_loss": report.final_loss}


# ----------------------------------------------------------------------------- control


def _control_spec(args, job, runs_T0=None) -> ControlSpec:
    c = job.control
    regime = args.regime or c.regime
    weights = tuple(args.weights) if args.weights else c.weights
    if regime == "custom":
        if weights is None:
            raise ConfigurationError("regime 'custom' needs --weights L1 L2 L3 L4")
    else:
        if regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {regime!r}")
        if weights is not None and tuple(float(w) for w in weights) != REGIMES[regime]:
            raise ConfigurationError(f"weights given for regime {regime!r}; use --regime custom")
        weights = REGIMES[regime]
    T0 = args.T0 if args.T0 is not None else c.T0
    if T0 is None:
        T0 = runs_T0 if runs_T0 is not None else 25.0
    return ControlSpec(
        setpoint=args.setpoint if args.setpoint is not None else c.setpoint,
        T0=float(T0),
        weights=weights,
        t_end=args.t_end if args.t_end is not None else c.t_end,
        dt=args.control_dt if args.control_dt is not None else c.dt,
        regime=regime,
        smoothing=args.smoothing or c.smoothing,
    )


def spec_from_profile(doc) -> ControlSpec:
    return ControlSpec(setpoint=doc["setpoint_C"], T0=doc["T0_C"], weights=tuple(doc["weights"]),
                       t_end=doc["t_end_s"], dt=doc["dt_s"], phi1_fixed=doc["phi_kW"][0] * KW,
                       regime=doc["regime"], smoothing=doc["smoothing"])


def cmd_control(args):
    job = _job(args)
    runs_T0 = None
    if args.runs:
        dt = args.dt if args.dt is not None else job.data_dt
        runs_T0 = float(np.mean([fio.ingest(p, dt).initial_temp for p in args.runs]))
    spec = _control_spec(args, job, runs_T0)
    model = fio.load_model(args.model)
    c = job.control
    seed = _seed(args, job)
    out = _out_dir(args, job)
    params = {"setpoint": spec.setpoint, "T0": spec.T0, "weights": list(spec.weights), "t_end": spec.t_end,
              "dt": spec.dt, "regime": spec.regime, "smoothing": spec.smoothing,
              "adam_iters": c.adam_iters, "adam_lr": c.adam_lr, "lbfgs_tol": c.lbfgs_tol,
              "lbfgs_max_iters": c.lbfgs_max_iters}
    prov = _stamp("control", params, _inputs(model=args.model), seed)
    res = optimize_profile(model, spec, adam_iters=c.adam_iters, adam_lr=c.adam_lr,
                           lbfgs_tol=c.lbfgs_tol, lbfgs_max_iters=c.lbfgs_max_iters)
    doc = {
        "setpoint_C": spec.setpoint,
        "regime": spec.regime,
        "weights": list(spec.weights),
        "smoothing": spec.smoothing,
        "phi_kW": list(res.phi_kw),
        "t_end_s": spec.grid.t_end,
        "dt_s": spec.dt,
        "T0_C": spec.T0,
        "predicted_end_temp_C": res.end_temperature,
        "predicted_max_T_C": res.max_temperature,
        "predicted_handoff_s": res.handoff,
        "loss": {"total": res.loss.total, **res.loss.terms},
        "optimizer": res.message,
        "model_sha256": model.digest(),
        "provenance": prov,
    }
    fio.write_json(out / "profile.json", doc)
    traj = res.trajectory
    rows = ["time_s,power_kW"] + [f"{t!r},{p / KW!r}" for t, p in zip(traj.times, traj.powers)]
    fio.atomic_write(out / "profile.csv", fio._comment(prov) + "\n".join(rows) + "\n")
    return {"profile": str(out / "profile.json"), "phi_kW": doc["phi_kW"],
            "predicted_end_temp_C": doc["predicted_end_temp_C"]}


# ----------------------------------------------------------------------------- simulate


def _plant_for(args):
    if (args.model is None) == (args.plant is None):
        raise ConfigurationError("give exactly one of --model or --plant")
    if args.model:
        if args.h_scale != 1.0 or args.C_scale != 1.0:
            raise ConfigurationError("--h-scale/--C-scale apply to --plant only")
        return fio.load_model(args.model)
    return SyntheticPlant(fio.load_plant(args.plant)).perturbed(args.h_scale, args.C_scale)


def cmd_simulate(args):
    job = _job(args)
    doc = fio.read_json(args.profile)
    spec = spec_from_profile(doc)
    plant = _plant_for(args)
    seed = _seed(args, job)
    params = {"h_scale": args.h_scale, "C_scale": args.C_scale}
    prov = _stamp("simulate", params, _inputs(profile=args.profile, model=args.model, plant=args.plant), seed)
    ev = evaluate_profile(plant, doc["phi_kW"], spec)
    fio.atomic_write(args.out, fio.trajectory_csv(ev.trajectory, prov))
    return {"trajectory": str(args.out), "end_temp_C": ev.end_temperature}


# ----------------------------------------------------------------------------- eval


def trajectory_metrics(traj: Trajectory, setpoint, reference: Trajectory | None = None) -> dict:
    handoff = detect_handoff(traj, setpoint)
    end = traj.end_temperature
    m = {
        "setpoint_C": setpoint,
        "end_temp_C": end,
        "end_error_percent": 100.0 * (end - setpoint) / setpoint,
        "max_T_C": traj.max_temperature,
        "overshoot_C": max(0.0, traj.max_temperature - setpoint),
        "handoff_s": handoff,
    }
    if reference is not None:
        if len(reference.times) != len(traj.times) or not np.allclose(reference.times, traj.times):
            raise ConfigurationError("reference and trajectory grids differ")
        window = traj.times <= (handoff if handoff is not None else traj.times[-1]) + 1e-9
        m["mae_C"] = float(np.mean(np.abs(reference.temperatures - traj.temperatures)))
        m["mape_to_handoff_percent"] = mape(reference.temperatures[window], traj.temperatures[window])
    return m


def cmd_eval(args):
    job = _job(args)
    seed = _seed(args, job)
    metrics = {}
    if args.trajectory:
        if args.profile is None and args.setpoint is None:
            raise ConfigurationError("eval of a trajectory needs --profile or --setpoint")
        setpoint = args.setpoint if args.setpoint is not None else fio.read_json(args.profile)["setpoint_C"]
        traj = fio.read_trajectory(args.trajectory)
        ref = fio.read_trajectory(args.reference) if args.reference else None
        metrics["trajectory"] = trajectory_metrics(traj, setpoint, ref)
    if args.model and args.runs:
        dt = args.dt if args.dt is not None else job.data_dt
        model = fio.load_model(args.model)
        per = {}
        for p in args.runs:
            run = fio.ingest(p, dt)
            err = _safe_mape(model, run)
            per[run.id] = {"mae_C": compute_mae(model, run), "mape_percent": None if err != err else err}
        metrics["runs"] = dict(sorted(per.items()))
    if not metrics:
        raise ConfigurationError("eval needs --trajectory and/or --model with --runs")
    prov = _stamp("eval", {"setpoint": args.setpoint},
                  _inputs(trajectory=args.trajectory, reference=args.reference, profile=args.profile,
                          model=args.model, runs=args.runs), seed)
    metrics["provenance"] = prov
    fio.write_json(args.out, metrics)
    return metrics


# ----------------------------------------------------------------------------- plot


def cmd_plot(args):
    labels = args.label or []
    series = []
    for i, path in enumerate(args.trajectory):
        tr = fio.read_trajectory(path)
        series.append({"label": labels[i] if i < len(labels) else Path(path).stem,
                       "times": tr.times, "temps": tr.temperatures,
                       "powers": tr.powers if not args.no_power else None})
    setpoint = args.setpoint
    if setpoint is None and args.profile:
        setpoint = fio.read_json(args.profile)["setpoint_C"]
    handoff = None
    if setpoint is not None:
        first = fio.read_trajectory(args.trajectory[0])
        handoff = detect_handoff(first, setpoint)
    fio.atomic_write(args.out, render(series, setpoint, handoff, args.title or ""))
    return {"plot": str(args.out), "handoff_s": handoff}


# ----------------------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsp-plunge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JobConfig JSON")
        sp.add_argument("--seed", type=int)
        return sp

    s = common(sub.add_parser("synth", help="generate synthetic plunge runs from a truth plant"))
    s.add_argument("--out", help="output directory")
    s.add_argument("--T0", type=float, default=25.0)
    s.add_argument("--noise-std", type=float)
    s.set_defaults(func=cmd_synth)

    s = common(sub.add_parser("fit", help="fit the thermal model to run CSVs"))
    s.add_argument("--runs", nargs="+")
    s.add_argument("--out")
    s.add_argument("--dt", type=float, help="resampling step for run files (s)")
    s.add_argument("--warm-start", help="model.json to start from")
    s.add_argument("--adam-epochs", type=int)
    s.add_argument("--lbfgs-max-iters", type=int)
    s.set_defaults(func=cmd_fit)

    s = common(sub.add_parser("control", help="optimize the cubic plunge power profile"))
    s.add_argument("--model", required=True)
    s.add_argument("--setpoint", type=float)
    s.add_argument("--regime", choices=("fast", "slow", "custom"))
    s.add_argument("--weights", type=float, nargs=4, metavar=("L1", "L2", "L3", "L4"))
    s.add_argument("--T0", type=float)
    s.add_argument("--runs", nargs="+", help="training runs; their mean initial temperature is T0")
    s.add_argument("--dt", type=float, help="resampling step for --runs (s)")
    s.add_argument("--t-end", type=float)
    s.add_argument("--control-dt", type=float)
    s.add_argument("--smoothing", choices=("squared", "literal"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_control)

    s = common(sub.add_parser("simulate", help="roll a profile out on a model or the truth plant"))
    s.add_argument("--profile", required=True)
    s.add_argument("--model")
    s.add_argument("--plant")
    s.add_argument("--h-scale", type=float, default=1.0)
    s.add_argument("--C-scale", type=float, default=1.0)
    s.add_argument("--out", required=True, help="trajectory CSV")
    s.set_defaults(func=cmd_simulate)

    s = common(sub.add_parser("eval", help="metrics for a trajectory and/or a model on runs"))
    s.add_argument("--trajectory")
    s.add_argument("--reference", help="model-predicted trajectory for MAE/MAPE")
    s.add_argument("--profile")
    s.add_argument("--setpoint", type=float)
    s.add_argument("--model")
    s.add_argument("--runs", nargs="+")
    s.add_argument("--dt", type=float)
    s.add_argument("--out", required=True, help="metrics JSON")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("plot", help="SVG overlay of trajectory CSVs")
    s.add_argument("--trajectory", action="append", required=True)
    s.add_argument("--label", action="append")
    s.add_argument("--profile")
    s.add_argument("--setpoint", type=float)
    s.add_argument("--title")
    s.add_argument("--no-power", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except (FSPError, OSError, ValueError, KeyError) as exc:
        kind = type(exc).__name__
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
        print(json.dumps({"error": kind, "command": args.command, "message": msg}), file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
