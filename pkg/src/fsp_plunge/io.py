"""Run-file ingestion, artifact persistence and job configuration.

Power is stored in kW in every file and converted to W on the way in.
Every artifact carries the hash of the resolved job parameters plus the
seed; CSVs carry them on a leading ``#`` comment line, which the reader
skips.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, RunFileError
from .model import ThermalModel
from .ode import RolloutGrid, Trajectory
from .profiles import KW
from .sysid import ExperimentRun, FitConfig
from .synth import SyntheticPlantSpec

RUN_HEADER = ("time_s", "temp_C", "power_kW")
DEFAULT_DATA_DT = 0.5


# ----------------------------------------------------------------------------- hashing & atomic writes


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def atomic_write(path, text: str) -> Path:
    """Write via a sibling temp file and os.replace, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False, ensure_ascii=False) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dump_json(obj))


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def provenance(cfg_hash: str, seed: int) -> dict:
    return {"config_hash": cfg_hash, "seed": int(seed)}


def _comment(prov: dict | None) -> str:
    if prov is None:
        return ""
    return f"# config_hash={prov['config_hash']} seed={prov['seed']}\n"


# ----------------------------------------------------------------------------- run CSV


def parse_run_csv(path):
    """Raw (times s, temps degC, powers W) from a run file, validated row by row."""
    times, temps, powers = [], [], []
    header_seen = False
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            cells = [c.strip() for c in row]
            if not header_seen:
                if tuple(cells) != RUN_HEADER:
                    raise RunFileError(f"expected header {','.join(RUN_HEADER)}, got {','.join(cells)}",
                                       lineno, path)
                header_seen = True
                continue
            if len(cells) != 3:
                raise RunFileError(f"expected 3 columns, got {len(cells)}", lineno, path)
            try:
                t, T, p = (float(c) for c in cells)
            except ValueError:
                raise RunFileError(f"non-numeric value in {','.join(cells)}", lineno, path) from None
            if not (math.isfinite(t) and math.isfinite(T) and math.isfinite(p)):
                raise RunFileError("non-finite value", lineno, path)
            if times and not t > times[-1]:
                raise RunFileError(f"time {t!r} s does not increase (previous {times[-1]!r} s)", lineno, path)
            if p < 0:
                raise RunFileError(f"negative power {p!r} kW at t={t!r} s", lineno, path)
            times.append(t)
            temps.append(T)
            powers.append(p * KW)
    if not header_seen:
        raise RunFileError("missing header", None, path)
    if len(times) < 2:
        raise RunFileError("need at least 2 data rows", None, path)
    return np.array(times), np.array(temps), np.array(powers)


def ingest(path, dt=DEFAULT_DATA_DT, run_id=None) -> ExperimentRun:
    """Read a run CSV and resample it linearly onto a uniform ``dt`` grid starting at its first time."""
    t, T, P = parse_run_csv(path)
    grid = RolloutGrid(float(t[0]), float(t[-1]), dt)
    tg = grid.times
    if tg.size < 2:
        raise RunFileError(f"span {t[-1] - t[0]!r} s is shorter than dt={dt!r} s", None, path)
    rid = run_id if run_id is not None else Path(path).stem
    return ExperimentRun(rid, tg, np.interp(tg, t, T), np.interp(tg, t, P))


def run_csv(run: ExperimentRun, prov: dict | None = None) -> str:
    lines = [",".join(RUN_HEADER)]
    for t, T, p in zip(run.times, run.measured_temps, run.measured_powers):
        lines.append(f"{float(t)!r},{float(T)!r},{float(p) / KW!r}")
    return _comment(prov) + "\n".join(lines) + "\n"


def write_run(path, run: ExperimentRun, prov=None) -> Path:
    return atomic_write(path, run_csv(run, prov))


def trajectory_csv(traj: Trajectory, prov: dict | None = None) -> str:
    return _comment(prov) + traj.to_csv()


def read_trajectory(path) -> Trajectory:
    t, T, P = parse_run_csv(path)
    return Trajectory(t, T, P)


def loss_history_csv(history, prov=None) -> str:
    rows = ["iter,loss"] + [f"{i},{float(v)!r}" for i, v in enumerate(history)]
    return _comment(prov) + "\n".join(rows) + "\n"


# ----------------------------------------------------------------------------- model / plant documents


def model_document(model: ThermalModel, prov: dict | None = None) -> dict:
    doc = model.to_dict()
    if prov is not None:
        doc["provenance"] = prov
    return doc


def load_model(path) -> ThermalModel:
    return ThermalModel.from_dict(read_json(path))


def plant_document(spec: SyntheticPlantSpec, prov: dict | None = None) -> dict:
    doc = spec.to_dict()
    if prov is not None:
        doc["provenance"] = prov
    return doc


def load_plant(path) -> SyntheticPlantSpec:
    d = read_json(path)
    if d.get("kind") != "synthetic":
        raise ConfigurationError(f"{path}: not a synthetic plant document")
    return SyntheticPlantSpec.from_dict(d)


# ----------------------------------------------------------------------------- job config


def _strict(cls, d, where):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigurationError(f"unknown field(s) in {where}: {', '.join(unknown)}")
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
    return cls(**kw)


@dataclass(frozen=True)
class ControlSection:
    setpoint: float = 775.0
    T0: float | None = None
    regime: str = "fast"
    weights: tuple | None = None
    t_end: float = 120.0
    dt: float = 0.1
    smoothing: str = "squared"
    adam_iters: int = 500
    adam_lr: float = 1e-3
    lbfgs_tol: float = 1e-8
    lbfgs_max_iters: int = 500


@dataclass(frozen=True)
class PlantSection:
    eta: object = (0.6, -1.2, 2.0)
    C_truth: float = 100.0
    h_truth: float = 2.0
    T_sink: float = 25.0
    noise_std: float = 2.0
    seed: int = 0

    def spec(self) -> SyntheticPlantSpec:
        eta = self.eta if isinstance(self.eta, (int, float)) else tuple(self.eta)
        return SyntheticPlantSpec(eta, self.C_truth, self.h_truth, self.T_sink, self.noise_std, self.seed)


@dataclass(frozen=True)
class JobConfig:
    """Everything a CLI invocation needs besides its input files."""

    seed: int = 0
    data_dt: float = DEFAULT_DATA_DT
    runs: tuple = ()
    out_dir: str | None = None
    fit: FitConfig = field(default_factory=FitConfig)
    control: ControlSection = field(default_factory=ControlSection)
    plant: PlantSection = field(default_factory=PlantSection)

    @classmethod
    def from_dict(cls, d: dict) -> "JobConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("job config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigurationError(f"unknown field(s) in job config: {', '.join(unknown)}")
        return cls(
            seed=int(d.get("seed", 0)),
            data_dt=float(d.get("data_dt", DEFAULT_DATA_DT)),
            runs=tuple(d.get("runs", ())),
            out_dir=d.get("out_dir"),
            fit=_strict(FitConfig, d.get("fit"), "fit"),
            control=_strict(ControlSection, d.get("control"), "control"),
            plant=_strict(PlantSection, d.get("plant"), "plant"),
        )

    @classmethod
    def load(cls, path) -> "JobConfig":
        return cls.from_dict(read_json(path))

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d))  # tuples -> lists
