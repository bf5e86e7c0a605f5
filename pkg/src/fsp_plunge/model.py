"""Lumped thermal plant with a neural power-conversion efficiency.

    C dT/dt = eta(T, P; theta) * P - h * (T - T_sink)

``eta`` is a 2-15-1 sigmoid MLP whose output lies in (0, 1).  C and h are
stored as logarithms so that any real parameter vector is a valid plant.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

HIDDEN = 15
N_NET_PARAMS = HIDDEN * 2 + HIDDEN + HIDDEN + 1  # 61
N_PARAMS = 2 + N_NET_PARAMS  # 63
DEFAULT_INPUT_SCALE = (1000.0, 10000.0)
DEFAULT_SINK_C = 25.0
MODEL_FORMAT_VERSION = 1
# keeps eta strictly inside (0, 1) in floating point; mirrored in _kernels
OUT_LOGIT_MAX = 36.0


def _sigmoid(x):
    # split form avoids overflow in exp for large |x|
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _frozen(a, shape):
    arr = np.array(a, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EfficiencyNetwork:
    """2 -> 15 -> 1 sigmoid MLP mapping (temperature degC, power W) to eta in (0, 1)."""

    w_hidden: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: float
    input_scale: tuple = DEFAULT_INPUT_SCALE

    def __post_init__(self):
        object.__setattr__(self, "w_hidden", _frozen(self.w_hidden, (HIDDEN, 2)))
        object.__setattr__(self, "b_hidden", _frozen(self.b_hidden, (HIDDEN,)))
        object.__setattr__(self, "w_out", _frozen(self.w_out, (HIDDEN,)))
        object.__setattr__(self, "b_out", float(self.b_out))
        s_t, s_p = (float(v) for v in self.input_scale)
        if not (s_t > 0 and s_p > 0):
            raise ConfigurationError("input scales must be positive")
        object.__setattr__(self, "input_scale", (s_t, s_p))

    @classmethod
    def zeros(cls, input_scale=DEFAULT_INPUT_SCALE) -> "EfficiencyNetwork":
        return cls(np.zeros((HIDDEN, 2)), np.zeros(HIDDEN), np.zeros(HIDDEN), 0.0, input_scale)

    @classmethod
    def constant(cls, eta: float, input_scale=DEFAULT_INPUT_SCALE) -> "EfficiencyNetwork":
        """A network whose output is ``eta`` everywhere (zero weights, logit bias)."""
        if not 0.0 < eta < 1.0:
            raise DomainError("constant efficiency must lie in (0, 1)")
        net = cls.zeros(input_scale)
        return cls(net.w_hidden, net.b_hidden, net.w_out, math.log(eta / (1.0 - eta)), input_scale)

    @classmethod
    def random(cls, seed: int, low=-0.5, high=0.5, input_scale=DEFAULT_INPUT_SCALE) -> "EfficiencyNetwork":
        rng = np.random.default_rng(seed)
        flat = rng.uniform(low, high, size=N_NET_PARAMS)
        return cls.from_vector(flat, input_scale)

    @property
    def n_params(self) -> int:
        return self.w_hidden.size + self.b_hidden.size + self.w_out.size + 1

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w_hidden.ravel(), self.b_hidden, self.w_out, [self.b_out]])

    @classmethod
    def from_vector(cls, vec, input_scale=DEFAULT_INPUT_SCALE) -> "EfficiencyNetwork":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_NET_PARAMS,):
            raise ConfigurationError(f"expected {N_NET_PARAMS} network parameters, got {vec.shape}")
        w = vec[: 2 * HIDDEN].reshape(HIDDEN, 2)
        b = vec[2 * HIDDEN : 3 * HIDDEN]
        v = vec[3 * HIDDEN : 4 * HIDDEN]
        return cls(w, b, v, vec[-1], input_scale)

    def __call__(self, temperature, power):
        """Vectorized forward pass; broadcasts ``temperature`` against ``power``."""
        T, P = np.broadcast_arrays(np.asarray(temperature, float), np.asarray(power, float))
        x = np.stack([T / self.input_scale[0], P / self.input_scale[1]], axis=-1)
        hidden = _sigmoid(x @ self.w_hidden.T + self.b_hidden)
        logit = np.clip(hidden @ self.w_out + self.b_out, -OUT_LOGIT_MAX, OUT_LOGIT_MAX)
        return _sigmoid(logit)


def eval_efficiency(net: EfficiencyNetwork, temperature: float, power: float) -> float:
    """eta(T, P) for scalar inputs; rejects non-finite values."""
    if not (math.isfinite(temperature) and math.isfinite(power)):
        raise DomainError(f"non-finite efficiency input (T={temperature}, P={power})")
    return float(net(temperature, power))


@dataclass(frozen=True, eq=False)
class ThermalModel:
    """Fitted plant.  ``capacitance`` and ``heat_loss`` are derived from the log fields."""

    log_capacitance: float
    log_heat_loss: float
    network: EfficiencyNetwork
    sink_temperature: float = DEFAULT_SINK_C

    def __post_init__(self):
        for name in ("log_capacitance", "log_heat_loss", "sink_temperature"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @classmethod
    def initial(cls, seed: int = 0, sink_temperature=DEFAULT_SINK_C,
                capacitance=1.0e4, heat_loss=10.0, input_scale=DEFAULT_INPUT_SCALE) -> "ThermalModel":
        """Seeded default initialization used to start a fit."""
        return cls(math.log(capacitance), math.log(heat_loss),
                   EfficiencyNetwork.random(seed, input_scale=input_scale), sink_temperature)

    @classmethod
    def constant_efficiency(cls, eta, capacitance, heat_loss, sink_temperature=DEFAULT_SINK_C,
                            input_scale=DEFAULT_INPUT_SCALE) -> "ThermalModel":
        return cls(math.log(capacitance), math.log(heat_loss),
                   EfficiencyNetwork.constant(eta, input_scale), sink_temperature)

    @property
    def capacitance(self) -> float:
        return math.exp(self.log_capacitance)

    @property
    def heat_loss(self) -> float:
        return math.exp(self.log_heat_loss)

    def efficiency(self, temperature, power):
        return self.network(temperature, power)

    def rhs(self, temperature, power):
        """dT/dt in degC/s.  Vectorized over numpy inputs."""
        eta = self.network(temperature, power)
        return (eta * power - self.heat_loss * (np.asarray(temperature) - self.sink_temperature)) / self.capacitance

    # -- parameter-vector layout: [log C, log h, W_hidden (row-major), b_hidden, w_out, b_out]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.log_capacitance, self.log_heat_loss], self.network.to_vector()])

    def with_vector(self, vec) -> "ThermalModel":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_PARAMS,):
            raise ConfigurationError(f"expected {N_PARAMS} parameters, got {vec.shape}")
        net = EfficiencyNetwork.from_vector(vec[2:], self.network.input_scale)
        return ThermalModel(vec[0], vec[1], net, self.sink_temperature)

    def to_dict(self) -> dict:
        n = self.network
        return {
            "version": MODEL_FORMAT_VERSION,
            "sink_temperature_C": self.sink_temperature,
            "log_capacitance": self.log_capacitance,
            "log_heat_loss": self.log_heat_loss,
            "input_scale": list(n.input_scale),
            "w_hidden": [float(v) for v in n.w_hidden.ravel()],
            "b_hidden": [float(v) for v in n.b_hidden],
            "w_out": [float(v) for v in n.w_out],
            "b_out": n.b_out,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThermalModel":
        if d.get("version") != MODEL_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported model version {d.get('version')!r}")
        try:
            net = EfficiencyNetwork(
                np.asarray(d["w_hidden"], float).reshape(HIDDEN, 2),
                d["b_hidden"], d["w_out"], d["b_out"], tuple(d["input_scale"]),
            )
            return cls(d["log_capacitance"], d["log_heat_loss"], net, d["sink_temperature_C"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"malformed model document: {exc}") from None

    def digest(self) -> str:
        """SHA-256 over the exact parameter bits; changes iff any parameter changes."""
        h = hashlib.sha256()
        h.update(self.to_vector().tobytes())
        h.update(np.array([self.sink_temperature, *self.network.input_scale]).tobytes())
        return h.hexdigest()


def eval_rhs(model: ThermalModel, temperature: float, power: float) -> float:
    """Scalar right-hand side (eta P - h (T - T_sink)) / C."""
    if not (math.isfinite(temperature) and math.isfinite(power)):
        raise DomainError(f"non-finite rhs input (T={temperature}, P={power})")
    return float(model.rhs(temperature, power))


def model_json(model: ThermalModel) -> str:
    """Model document as text (shortest round-trip float repr, lossless)."""
    return json.dumps(model.to_dict(), indent=2) + "\n"
