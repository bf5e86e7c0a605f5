"""Power profiles P(t): tabulated measurements, linear ramps and cubic polynomials.

All profiles work in SI units internally (W, s).  The cubic and linear
variants also expose their coefficients in kW units, which is how the
machine-facing polynomial is written.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigurationError, DomainError

KW = 1000.0


@dataclass(frozen=True)
class TabulatedProfile:
    """Measured power samples, linearly interpolated, clamped outside the range."""

    times: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        p = np.array(self.powers, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ConfigurationError("tabulated profile needs at least one sample")
        if t.shape != p.shape:
            raise ConfigurationError("tabulated times and powers differ in length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ConfigurationError("tabulated times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ConfigurationError("tabulated profile contains non-finite values")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "powers", p)

    def __call__(self, t):
        # np.interp clamps to the endpoint values outside [times[0], times[-1]]
        return np.interp(t, self.times, self.powers)


@dataclass(frozen=True)
class CubicProfile:
    """P(t) = phi1 + phi2 t + phi3 t^2 + phi4 t^3 with coefficients in W, W/s, W/s^2, W/s^3."""

    phi1: float
    phi2: float = 0.0
    phi3: float = 0.0
    phi4: float = 0.0

    @classmethod
    def from_kw(cls, phi_kw) -> "CubicProfile":
        c = [float(v) * KW for v in phi_kw]
        if len(c) != 4:
            raise ConfigurationError("cubic profile needs exactly four coefficients")
        return cls(*c)

    @property
    def phi_kw(self) -> tuple:
        return tuple(v / KW for v in (self.phi1, self.phi2, self.phi3, self.phi4))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        # Horner form
        return self.phi1 + t * (self.phi2 + t * (self.phi3 + t * self.phi4))


@dataclass(frozen=True)
class LinearProfile:
    """The hand-tuned ramp P(t) = phi1 + phi2 t (W, W/s)."""

    phi1: float
    phi2: float = 0.0

    @classmethod
    def from_kw(cls, phi1_kw, phi2_kw) -> "LinearProfile":
        return cls(float(phi1_kw) * KW, float(phi2_kw) * KW)

    def as_cubic(self) -> CubicProfile:
        return CubicProfile(self.phi1, self.phi2, 0.0, 0.0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.phi1 + t * self.phi2


PowerProfile = Union[TabulatedProfile, LinearProfile, CubicProfile]


def eval_power(profile: PowerProfile, t):
    """Evaluate ``profile`` at time(s) ``t`` (s), returning W.

    Scalars in, float out; arrays in, arrays out.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise DomainError("power profiles are defined for t >= 0")
    out = profile(arr)
    return float(out) if np.ndim(out) == 0 else out


def clamp_power(p):
    """Negative electrical power is unphysical; the rollout applies max(P, 0)."""
    return np.maximum(p, 0.0)


def ramp_hold_profile(p_start, slope, p_hold, t_end, dt):
    """Tabulated hand-tuned ramp: linear rise from ``p_start`` W at ``slope`` W/s,
    held at ``p_hold`` W once reached, sampled on the uniform ``dt`` grid.

    The corner is placed on a grid point so that linear interpolation between
    samples reproduces the profile exactly.
    """
    n = int(np.floor(t_end / dt + 1e-9)) + 1
    t = np.arange(n) * dt
    t_corner = round((p_hold - p_start) / slope / dt) * dt
    p = np.where(t <= t_corner, p_start + slope * t, p_start + slope * t_corner)
    return TabulatedProfile(t, np.maximum(p, 0.0))
