"""Discrete controllers: proportional, positional PID and fuzzy self-tuning PID.

The PID law is u = kp*E + ki*sum(E) + kd*(E - E_prev) with no sampling-period
scaling, so ki and kd absorb dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .fuzzy import FuzzyInferenceSystem


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        if not all(math.isfinite(g) for g in (self.kp, self.ki, self.kd)):
            raise ValueError(f"gains must be finite: {self}")

    def __add__(self, other: "PidGains") -> "PidGains":
        return PidGains(self.kp + other.kp, self.ki + other.ki, self.kd + other.kd)


@dataclass
class ControllerState:
    error_sum: float = 0.0
    prev_error: float = 0.0
    last_gains: Optional[PidGains] = None
    initialized: bool = False


class GainTuner(Protocol):
    def infer(self, e: float, ec: float) -> tuple[float, float, float]: ...


def _check_limits(limits):
    if limits is None:
        return None
    lo, hi = (float(v) for v in limits)
    if not lo < hi:
        raise ValueError(f"output limits must satisfy lo < hi, got {limits}")
    return lo, hi


def _check_inputs(error: float, dt: float) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not math.isfinite(error):
        raise FloatingPointError(f"non-finite error input {error}")


class Controller:
    """Common state handling; subclasses implement :meth:`compute`."""

    kind = "base"

    def __init__(self, output_limits=None):
        self.output_limits = _check_limits(output_limits)
        self.state = ControllerState()

    def compute(self, error: float, dt: float) -> tuple[float, PidGains]:
        raise NotImplementedError

    def reset(self) -> "Controller":
        self.state = ControllerState()
        return self

    def _clamp(self, u: float) -> float:
        if self.output_limits is None:
            return u
        lo, hi = self.output_limits
        return min(max(u, lo), hi)


class ProportionalController(Controller):
    kind = "pc"

    def __init__(self, gain: float, output_limits=None):
        super().__init__(output_limits)
        self.gain = float(gain)
        self._gains = PidGains(self.gain, 0.0, 0.0)

    def compute(self, error: float, dt: float) -> tuple[float, PidGains]:
        _check_inputs(error, dt)
        self.state.last_gains = self._gains
        self.state.initialized = True
        return self._clamp(self.gain * error), self._gains


class PIDController(Controller):
    kind = "cpid"

    def __init__(self, gains: PidGains, output_limits=None):
        super().__init__(output_limits)
        self.gains = gains

    def current_gains(self, error: float, ec: float) -> PidGains:
        return self.gains

    def compute(self, error: float, dt: float) -> tuple[float, PidGains]:
        _check_inputs(error, dt)
        st = self.state
        ec = error - st.prev_error if st.initialized else 0.0
        g = self.current_gains(error, ec)
        error_sum = st.error_sum + error
        u = g.kp * error + g.ki * error_sum + g.kd * ec
        if self.output_limits is not None:
            lo, hi = self.output_limits
            # conditional integration: hold the sum if this error would push
            # further into saturation
            if (u > hi and g.ki * error > 0) or (u < lo and g.ki * error < 0):
                error_sum = st.error_sum
                u = g.kp * error + g.ki * error_sum + g.kd * ec
            u = self._clamp(u)
        st.error_sum = error_sum
        st.prev_error = error
        st.last_gains = g
        st.initialized = True
        return u, g


class FuzzySelfTuningPID(PIDController):
    """PID whose gains are ``initial + fuzzy increments(e, ec)`` at every step."""

    kind = "fspid"

    def __init__(self, initial: PidGains, fis: GainTuner, output_limits=None):
        super().__init__(initial, output_limits)
        self.fis = fis

    @property
    def initial(self) -> PidGains:
        return self.gains

    def current_gains(self, error: float, ec: float) -> PidGains:
        dkp, dki, dkd = self.fis.infer(error, ec)
        return self.gains + PidGains(dkp, dki, dkd)


def compute(ctrl: Controller, error: float, dt: float) -> tuple[float, PidGains]:
    return ctrl.compute(error, dt)


def reset(ctrl: Controller) -> Controller:
    return ctrl.reset()


@dataclass(frozen=True)
class ControllerSpec:
    """Declarative controller description; :meth:`build` gives a fresh instance."""

    kind: str
    gain: float = 0.0
    gains: PidGains = field(default_factory=lambda: PidGains(0.0, 0.0, 0.0))
    fuzzy_half_width: float = 5.0
    output_limits: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.kind not in ("pc", "cpid", "fspid"):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if not self.fuzzy_half_width > 0:
            raise ValueError("fuzzy_half_width must be positive")
        _check_limits(self.output_limits)

    def build(self, fis: Optional[GainTuner] = None) -> Controller:
        if self.kind == "pc":
            return ProportionalController(self.gain, self.output_limits)
        if self.kind == "cpid":
            return PIDController(self.gains, self.output_limits)
        if fis is None:
            fis = fuzzy_system_for(self.fuzzy_half_width)
        return FuzzySelfTuningPID(self.gains, fis, self.output_limits)


_FIS_CACHE: dict[float, FuzzyInferenceSystem] = {}


def fuzzy_system_for(half_width: float) -> FuzzyInferenceSystem:
    """Shipped default system rescaled to [-half_width, half_width] (cached)."""
    from .fuzzy import load_default_system, rescale_universe

    fis = _FIS_CACHE.get(half_width)
    if fis is None:
        fis = rescale_universe(load_default_system(), (-half_width, half_width))
        _FIS_CACHE[half_width] = fis
    return fis
