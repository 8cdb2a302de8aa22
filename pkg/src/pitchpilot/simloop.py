"""Closed pitch-attitude loop: reference -> controller -> servo -> plant -> gyro.

At each control step k (t = k*dt):

    e   = r(t) - theta(t)
    u   = controller(e)
    v   = error_sign * (u - rate_gain * dtheta/dt)    (rate loop optional)
    delta_e, theta advance over [t, t+dt] with v and the disturbance held

``error_sign`` orients the actuator for plants with negative static gain;
the controller, including any fuzzy tuner, always sees the tracking error.
The record at t holds the signals at the start of the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import lti
from .controllers import ControllerSpec

DIVERGENCE_LIMIT = 1e6
TRACE_COLUMNS = ("t", "reference", "error", "u", "delta_e", "theta", "kp", "ki", "kd")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class StepReference:
    amplitude: float = 1.0
    start: float = 0.0

    def __call__(self, t: float) -> float:
        return self.amplitude if t >= self.start else 0.0


@dataclass(frozen=True)
class RampReference:
    slope: float = 1.0
    start: float = 0.0

    def __call__(self, t: float) -> float:
        return self.slope * (t - self.start) if t >= self.start else 0.0


@dataclass(frozen=True)
class ScheduleReference:
    """Piecewise-constant command: level of the latest ``(time, level)`` reached."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ConfigError("reference.points", "schedule needs at least one (time, level) pair")
        times = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("reference.points", f"schedule times must be strictly increasing, got {times}")

    def __call__(self, t: float) -> float:
        level = 0.0
        for time, value in self.points:
            if t >= time:
                level = value
            else:
                break
        return level

    def segments(self, end: float) -> list[tuple[float, float, float, float]]:
        """(start, stop, previous level, new level) for each level change before ``end``."""
        out = []
        prev = 0.0
        pts = list(self.points)
        for i, (time, value) in enumerate(pts):
            stop = pts[i + 1][0] if i + 1 < len(pts) else end
            if value != prev and time < end:
                out.append((time, min(stop, end), prev, value))
            prev = value
        return out


ReferenceSpec = Union[StepReference, RampReference, ScheduleReference]


def generate_reference(spec: ReferenceSpec, t: float) -> float:
    if t < 0:
        raise ValueError(f"reference time must be non-negative, got {t}")
    return spec(t)


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: str  # "abrupt" | "continuous"
    magnitude: float = 0.0  # abrupt step size, or continuous amplitude
    frequency: float = 0.0  # Hz, continuous only
    start_time: float = 0.0
    injection_point: str = "plant_input"

    def __post_init__(self):
        if self.kind not in ("abrupt", "continuous"):
            raise ConfigError("disturbance.kind", f"expected 'abrupt' or 'continuous', got {self.kind!r}")
        if self.injection_point not in ("plant_input", "plant_output"):
            raise ConfigError(
                "disturbance.injection_point",
                f"expected 'plant_input' or 'plant_output', got {self.injection_point!r}",
            )
        if self.kind == "continuous" and not self.frequency > 0:
            raise ConfigError("disturbance.frequency", "must be positive for a continuous disturbance")
        if self.start_time < 0:
            raise ConfigError("disturbance.start_time", "must be non-negative")

    def __call__(self, t: float) -> float:
        if t < self.start_time:
            return 0.0
        if self.kind == "abrupt":
            return self.magnitude
        return self.magnitude * math.sin(2.0 * math.pi * self.frequency * (t - self.start_time))


@dataclass(frozen=True)
class LoopConfig:
    plant: str
    controller: ControllerSpec
    servo: Optional[str] = None
    inner_loop: Optional[float] = None  # rate-gyro gain; None disables the loop
    dt: float = 0.01
    duration: float = 10.0
    reference: ReferenceSpec = field(default_factory=StepReference)
    disturbance: Optional[DisturbanceSpec] = None
    error_sign: int = 1

    def __post_init__(self):
        if self.plant not in lti.PLANTS:
            raise ConfigError("plant", f"unknown plant {self.plant!r}")
        if self.servo is not None and self.servo not in lti.PLANTS:
            raise ConfigError("servo", f"unknown plant {self.servo!r}")
        if not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ConfigError("dt", f"must be positive, got {self.dt}")
        if not self.duration >= self.dt:
            raise ConfigError("duration", f"must be at least dt ({self.dt}), got {self.duration}")
        if self.error_sign not in (1, -1):
            raise ConfigError("error_sign", f"must be +1 or -1, got {self.error_sign}")
        if self.disturbance is not None and self.disturbance.start_time > self.duration:
            raise ConfigError("disturbance.start_time", "must not exceed duration")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class SimulationTrace:
    t: np.ndarray
    reference: np.ndarray
    error: np.ndarray
    u: np.ndarray
    delta_e: np.ndarray
    theta: np.ndarray
    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray
    diverged: bool = False
    failure_time: Optional[float] = None

    def __len__(self) -> int:
        return len(self.t)

    def columns(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRACE_COLUMNS}

    def as_array(self) -> np.ndarray:
        return np.column_stack([getattr(self, name) for name in TRACE_COLUMNS])

    def window(self, start: float, stop: float) -> "SimulationTrace":
        """Records with start <= t < stop."""
        mask = (self.t >= start - 1e-12) & (self.t < stop - 1e-12)
        return SimulationTrace(*(getattr(self, n)[mask] for n in TRACE_COLUMNS))


def build_model(config: LoopConfig) -> lti.StateSpaceModel:
    """Servo and plant in series; inputs are [servo command, plant-input disturbance]."""
    servo = lti.to_state_space(lti.get_plant(config.servo)) if config.servo else None
    plant = lti.to_state_space(lti.get_plant(config.plant))
    return lti.cascade(servo, plant)


def run(config: LoopConfig, controller=None) -> SimulationTrace:
    """Simulate ``config``; ``controller`` overrides the one built from ``config.controller``."""
    model = build_model(config)
    ctrl = controller if controller is not None else config.controller.build()
    ctrl.reset()
    n = config.n_steps + 1
    dt = config.dt
    sign = config.error_sign
    rate_gain = config.inner_loop
    dist = config.disturbance
    at_output = dist is not None and dist.injection_point == "plant_output"

    rec = np.zeros((n, len(TRACE_COLUMNS)))
    servo = lti.to_state_space(lti.get_plant(config.servo)) if config.servo else None
    n_servo = servo.n_states if servo is not None else 0

    held = np.zeros(2)
    diverged = False
    failure_time = None
    count = n
    for k in range(n):
        t = k * dt
        r = config.reference(t)
        d = dist(t) if dist is not None else 0.0
        theta = model.output(held)
        if at_output:
            theta += d
        e = r - theta
        try:
            u, g = ctrl.compute(e, dt)
        except FloatingPointError:
            u, g = math.nan, None
        if not (math.isfinite(theta) and math.isfinite(u)) or max(abs(theta), abs(u)) > DIVERGENCE_LIMIT:
            diverged, failure_time, count = True, t, k
            break
        v = u
        if rate_gain is not None:
            v -= rate_gain * model.output_derivative(held)
        v *= sign
        if servo is not None:
            delta_e = float((servo.C @ model.state[:n_servo])[0] + servo.D[0, 0] * v)
        else:
            delta_e = v
        rec[k] = (t, r, e, u, delta_e, theta, g.kp, g.ki, g.kd)
        if k == n - 1:
            break
        held = np.array([v, 0.0 if at_output else d])
        try:
            model.step(held, dt)
        except lti.NumericalDivergenceError as exc:
            diverged, failure_time, count = True, exc.time, k + 1
            break
    rec = rec[:count]
    return SimulationTrace(*rec.T.copy(), diverged=diverged, failure_time=failure_time)
