"""Step-response metrics and side-by-side comparison."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

SETTLING_BAND = 0.02  # fraction of |final value|
PEAK_BAND = 0.01  # peaks must exceed final value by this fraction
FINAL_WINDOW = 0.05  # trailing fraction of samples averaged for the final value
DEGENERATE_EPS = 1e-9


@dataclass(frozen=True)
class StepMetrics:
    rise_time: Optional[float]  # None when 90% of the final value is never reached
    overshoot_pct: float
    steady_state_error_pct: float
    settling_time: Optional[float]
    peak_count: int
    final_value: float
    degenerate: bool = False

    @property
    def rise_time_defined(self) -> bool:
        return self.rise_time is not None

    def to_dict(self) -> dict:
        return asdict(self)


def _crossing(t: np.ndarray, z: np.ndarray, level: float) -> Optional[float]:
    idx = np.flatnonzero(z >= level)
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0 or z[i] == z[i - 1]:
        return float(t[i])
    # linear interpolation between the bracketing samples
    frac = (level - z[i - 1]) / (z[i] - z[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def _peak_values(z: np.ndarray) -> np.ndarray:
    """Values of interior local maxima, plateaus collapsed to one sample."""
    if z.size < 3:
        return np.empty(0)
    starts = np.r_[0, np.flatnonzero(np.diff(z)) + 1]
    runs = z[starts]
    if runs.size < 3:
        return np.empty(0)
    mid = runs[1:-1]
    return mid[(mid > runs[:-2]) & (mid > runs[2:])]


def analyze_response(
    t: np.ndarray,
    y: np.ndarray,
    step_time: float,
    step_target: float,
    baseline: float = 0.0,
) -> StepMetrics:
    """Metrics for the response ``y`` to a step of size ``step_target`` at ``step_time``.

    ``baseline`` is the output level before the step; samples before
    ``step_time`` are ignored.
    """
    if step_target == 0:
        raise ValueError("step_target must be nonzero")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = t >= step_time - 1e-12
    t, y = t[mask], y[mask] - baseline
    if t.size == 0:
        raise ValueError("no samples at or after step_time")
    tail = max(1, int(math.ceil(FINAL_WINDOW * t.size)))
    final = float(np.mean(y[-tail:]))
    sse = abs(step_target - final) / abs(step_target) * 100.0
    if abs(final) <= DEGENERATE_EPS:
        return StepMetrics(None, 0.0, sse, None, 0, final, degenerate=True)

    f = abs(final)
    z = y * math.copysign(1.0, final)
    t10 = _crossing(t, z, 0.1 * f)
    t90 = _crossing(t, z, 0.9 * f)
    rise = None if t10 is None or t90 is None else max(0.0, t90 - t10)

    peaks = _peak_values(z)
    overshoot = max(0.0, (float(peaks.max()) - f) / f * 100.0) if peaks.size else 0.0
    peak_count = int(np.count_nonzero(peaks > f * (1.0 + PEAK_BAND)))

    outside = np.flatnonzero(np.abs(z - f) > SETTLING_BAND * f)
    if outside.size == 0:
        settling = 0.0
    elif outside[-1] + 1 < t.size:
        settling = float(t[outside[-1] + 1] - step_time)
    else:
        settling = None
    return StepMetrics(rise, overshoot, sse, settling, peak_count, final)


def analyze_step(trace, step_time: float, step_target: float, baseline: float = 0.0) -> StepMetrics:
    return analyze_response(trace.t, trace.theta, step_time, step_target, baseline)


def analyze_segments(trace, segments) -> list[StepMetrics]:
    """Per-segment metrics for ``(start, stop, old level, new level)`` tuples."""
    out = []
    for start, stop, old, new in segments:
        w = trace.window(start, stop)
        out.append(analyze_response(w.t, w.theta, start, new - old, baseline=old))
    return out


@dataclass(frozen=True)
class DisturbanceMetrics:
    peak_deviation: float
    rms_deviation: float


def disturbance_deviation(trace, start_time: float, setpoint: Optional[float] = None) -> DisturbanceMetrics:
    """Deviation of the output from the setpoint (default: the reference) after ``start_time``."""
    mask = trace.t >= start_time - 1e-12
    ref = trace.reference[mask] if setpoint is None else setpoint
    dev = trace.theta[mask] - ref
    if dev.size == 0:
        raise ValueError("no samples after start_time")
    return DisturbanceMetrics(float(np.max(np.abs(dev))), float(np.sqrt(np.mean(dev**2))))


@dataclass(frozen=True)
class MetricDelta:
    name: str
    a: Optional[float]
    b: Optional[float]

    @property
    def computable(self) -> bool:
        return self.a is not None and self.b is not None

    @property
    def delta(self) -> Optional[float]:
        """b - a, in the metric's own units (percentage points for % metrics)."""
        return self.b - self.a if self.computable else None

    @property
    def relative_pct(self) -> Optional[float]:
        if not self.computable or self.a == 0:
            return 0.0 if self.computable and self.b == self.a else None
        return (self.b - self.a) / abs(self.a) * 100.0


@dataclass(frozen=True)
class ComparisonReport:
    label_a: str
    label_b: str
    deltas: tuple[MetricDelta, ...]

    def __getitem__(self, name: str) -> MetricDelta:
        for d in self.deltas:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def speed_improvement_pct(self) -> Optional[float]:
        """Rise-time reduction of b relative to a, in percent."""
        rel = self["rise_time"].relative_pct
        return None if rel is None else -rel

    @property
    def overshoot_reduction_pts(self) -> float:
        return self["overshoot_pct"].a - self["overshoot_pct"].b

    def to_dict(self) -> dict:
        out = {}
        for d in self.deltas:
            out[d.name] = {
                self.label_a: d.a,
                self.label_b: d.b,
                "delta": d.delta if d.computable else "not computable",
                "relative_pct": d.relative_pct if d.relative_pct is not None else "not computable",
            }
        return out

    def format(self) -> str:
        lines = [f"{self.label_b} vs {self.label_a}"]
        for d in self.deltas:
            if not d.computable:
                lines.append(f"  {d.name}: {d.a} -> {d.b} (delta not computable)")
                continue
            rel = d.relative_pct
            rel_s = "n/a" if rel is None else f"{rel:+.1f}%"
            lines.append(f"  {d.name}: {d.a:.4g} -> {d.b:.4g} (delta {d.delta:+.4g}, {rel_s})")
        return "\n".join(lines)


COMPARED_FIELDS = ("rise_time", "overshoot_pct", "steady_state_error_pct", "settling_time", "peak_count")


def compare(a: StepMetrics, b: StepMetrics, label_a: str = "a", label_b: str = "b") -> ComparisonReport:
    return ComparisonReport(
        label_a,
        label_b,
        tuple(MetricDelta(name, getattr(a, name), getattr(b, name)) for name in COMPARED_FIELDS),
    )
