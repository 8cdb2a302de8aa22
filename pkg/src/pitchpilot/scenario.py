"""Scenario files: labelled loop configurations run side by side.

A scenario is a YAML mapping. Loop keys given at top level are defaults for
every entry of ``runs``; each run may override any of them except ``dt`` and
``duration``, which are shared so traces align::

    name: example
    dt: 0.01                      # s, control period
    duration: 10.0                # s
    plant: short_period           # catalog name
    servo: null                   # catalog name or null
    error_sign: 1                 # +1, or -1 for plants with negative static gain
    inner_loop: null              # rate-gyro gain, null disables
    reference: {kind: step, amplitude: 1.0, start: 0.0}
        # or {kind: ramp, slope, start}
        # or {kind: schedule, points: [[t0, level0], [t1, level1], ...]}
    disturbance: null
        # or {kind: abrupt, magnitude, start_time, injection_point}
        # or {kind: continuous, magnitude, frequency, start_time, injection_point}
    fuzzy_universe: [-5, 5]       # symmetric range for every fuzzy variable
    output_limits: null           # [lo, hi] actuator limits
    runs:
      - label: CPID
        controller: {kind: cpid, kp: 1.0, ki: 0.0, kd: 0.0}
      - label: FSPID
        controller: {kind: fspid, kp: 1.0, ki: 0.0, kd: 0.0}
      - label: PC
        controller: {kind: pc, gain: 1.0}
    compare: [[CPID, FSPID]]      # default: every run against the first
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from . import lti
from .controllers import ControllerSpec, PidGains
from .simloop import (
    ConfigError,
    DisturbanceSpec,
    LoopConfig,
    RampReference,
    ScheduleReference,
    StepReference,
)

LOOP_KEYS = (
    "plant",
    "servo",
    "error_sign",
    "inner_loop",
    "reference",
    "disturbance",
    "fuzzy_universe",
    "output_limits",
)
SHARED_KEYS = ("dt", "duration")
TOP_KEYS = {"name", "description", "runs", "compare", *LOOP_KEYS, *SHARED_KEYS}
RUN_KEYS = {"label", "controller", *LOOP_KEYS}

BUILTIN_ALIASES = {
    "fig5": "fig5_three_controllers",
    "fig6": "fig6_no_inner_loop",
    "fig7": "fig7_disturbance",
    "fig8": "fig8_detuned",
    "fig9": "fig9_tracking",
}


@dataclass(frozen=True)
class LabeledRun:
    label: str
    config: LoopConfig


@dataclass(frozen=True)
class Scenario:
    name: str
    runs: tuple[LabeledRun, ...]
    compare: tuple[tuple[str, str], ...] = ()
    description: str = ""

    def __post_init__(self):
        labels = [r.label for r in self.runs]
        if not labels:
            raise ConfigError("runs", "scenario needs at least one run")
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        if dupes:
            raise ConfigError("runs", f"duplicate labels {dupes}")
        first = self.runs[0].config
        for r in self.runs[1:]:
            if (r.config.dt, r.config.duration) != (first.dt, first.duration):
                raise ConfigError("runs", "all runs must share dt and duration")
        for a, b in self.compare:
            for lab in (a, b):
                if lab not in labels:
                    raise ConfigError("compare", f"unknown label {lab!r}")

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.runs]

    def comparisons(self) -> tuple[tuple[str, str], ...]:
        if self.compare:
            return self.compare
        base = self.runs[0].label
        return tuple((base, r.label) for r in self.runs[1:])

    def __getitem__(self, label: str) -> LoopConfig:
        for r in self.runs:
            if r.label == label:
                return r.config
        raise KeyError(label)

    def with_overrides(self, dt: Optional[float] = None, duration: Optional[float] = None) -> "Scenario":
        d = scenario_to_dict(self)
        if dt is not None:
            d["dt"] = dt
        if duration is not None:
            d["duration"] = duration
        return parse_scenario(d)


def _num(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def _require(d: dict, key: str, where: str) -> Any:
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required field")
    return d[key]


def _parse_reference(d: Any, where: str):
    if d is None:
        return StepReference()
    if not isinstance(d, dict):
        raise ConfigError(where, "expected a mapping")
    kind = d.get("kind", "step")
    if kind == "step":
        return StepReference(_num(d.get("amplitude", 1.0), f"{where}.amplitude"), _num(d.get("start", 0.0), f"{where}.start"))
    if kind == "ramp":
        return RampReference(_num(d.get("slope", 1.0), f"{where}.slope"), _num(d.get("start", 0.0), f"{where}.start"))
    if kind == "schedule":
        pts = _require(d, "points", where)
        try:
            points = tuple((_num(p[0], f"{where}.points"), _num(p[1], f"{where}.points")) for p in pts)
        except (TypeError, IndexError):
            raise ConfigError(f"{where}.points", "expected a list of [time, level] pairs") from None
        try:
            return ScheduleReference(points)
        except ConfigError as exc:
            raise ConfigError(f"{where}.points", str(exc).split(": ", 1)[-1]) from None
    raise ConfigError(f"{where}.kind", f"unknown reference kind {kind!r}")


def _parse_disturbance(d: Any, where: str) -> Optional[DisturbanceSpec]:
    if d is None:
        return None
    if not isinstance(d, dict):
        raise ConfigError(where, "expected a mapping")
    kind = _require(d, "kind", where)
    return DisturbanceSpec(
        kind=kind,
        magnitude=_num(d.get("magnitude", 0.0), f"{where}.magnitude"),
        frequency=_num(d.get("frequency", 0.0), f"{where}.frequency"),
        start_time=_num(d.get("start_time", 0.0), f"{where}.start_time"),
        injection_point=d.get("injection_point", "plant_input"),
    )


def _parse_controller(d: Any, where: str, universe, limits) -> ControllerSpec:
    if not isinstance(d, dict):
        raise ConfigError(where, "expected a mapping")
    kind = _require(d, "kind", where)
    if kind not in ("pc", "cpid", "fspid"):
        raise ConfigError(f"{where}.kind", f"unknown controller kind {kind!r}")
    lo, hi = _parse_range(d.get("fuzzy_universe", universe), f"{where}.fuzzy_universe")
    if lo != -hi:
        raise ConfigError(f"{where}.fuzzy_universe", "must be symmetric about zero")
    lim = d.get("output_limits", limits)
    lim = None if lim is None else _parse_range(lim, f"{where}.output_limits")
    if kind == "pc":
        return ControllerSpec("pc", gain=_num(_require(d, "gain", where), f"{where}.gain"), output_limits=lim)
    gains = PidGains(*(_num(_require(d, k, where), f"{where}.{k}") for k in ("kp", "ki", "kd")))
    return ControllerSpec(kind, gains=gains, fuzzy_half_width=hi, output_limits=lim)


def _parse_range(value: Any, key: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(key, f"expected [lo, hi], got {value!r}")
    lo, hi = _num(value[0], key), _num(value[1], key)
    if not lo < hi:
        raise ConfigError(key, f"need lo < hi, got {value!r}")
    return lo, hi


def parse_scenario(data: Any) -> Scenario:
    """Validate a scenario mapping; errors name the offending key."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "scenario must be a mapping")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    name = str(_require(data, "name", ""))
    dt = _num(_require(data, "dt", ""), "dt")
    if not dt > 0:
        raise ConfigError("dt", f"must be positive, got {dt}")
    duration = _num(_require(data, "duration", ""), "duration")
    runs_data = _require(data, "runs", "")
    if not isinstance(runs_data, list) or not runs_data:
        raise ConfigError("runs", "expected a non-empty list")

    runs = []
    for i, rd in enumerate(runs_data):
        where = f"runs[{i}]"
        if not isinstance(rd, dict):
            raise ConfigError(where, "expected a mapping")
        for k in SHARED_KEYS:
            if k in rd:
                raise ConfigError(f"{where}.{k}", "dt and duration are scenario-wide")
        unknown = set(rd) - RUN_KEYS
        if unknown:
            raise ConfigError(f"{where}.{sorted(unknown)[0]}", "unknown field")
        label = str(_require(rd, "label", where))
        merged = {k: data.get(k) for k in LOOP_KEYS}
        merged.update({k: rd[k] for k in LOOP_KEYS if k in rd})
        plant = merged["plant"]
        if plant is None:
            raise ConfigError(f"{where}.plant", "missing required field")
        for key in ("plant", "servo"):
            if merged[key] is not None and merged[key] not in lti.PLANTS:
                raise ConfigError(key, f"unknown plant {merged[key]!r}; available: {sorted(lti.PLANTS)}")
        controller = _parse_controller(
            _require(rd, "controller", where),
            f"{where}.controller",
            merged["fuzzy_universe"] or [-5.0, 5.0],
            merged["output_limits"],
        )
        inner = merged["inner_loop"]
        config = LoopConfig(
            plant=plant,
            servo=merged["servo"],
            controller=controller,
            inner_loop=None if inner is None else _num(inner, "inner_loop"),
            dt=dt,
            duration=duration,
            reference=_parse_reference(merged["reference"], "reference"),
            disturbance=_parse_disturbance(merged["disturbance"], "disturbance"),
            error_sign=int(merged["error_sign"] if merged["error_sign"] is not None else 1),
        )
        runs.append(LabeledRun(label, config))

    compare = data.get("compare") or ()
    try:
        compare = tuple((str(a), str(b)) for a, b in compare)
    except (TypeError, ValueError):
        raise ConfigError("compare", "expected a list of [label_a, label_b] pairs") from None
    return Scenario(name, tuple(runs), compare, str(data.get("description", "")))


def _reference_to_dict(ref) -> dict:
    if isinstance(ref, StepReference):
        return {"kind": "step", "amplitude": ref.amplitude, "start": ref.start}
    if isinstance(ref, RampReference):
        return {"kind": "ramp", "slope": ref.slope, "start": ref.start}
    return {"kind": "schedule", "points": [list(p) for p in ref.points]}


def _controller_to_dict(c: ControllerSpec) -> dict:
    if c.kind == "pc":
        d: dict = {"kind": "pc", "gain": c.gain}
    else:
        d = {"kind": c.kind, "kp": c.gains.kp, "ki": c.gains.ki, "kd": c.gains.kd}
        d["fuzzy_universe"] = [-c.fuzzy_half_width, c.fuzzy_half_width]
    if c.output_limits is not None:
        d["output_limits"] = list(c.output_limits)
    return d


def scenario_to_dict(s: Scenario) -> dict:
    """Fully expanded mapping (every run carries all its loop keys)."""
    first = s.runs[0].config
    runs = []
    for r in s.runs:
        c = r.config
        dist = c.disturbance
        runs.append(
            {
                "label": r.label,
                "plant": c.plant,
                "servo": c.servo,
                "error_sign": c.error_sign,
                "inner_loop": c.inner_loop,
                "reference": _reference_to_dict(c.reference),
                "disturbance": None
                if dist is None
                else {
                    "kind": dist.kind,
                    "magnitude": dist.magnitude,
                    "frequency": dist.frequency,
                    "start_time": dist.start_time,
                    "injection_point": dist.injection_point,
                },
                "controller": _controller_to_dict(c.controller),
            }
        )
    out = {"name": s.name, "description": s.description, "dt": first.dt, "duration": first.duration, "runs": runs}
    if s.compare:
        out["compare"] = [list(p) for p in s.compare]
    return out


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)


def builtin_names() -> list[str]:
    files = resources.files("pitchpilot").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def load_scenario(source) -> Scenario:
    """Load a built-in scenario by name (``fig5`` or its full name) or a YAML file."""
    name = str(source)
    name = BUILTIN_ALIASES.get(name, name)
    if name in builtin_names():
        text = resources.files("pitchpilot").joinpath("scenarios", f"{name}.yaml").read_text(encoding="utf-8")
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError("<path>", f"no built-in scenario or file named {source!r}")
        text = path.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"YAML parse error: {exc}") from None
    return parse_scenario(copy.deepcopy(data))
