import math

import numpy as np
import pytest

from pitchpilot import lti
from pitchpilot.controllers import ControllerSpec, PidGains
from pitchpilot.metrics import analyze_step
from pitchpilot.simloop import (
    TRACE_COLUMNS,
    ConfigError,
    DisturbanceSpec,
    LoopConfig,
    RampReference,
    ScheduleReference,
    StepReference,
    generate_reference,
    run,
)

PC = ControllerSpec("pc", gain=1.0)
CPID = ControllerSpec("cpid", gains=PidGains(4.0, 0.04, 29.1))
FSPID = ControllerSpec("fspid", gains=PidGains(4.0, 0.04, 29.1), fuzzy_half_width=40.0)


def sp_config(controller=PC, **kw):
    kw.setdefault("dt", 0.05)
    kw.setdefault("duration", 10.0)
    return LoopConfig("short_period", controller, **kw)


@pytest.mark.parametrize("controller", [PC, CPID, FSPID])
def test_equilibrium(controller):
    tr = run(sp_config(controller, reference=StepReference(0.0)))
    assert not tr.diverged
    assert np.all(tr.theta == 0.0)
    assert np.all(tr.u == 0.0)


@pytest.mark.parametrize("gain", [0.2, 1.0, 5.0])
def test_type_one_tracking(gain):
    # any stable proportional gain; the free integrator in the plant removes the offset
    tr = run(sp_config(ControllerSpec("pc", gain=gain), dt=0.01, duration=60.0))
    m = analyze_step(tr, 0.0, 1.0)
    assert m.steady_state_error_pct < 0.1
    assert abs(tr.theta[-1] - 1.0) < 1e-3


@pytest.mark.parametrize("point", ["plant_input", "plant_output"])
def test_disturbance_superposition(point):
    dist = DisturbanceSpec("continuous", 0.7, 0.4, start_time=2.0, injection_point=point)
    both = run(sp_config(reference=StepReference(1.0), disturbance=dist))
    ref_only = run(sp_config(reference=StepReference(1.0)))
    dist_only = run(sp_config(reference=StepReference(0.0), disturbance=dist))
    np.testing.assert_allclose(both.theta, ref_only.theta + dist_only.theta, rtol=0, atol=1e-8)


def test_inner_loop_reduces_peaks():
    base = dict(servo="servo_747", error_sign=-1, dt=0.05, duration=100.0)
    without = run(LoopConfig("pitch_747", PC, **base))
    with_loop = run(LoopConfig("pitch_747", PC, inner_loop=10.0, **base))
    p_without = analyze_step(without, 0.0, 1.0).peak_count
    p_with = analyze_step(with_loop, 0.0, 1.0).peak_count
    assert p_without >= 3
    assert p_with < p_without


def test_rate_loop_uses_model_derivative():
    # with a zero controller only the gyro term drives the servo; from rest it stays at rest
    cfg = LoopConfig("pitch_747", PC, servo="servo_747", inner_loop=10.0, error_sign=-1,
                     reference=StepReference(0.0), dt=0.05, duration=5.0)
    assert np.all(run(cfg).theta == 0.0)


def test_determinism():
    cfg = sp_config(FSPID, reference=StepReference(5.0),
                    disturbance=DisturbanceSpec("abrupt", 0.2, start_time=5.0))
    a, b = run(cfg), run(cfg)
    assert np.array_equal(a.as_array(), b.as_array())


def test_trace_layout():
    tr = run(sp_config(CPID, duration=2.0))
    assert tuple(tr.columns()) == TRACE_COLUMNS
    assert len(tr) == 41
    np.testing.assert_allclose(np.diff(tr.t), 0.05)
    assert np.all(np.isfinite(tr.as_array()))
    np.testing.assert_array_equal(tr.error, tr.reference - tr.theta)


@pytest.mark.parametrize("controller", [PC, CPID])
def test_constant_gains_for_fixed_controllers(controller):
    tr = run(sp_config(controller, reference=StepReference(5.0)))
    for col in (tr.kp, tr.ki, tr.kd):
        assert np.all(col == col[0])


def test_fuzzy_gains_vary():
    tr = run(sp_config(FSPID, reference=StepReference(5.0)))
    assert np.ptp(tr.kp) > 0 and np.ptp(tr.kd) > 0


def test_servo_output_recorded():
    cfg = LoopConfig("pitch_747", PC, servo="servo_747", error_sign=-1, dt=0.01, duration=1.0)
    tr = run(cfg)
    # u stays near 1 early on, so the servo output is its (sign-flipped) step response
    assert tr.delta_e[0] == 0.0
    early = tr.t <= 0.1
    np.testing.assert_allclose(tr.delta_e[early], -(1 - np.exp(-10 * tr.t[early])), atol=1e-3)


def test_divergence_marker():
    # positive feedback on the negative-gain plant
    cfg = LoopConfig("pitch_747", ControllerSpec("pc", gain=50.0), servo="servo_747",
                     error_sign=1, dt=0.05, duration=200.0)
    tr = run(cfg)
    assert tr.diverged
    assert tr.failure_time is not None and 0 < tr.failure_time <= 200.0
    assert len(tr) < cfg.n_steps + 1
    assert np.all(np.isfinite(tr.as_array()))


def test_references():
    assert generate_reference(StepReference(1.0, 0.0), 5.0) == 1.0
    assert generate_reference(StepReference(1.0, 2.0), 1.0) == 0.0
    sched = ScheduleReference(((0, 0), (10, 1), (30, 0.5)))
    assert generate_reference(sched, 15.0) == 1.0
    assert generate_reference(sched, 30.0) == 0.5
    assert generate_reference(RampReference(2.0, 1.0), 3.0) == 4.0
    with pytest.raises(ValueError):
        generate_reference(sched, -1.0)
    with pytest.raises(ConfigError):
        ScheduleReference(((0, 0), (30, 1), (10, 0.5)))


def test_schedule_segments():
    sched = ScheduleReference(((0, 0), (10, 1), (30, 0.5)))
    assert sched.segments(50.0) == [(10, 30, 0, 1), (30, 50.0, 1, 0.5)]


@pytest.mark.parametrize(
    "kw, key",
    [
        (dict(dt=0.0), "dt"),
        (dict(dt=-0.1), "dt"),
        (dict(duration=0.001), "duration"),
        (dict(error_sign=0), "error_sign"),
        (dict(servo="nope"), "servo"),
        (dict(disturbance=DisturbanceSpec("abrupt", 1.0, start_time=99.0)), "disturbance.start_time"),
    ],
)
def test_config_errors_name_key(kw, key):
    with pytest.raises(ConfigError) as exc:
        sp_config(**kw)
    assert exc.value.key == key


def test_disturbance_validation():
    with pytest.raises(ConfigError):
        DisturbanceSpec("gust")
    with pytest.raises(ConfigError):
        DisturbanceSpec("continuous", 1.0, 0.0)
    with pytest.raises(ConfigError):
        DisturbanceSpec("abrupt", 1.0, injection_point="sensor")
    d = DisturbanceSpec("continuous", 2.0, 0.25, start_time=1.0)
    assert d(0.5) == 0.0
    assert d(2.0) == pytest.approx(2.0 * math.sin(2 * math.pi * 0.25))


def test_controller_override():
    from pitchpilot.controllers import PIDController

    cfg = sp_config(CPID)
    a = run(cfg)
    b = run(cfg, controller=PIDController(PidGains(4.0, 0.04, 29.1)))
    assert np.array_equal(a.as_array(), b.as_array())


def test_catalog_plants_run():
    for name in lti.PLANTS:
        cfg = LoopConfig(name, ControllerSpec("pc", gain=0.0), dt=0.05, duration=1.0)
        assert np.all(run(cfg).theta == 0.0)
