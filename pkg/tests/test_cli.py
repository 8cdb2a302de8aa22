import csv
import math

import numpy as np
import pytest
import yaml

from pitchpilot.cli import main, run_all, run_scenario
from pitchpilot.controllers import FuzzySelfTuningPID
from pitchpilot.scenario import builtin_names, dump_scenario, load_scenario, parse_scenario
from pitchpilot.simloop import TRACE_COLUMNS, ConfigError, run

SMALL = {
    "name": "small",
    "dt": 0.05,
    "duration": 3.0,
    "plant": "short_period",
    "reference": {"kind": "step", "amplitude": 1.0},
    "runs": [
        {"label": "CPID", "controller": {"kind": "cpid", "kp": 2.0, "ki": 0.02, "kd": 20.0}},
        {"label": "FSPID", "controller": {"kind": "fspid", "kp": 2.0, "ki": 0.02, "kd": 20.0}},
    ],
}


def write(tmp_path, data, name="sc.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def with_(**changes):
    d = yaml.safe_load(yaml.safe_dump(SMALL))
    d.update(changes)
    return d


def test_builtins_present():
    assert builtin_names() == [
        "fig5_three_controllers",
        "fig6_no_inner_loop",
        "fig7_disturbance",
        "fig8_detuned",
        "fig9_tracking",
    ]


def test_alias_lookup():
    sc = load_scenario("fig5")
    assert sc.name == "fig5_three_controllers"
    assert sc.labels == ["PC", "CPID", "FSPID"]
    assert sc["FSPID"].inner_loop is not None


@pytest.mark.parametrize("name", ["fig5", "fig6", "fig7", "fig8", "fig9"])
def test_builtins_share_time_base(name):
    sc = load_scenario(name)
    assert len({(r.config.dt, r.config.duration) for r in sc.runs}) == 1
    assert len(set(sc.labels)) == len(sc.labels)


def test_dt_zero_names_dt(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_scenario(write(tmp_path, with_(dt=0)))
    assert exc.value.key == "dt"


@pytest.mark.parametrize(
    "data, key",
    [
        (with_(plant="boeing_999"), "plant"),
        ({k: v for k, v in SMALL.items() if k != "duration"}, "duration"),
        (with_(runs=[{"label": "x"}]), "runs[0].controller"),
        (with_(runs=[{"label": "x", "controller": {"kind": "lqr"}}]), "runs[0].controller.kind"),
        (with_(runs=[{"label": "x", "dt": 0.1, "controller": {"kind": "pc", "gain": 1}}]), "runs[0].dt"),
        (with_(runs=SMALL["runs"] * 2), "runs"),
        (with_(fuzzy_universe=[-1, 3]), "runs[0].controller.fuzzy_universe"),
        (with_(reference={"kind": "schedule", "points": [[0, 1], [5, 2], [3, 0]]}), "reference.points"),
        (with_(bogus=1), "bogus"),
        (with_(compare=[["CPID", "nope"]]), "compare"),
    ],
)
def test_config_errors_name_key(tmp_path, data, key):
    with pytest.raises(ConfigError) as exc:
        load_scenario(write(tmp_path, data))
    assert exc.value.key == key


def test_universe_override(tmp_path):
    sc = load_scenario(write(tmp_path, with_(fuzzy_universe=[-40, 40])))
    ctrl = sc["FSPID"].controller.build()
    assert isinstance(ctrl, FuzzySelfTuningPID)
    for var in (ctrl.fis.input_e, ctrl.fis.input_ec, *ctrl.fis.outputs):
        assert (var.lo, var.hi) == (-40.0, 40.0)


@pytest.mark.parametrize("name", ["fig5", "fig7", "fig9"])
def test_round_trip(name):
    sc = load_scenario(name)
    again = parse_scenario(yaml.safe_load(dump_scenario(sc)))
    assert again == sc
    for a, b in zip(sc.runs, again.runs):
        assert np.array_equal(run(a.config).as_array(), run(b.config).as_array())


def test_run_writes_artifacts(tmp_path):
    code, summary = run_scenario(load_scenario(write(tmp_path, SMALL)), tmp_path / "out")
    assert code == 0
    for label in ("CPID", "FSPID"):
        path = tmp_path / "out" / f"{label}.csv"
        text = path.read_text(encoding="utf-8")
        assert text.endswith("\n")
        rows = list(csv.reader(text.splitlines()))
        assert tuple(rows[0]) == TRACE_COLUMNS
        assert len(rows) == 1 + 61
        assert all(math.isfinite(float(v)) for row in rows[1:] for v in row)
    on_disk = yaml.safe_load((tmp_path / "out" / "summary.yaml").read_text(encoding="utf-8"))
    assert on_disk == summary
    step = on_disk["runs"]["CPID"]["step"]
    assert set(step) >= {"rise_time", "overshoot_pct", "steady_state_error_pct", "settling_time", "peak_count"}
    assert on_disk["comparisons"][0]["a"] == "CPID"


def test_zero_amplitude_is_degenerate(tmp_path):
    data = with_(reference={"kind": "step", "amplitude": 0.0})
    code, summary = run_scenario(load_scenario(write(tmp_path, data)), tmp_path / "out")
    assert code == 0
    for label, res in run_all(load_scenario(write(tmp_path, data))).items():
        assert np.all(res.trace.theta == 0.0) and np.all(res.trace.u == 0.0)
        assert summary["runs"][label]["step"]["degenerate"] is True


def test_divergence_exit_code(tmp_path):
    data = with_(
        plant="pitch_747",
        servo="servo_747",
        duration=200.0,
        runs=[
            {"label": "bad", "controller": {"kind": "pc", "gain": 50.0}},
            {"label": "good", "error_sign": -1, "controller": {"kind": "pc", "gain": 1.0}},
        ],
    )
    path = write(tmp_path, data)
    code, summary = run_scenario(load_scenario(path), tmp_path / "out")
    assert code == 1
    assert summary["runs"]["bad"]["status"] == "diverged"
    assert summary["runs"]["bad"]["failure_time"] > 0
    assert summary["runs"]["good"]["status"] == "ok"
    assert main(["run", str(path), "--out-dir", str(tmp_path / "cli")]) == 1


def test_main_commands(tmp_path, capsys):
    path = write(tmp_path, SMALL)
    assert main(["run", str(path), "--out-dir", str(tmp_path), "--duration", "1.0"]) == 0
    assert len((tmp_path / "small" / "CPID.csv").read_text().splitlines()) == 1 + 21
    assert main(["list"]) == 0
    assert "fig9_tracking" in capsys.readouterr().out
    assert main(["validate", str(path)]) == 0
    assert main(["show", "fig8"]) == 0
    shown = yaml.safe_load(capsys.readouterr().out.split("\n", 1)[1])
    assert shown["name"] == "fig8_detuned"
    assert main(["validate", str(write(tmp_path, with_(dt=-1), "bad.yaml"))]) == 2
    assert "dt" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    assert main(["run", str(path), "--dt", "0"]) == 2
