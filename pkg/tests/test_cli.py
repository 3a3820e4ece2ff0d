"""Command-line interface: subcommands, exit codes, artifacts, determinism."""

import json
import os

import numpy as np
import pytest

from qfcsim.cli import main
from qfcsim.core import make_tags, merge_tags, save_timetags
from qfcsim.emitter import EmitterConfig, simulate_emission, split_50_50
from qfcsim.scenarios import builtin_scenarios, load_scenario


def run(argv):
    return main(argv)


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


BASE_SCENARIO = {
    "name": "tiny",
    "seed": 11,
    "emitter": {
        "n_pulses": 400_000,
        "p_detect_per_pulse": 9.33e-4,
        "background_rate_cps": 22.0,
    },
    "analysis": [
        {
            "estimator": "lifetime",
            "params": {"bin_width_ps": 200.0, "fit_range_ps": [600.0, 900000.0]},
            "targets": {"tau_ns": {"value": 7.47, "tol": 1.0}},
        }
    ],
}


# ---------------------------------------------------------------------------
# simulate


def test_simulate_passes_and_writes_artifacts(tmp_path, capsys):
    scen = write_json(tmp_path / "tiny.json", BASE_SCENARIO)
    code = run(["simulate", scen, "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == 0
    assert "result: PASS" in out
    assert "lifetime.tau_ns" in out and "PASS" in out
    assert (tmp_path / "out" / "tiny_lifetime.csv").exists()
    assert (tmp_path / "out" / "tiny_lifetime_fit.json").exists()
    assert (tmp_path / "out" / "tiny_lifetime.svg").exists()
    assert (tmp_path / "out" / "tiny_summary.json").exists()
    header = (tmp_path / "out" / "tiny_lifetime.csv").read_text().splitlines()[0]
    assert header == "bin_center_ps,counts,counts_per_s"
    fit = json.loads((tmp_path / "out" / "tiny_lifetime_fit.json").read_text())
    assert {"params", "sigmas", "chi2_reduced"} <= set(fit)


def test_simulate_target_miss_exits_1(tmp_path, capsys):
    scen = dict(BASE_SCENARIO)
    scen["analysis"] = [
        {
            "estimator": "lifetime",
            "params": {"bin_width_ps": 200.0},
            "targets": {"tau_ns": {"value": 3.0, "tol": 0.1}},
        }
    ]
    path = write_json(tmp_path / "miss.json", scen)
    code = run(["simulate", path, "--out", str(tmp_path)])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_simulate_invalid_config_exits_2(tmp_path, capsys):
    bad = dict(BASE_SCENARIO)
    bad["emitter"] = {"n_pulses": -4}
    path = write_json(tmp_path / "bad.json", bad)
    assert run(["simulate", path, "--out", str(tmp_path)]) == 2
    unknown = dict(BASE_SCENARIO)
    unknown["mystery_section"] = {}
    path2 = write_json(tmp_path / "unknown.json", unknown)
    assert run(["simulate", path2, "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_simulate_missing_file_exits_2(tmp_path, capsys):
    assert run(["simulate", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_simulate_estimator_failure_exits_3(tmp_path, capsys):
    # a detuning sweep that never crosses the threshold cannot yield a width
    stuck = dict(SWEEP_SCENARIO)
    stuck["name"] = "stuck"
    stuck["sweep"] = {"param": "conversion.detuning_hz", "values": [-5.0e9, 0.0, 5.0e9]}
    stuck["analysis"] = [
        {"estimator": "transmission"},
        {"estimator": "acceptance", "params": {"threshold": 0.8}},
    ]
    path = write_json(tmp_path / "stuck.json", stuck)
    assert run(["simulate", path, "--out", str(tmp_path)]) == 3
    capsys.readouterr()


def test_simulate_zero_pulses_exits_0_with_empty_outputs(tmp_path, capsys):
    scen = dict(BASE_SCENARIO)
    scen["name"] = "empty"
    scen["emitter"] = {"n_pulses": 0}
    scen["analysis"] = [{"estimator": "lifetime", "params": {"bin_width_ps": 200.0}}]
    path = write_json(tmp_path / "empty.json", scen)
    code = run(["simulate", path, "--out", str(tmp_path / "out")])
    assert code == 0
    assert "no-data" in capsys.readouterr().out
    csv = (tmp_path / "out" / "empty_lifetime.csv").read_text()
    assert csv.splitlines() == ["bin_center_ps,counts,counts_per_s"]


def test_simulate_seed_override_changes_data(tmp_path, capsys):
    scen = write_json(tmp_path / "tiny.json", BASE_SCENARIO)
    run(["simulate", scen, "--out", str(tmp_path / "a")])
    run(["simulate", scen, "--seed", "999", "--out", str(tmp_path / "b")])
    capsys.readouterr()
    a = (tmp_path / "a" / "tiny_lifetime.csv").read_bytes()
    b = (tmp_path / "b" / "tiny_lifetime.csv").read_bytes()
    assert a != b


def test_simulate_rerun_byte_identical(tmp_path, capsys):
    scen = write_json(tmp_path / "tiny.json", BASE_SCENARIO)
    run(["simulate", scen, "--out", str(tmp_path / "a")])
    run(["simulate", scen, "--out", str(tmp_path / "b")])
    capsys.readouterr()
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# ---------------------------------------------------------------------------
# sweep


SWEEP_SCENARIO = {
    "name": "ramp",
    "seed": 4,
    "emitter": {
        "n_pulses": 50_000,
        "p_detect_per_pulse": 1.0,
        "bright_fraction": 1.0,
        "background_rate_cps": 0.0,
    },
    "conversion": {
        "launch_transmission": 1.0,
        "fiber_transmission": 1.0,
        "eta_snspd": 1.0,
        "noise_density_slope_cts_s_pm_per_w": 0.0,
        "dark_count_cps": 0.0,
    },
    "sweep": {"param": "conversion.pump_power_w", "values": [0.0, 120.0, 240.0, 360.0]},
    "analysis": [
        {"estimator": "transmission"},
        {
            "estimator": "efficiency_curve",
            "params": {"eval_power_w": 360.0},
            "targets": {"efficiency_at_eval": {"value": 0.48, "tol": 0.05}},
        },
    ],
}


def test_sweep_embedded_values(tmp_path, capsys):
    scen = write_json(tmp_path / "ramp.json", SWEEP_SCENARIO)
    code = run(["simulate", scen, "--out", str(tmp_path / "out")])
    assert code == 0
    capsys.readouterr()
    lines = (tmp_path / "out" / "ramp_sweep.csv").read_text().splitlines()
    assert lines[0].startswith("pump_power_w,")
    assert len(lines) == 5
    assert lines[1].startswith("0.0,")
    assert float(lines[1].split(",")[3]) == 0.0  # no transmission at zero pump


def test_sweep_cli_overrides_values(tmp_path, capsys):
    scen = write_json(tmp_path / "ramp.json", SWEEP_SCENARIO)
    code = run([
        "sweep", scen,
        "--param", "conversion.pump_power_w",
        "--values", "100,200,300,360,390",
        "--out", str(tmp_path / "out"),
    ])
    assert code == 0
    capsys.readouterr()
    lines = (tmp_path / "out" / "ramp_sweep.csv").read_text().splitlines()
    assert len(lines) == 6
    assert lines[1].startswith("100.0,")


def test_sweep_rejects_unknown_param(tmp_path, capsys):
    scen = write_json(tmp_path / "ramp.json", SWEEP_SCENARIO)
    code = run([
        "sweep", scen,
        "--param", "conversion.frobnication",
        "--values", "1,2",
        "--out", str(tmp_path),
    ])
    assert code == 2
    capsys.readouterr()


def test_sweep_rejects_non_scalar_param(tmp_path, capsys):
    scen = write_json(tmp_path / "ramp.json", SWEEP_SCENARIO)
    code = run([
        "sweep", scen,
        "--param", "analysis.estimator",
        "--values", "1,2",
        "--out", str(tmp_path),
    ])
    assert code == 2
    capsys.readouterr()


def test_sweep_values_use_derived_seeds(tmp_path, capsys):
    # two sweep points with identical physics must still differ, because each
    # value gets its own derived seed
    scen = dict(SWEEP_SCENARIO)
    scen["name"] = "same"
    scen["sweep"] = {"param": "conversion.pump_power_w", "values": [200.0, 200.0, 200.0]}
    scen["analysis"] = [{"estimator": "transmission"}]
    path = write_json(tmp_path / "same.json", scen)
    assert run(["simulate", path, "--out", str(tmp_path / "out")]) == 0
    capsys.readouterr()
    lines = (tmp_path / "out" / "same_sweep.csv").read_text().splitlines()
    outs = {line.split(",")[2] for line in lines[1:]}
    assert len(outs) == 3


# ---------------------------------------------------------------------------
# analyze


@pytest.fixture(scope="module")
def tag_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("tags") / "stream.qtt"
    cfg = EmitterConfig(n_pulses=1_000_000, p_detect_per_pulse=9.33e-4,
                        background_rate_cps=22.0)
    save_timetags(path, simulate_emission(cfg, seed=31))
    return str(path)


@pytest.fixture(scope="module")
def pair_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("tags") / "pair.qtt"
    cfg = EmitterConfig(n_pulses=1_000_000, p_detect_per_pulse=0.05, bright_fraction=0.662,
                        telegraph_tau_pulses=7.5)
    tags = simulate_emission(cfg, seed=32)
    a, b = split_50_50(tags, seed=32)
    b = b.copy()
    b["channel"] = 1
    save_timetags(path, merge_tags(a, b))
    return str(path)


def test_analyze_lifetime(tag_file, tmp_path, capsys):
    code = run(["analyze", tag_file, "--estimator", "lifetime",
                "--n-pulses", "1000000", "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["params"]["tau_ns"] - 7.47) < 4.0 * payload["sigmas"]["tau_ns"]
    assert payload["snr"] > 100.0
    assert (tmp_path / "stream_lifetime.csv").exists()


def test_analyze_lifetime_fit_range(tag_file, capsys):
    code = run(["analyze", tag_file, "--estimator", "lifetime",
                "--n-pulses", "1000000", "--fit-range-ps", "600:900000"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["converged"]


def test_analyze_g2(pair_file, tmp_path, capsys):
    code = run(["analyze", pair_file, "--estimator", "g2", "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.3 < payload["params"]["amplitude"] < 0.7
    assert payload["g2_zero"] < 0.2
    assert (tmp_path / "pair_g2.csv").exists()


def test_analyze_noise(tag_file, capsys):
    code = run(["analyze", tag_file, "--estimator", "noise",
                "--filter-fwhm-pm", "36.5", "--eta-snspd", "1.0", "--duration-s", "1.0"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["density_cts_s_pm"] > 0.0
    assert payload["ci_low_cts_s_pm"] <= payload["density_cts_s_pm"] <= payload["ci_high_cts_s_pm"]


def test_analyze_noise_requires_filter_width(tag_file, capsys):
    assert run(["analyze", tag_file, "--estimator", "noise"]) == 2
    capsys.readouterr()


def test_analyze_missing_file_exits_2(tmp_path, capsys):
    assert run(["analyze", str(tmp_path / "absent.qtt"), "--estimator", "lifetime"]) == 2
    capsys.readouterr()


def test_analyze_corrupt_file_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.qtt"
    bad.write_bytes(b"NOTQTT" + b"\x00" * 32)
    assert run(["analyze", str(bad), "--estimator", "lifetime"]) == 2
    capsys.readouterr()


def test_analyze_g2_needs_two_channels(tmp_path, capsys):
    path = tmp_path / "single.qtt"
    save_timetags(path, make_tags([1000, 2000, 3000]))
    assert run(["analyze", str(path), "--estimator", "g2"]) == 3
    capsys.readouterr()


# ---------------------------------------------------------------------------
# packaged scenarios


def test_builtin_scenarios_all_load():
    names = builtin_scenarios()
    assert names == sorted(names)
    assert len(names) == 6
    for name in names:
        scenario = load_scenario(name)
        assert scenario.name == name
        assert scenario.analysis
