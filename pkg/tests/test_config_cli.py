"""Configuration loading, validation paths, and the CLI surface."""

import json
import os

import pytest
import yaml

from detchain.cli import main
from detchain.config import build_config, emit_config, load_config, to_dict
from detchain.errors import ConfigParseError, ConfigValidationError
from detchain.wavefunction import window_probabilities

REPO_CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs",
                           "gaussian8.yaml")
SG_CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs",
                         "stern_gerlach.yaml")


def minimal_config(**overrides):
    cfg = {
        "run": {"events": 1000, "seed": 5},
        "source": {
            "particle": {"kind": "charged", "kinetic_energy_ev": 1.0e5,
                         "rest_mass_energy_ev": 9.38272088e8,
                         "charge_sign": 1},
            "wavefunction": {"form": "gaussian", "mean_m": 0.0,
                             "sigma_m": 1.0,
                             "grid": {"min_m": -8.0, "max_m": 8.0,
                                      "points": 801}},
        },
        "detectors": [{
            "window": {"center_m": 0.0, "width_m": 20.0},
            "material": {"type": "charged_stopper", "w_value_ev": 25.0},
            "threshold_energy_ev": 1.0e4,
            "amplifier": {"type": "gas_gain", "gain": 50.0},
        }],
        "shaping": {"amplitude_per_coulomb": 2.5e13, "rise_time_s": 5.0e-9,
                    "decay_time_s": 5.0e-8},
        "discriminator": {"threshold_v": 0.2},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, tree, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(tree))
    return str(path)


def test_minimal_config_defaults_applied(tmp_path):
    cfg = load_config(write_config(tmp_path, minimal_config()))
    assert cfg.events == 1000 and cfg.seed == 5
    assert cfg.workers == 1 and cfg.event_log_cap == 1000
    assert cfg.chi_square_quantile == 0.999
    assert cfg.discriminator.logic_high_v == 1.0
    assert cfg.discriminator.logic_low_v == 0.0
    assert cfg.detectors[0].window.detector_index == 1
    assert cfg.detectors[0].amplifier.w_value_ev == 25.0  # from the material
    assert cfg.warnings == ()


def test_repo_configs_load():
    for path in [REPO_CONFIG, SG_CONFIG]:
        cfg = load_config(path)
        assert cfg.events == 1000000
        assert not cfg.warnings


def test_overlapping_windows_named(tmp_path):
    tree = minimal_config()
    tree["detectors"] = [
        {"window": {"center_m": 0.0, "width_m": 2.0},
         "material": {"type": "charged_stopper"},
         "threshold_energy_ev": 1.0e4,
         "amplifier": {"type": "gas_gain", "gain": 50.0}},
        {"window": {"center_m": 0.5, "width_m": 2.0},
         "material": {"type": "charged_stopper"},
         "threshold_energy_ev": 1.0e4,
         "amplifier": {"type": "gas_gain", "gain": 50.0}},
    ]
    with pytest.raises(ConfigValidationError) as info:
        load_config(write_config(tmp_path, tree))
    message = str(info.value)
    assert "1" in message and "2" in message and "overlap" in message


def test_negative_threshold_rejected(tmp_path):
    tree = minimal_config()
    tree["detectors"][0]["threshold_energy_ev"] = -1.0
    with pytest.raises(ConfigValidationError) as info:
        load_config(write_config(tmp_path, tree))
    assert "threshold_energy_ev" in str(info.value)


def test_multiple_errors_reported_together(tmp_path):
    tree = minimal_config()
    tree["run"]["events"] = 0
    tree["discriminator"] = {"threshold_v": -0.5}
    with pytest.raises(ConfigValidationError) as info:
        load_config(write_config(tmp_path, tree))
    message = str(info.value)
    assert "run.events" in message and "discriminator" in message


def test_parse_error_on_bad_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("run: [unclosed\n")
    with pytest.raises(ConfigParseError):
        load_config(str(path))
    with pytest.raises(ConfigParseError):
        load_config(str(tmp_path / "missing.yaml"))


def test_consistency_warning_when_gain_too_small(tmp_path):
    tree = minimal_config()
    tree["shaping"]["amplitude_per_coulomb"] = 1.0e9   # peak ~3e-5 V
    cfg = load_config(write_config(tmp_path, tree))
    assert any("discriminator" in w for w in cfg.warnings)


def test_roundtrip_normalized_config(tmp_path):
    cfg = load_config(write_config(tmp_path, minimal_config()))
    out = tmp_path / "normalized.yaml"
    emit_config(cfg, out)
    again = load_config(str(out))
    assert again.events == cfg.events
    assert again.seed == cfg.seed
    assert len(again.detectors) == len(cfg.detectors)
    probs_a = window_probabilities(cfg.source.wavefunction,
                                   [d.window for d in cfg.detectors])
    probs_b = window_probabilities(again.source.wavefunction,
                                   [d.window for d in again.detectors])
    assert probs_a == pytest.approx(probs_b, rel=1e-12)
    assert to_dict(again)["detectors"] == to_dict(cfg)["detectors"]


def test_build_config_rejects_non_mapping():
    with pytest.raises(ConfigValidationError):
        build_config([1, 2, 3])


def _run_cli(tmp_path, tree, *args):
    path = write_config(tmp_path, tree)
    return main([*args, "--config", path])


def test_cli_run_writes_reports(tmp_path, capsys):
    tree = minimal_config()
    out = str(tmp_path / "out")
    code = _run_cli(tmp_path, tree, "run", "--out", out,
                    "--events", "2000", "--check")
    assert code == 0
    table = open(os.path.join(out, "detectors.csv")).read()
    assert table.splitlines()[0] == (
        "detector_index,center_m,width_m,counts,empirical_prob,"
        "theoretical_prob,stderr,z_score")
    summary = json.load(open(os.path.join(out, "summary.json")))
    assert summary["pass"] is True
    assert summary["n_source"] == 2000
    assert summary["miss_count"] + summary["no_signal_count"] \
        + sum(summary["counts"]) == 2000


def test_cli_same_seed_byte_identical(tmp_path):
    tree = minimal_config()
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert _run_cli(tmp_path, tree, "run", "--out", out_a) == 0
    assert _run_cli(tmp_path, tree, "run", "--out", out_b) == 0
    for name in ["detectors.csv", "summary.json"]:
        a = open(os.path.join(out_a, name), "rb").read()
        b = open(os.path.join(out_b, name), "rb").read()
        assert a == b, name


def test_cli_exit_codes(tmp_path):
    bad_yaml = tmp_path / "bad.yaml"
    bad_yaml.write_text("run: [unclosed\n")
    assert main(["validate", "--config", str(bad_yaml)]) == 2

    tree = minimal_config()
    tree["detectors"][0]["threshold_energy_ev"] = -5.0
    assert _run_cli(tmp_path, tree, "validate") == 3

    # --check failure: an inoperable detector breaks one-to-one
    tree = minimal_config()
    tree["detectors"][0]["operable"] = False
    code = _run_cli(tmp_path, tree, "run", "--events", "500",
                    "--out", str(tmp_path / "o"), "--check")
    assert code == 5


def test_cli_io_error_exit_code(tmp_path):
    # output directory path collides with an existing file: exit code 4
    blocker = tmp_path / "blocked"
    blocker.write_text("not a directory")
    tree = minimal_config()
    code = _run_cli(tmp_path, tree, "run", "--events", "50",
                    "--out", str(blocker))
    assert code == 4


def test_cli_validate_and_probe(tmp_path, capsys):
    tree = minimal_config()
    assert _run_cli(tmp_path, tree, "validate") == 0
    captured = capsys.readouterr()
    assert "config ok" in captured.out

    assert _run_cli(tmp_path, tree, "probe") == 0
    captured = capsys.readouterr()
    assert "window_prob" in captured.out
    assert "total_window_prob" in captured.out


def test_cli_seed_override_changes_output(tmp_path):
    tree = minimal_config()
    out_a, out_b = str(tmp_path / "s1"), str(tmp_path / "s2")
    _run_cli(tmp_path, tree, "run", "--out", out_a, "--seed", "1")
    _run_cli(tmp_path, tree, "run", "--out", out_b, "--seed", "2")
    a = json.load(open(os.path.join(out_a, "summary.json")))
    b = json.load(open(os.path.join(out_b, "summary.json")))
    assert a["seed"] != b["seed"]


def test_cli_dump_pulses(tmp_path):
    tree = minimal_config()
    out = str(tmp_path / "out")
    code = _run_cli(tmp_path, tree, "run", "--out", out, "--events", "100",
                    "--dump-pulses", "0,5,7")
    assert code == 0
    for trial in [0, 5, 7]:
        path = os.path.join(out, "pulses", f"trial_{trial}.csv")
        lines = open(path).read().splitlines()
        assert lines[0] == "t_s,U_V"
        assert len(lines) > 100
        t0, u0 = lines[1].split(",")
        float(t0), float(u0)  # fixed-point decimal parses as float


def test_cli_dump_pulses_rejects_out_of_range_ids(tmp_path):
    tree = minimal_config()
    code = _run_cli(tmp_path, tree, "run", "--events", "100",
                    "--out", str(tmp_path / "o"), "--dump-pulses", "5,100")
    assert code == 3


def test_config_dump_pulses_field(tmp_path):
    tree = minimal_config()
    tree["run"]["events"] = 50
    tree["run"]["dump_pulses"] = [1, 4]
    out = str(tmp_path / "out")
    assert _run_cli(tmp_path, tree, "run", "--out", out) == 0
    for trial in [1, 4]:
        assert os.path.exists(os.path.join(out, "pulses",
                                           f"trial_{trial}.csv"))
    tree["run"]["dump_pulses"] = [99]
    assert _run_cli(tmp_path, tree, "validate") == 3


def test_cli_event_log_written_when_retained(tmp_path):
    tree = minimal_config()
    tree["run"]["retain_event_log"] = True
    tree["run"]["events"] = 300
    out = str(tmp_path / "out")
    assert _run_cli(tmp_path, tree, "run", "--out", out) == 0
    lines = open(os.path.join(out, "events.csv")).read().splitlines()
    assert len(lines) == 301  # header + one row per trial


def test_cli_eight_detector_table(tmp_path):
    tree = yaml.safe_load(open(REPO_CONFIG))
    tree["run"]["events"] = 20000
    out = str(tmp_path / "out")
    assert _run_cli(tmp_path, tree, "run", "--out", out, "--check") == 0
    lines = open(os.path.join(out, "detectors.csv")).read().splitlines()
    assert len(lines) == 9                      # header + 8 data rows
    z_scores = [abs(float(row.split(",")[7])) for row in lines[1:]]
    assert all(z <= 4.0 for z in z_scores)
    assert [int(row.split(",")[0]) for row in lines[1:]] == list(range(1, 9))


def test_cli_sg_scenario(tmp_path):
    cfg = load_config(SG_CONFIG)
    tree = yaml.safe_load(open(SG_CONFIG))
    tree["run"]["events"] = 20000
    out = str(tmp_path / "out")
    code = _run_cli(tmp_path, tree, "sg", "--out", out, "--check")
    assert code == 0
    spin = json.load(open(os.path.join(out, "sg_spin.json")))
    assert spin["up_probability"] == pytest.approx(0.2, abs=1e-12)
    assert abs(spin["up_fraction"] - 0.2) < 0.02
    assert cfg.stern_gerlach is not None


def test_cli_sg_requires_block(tmp_path):
    tree = minimal_config()
    assert _run_cli(tmp_path, tree, "sg") == 3


def test_emit_report_empty_detector_array(tmp_path):
    from detchain.cli import emit_report
    from detchain.experiment import ExperimentReport, verify_born_agreement
    empty = ExperimentReport(
        n_source=0, seed=0, detectors=(), miss_count=0, no_reaction_count=0,
        dead_channel_count=0, below_threshold_count=0,
        discriminator_low_count=0, chi_square=0.0, chi_square_dof=0)
    paths = emit_report(empty, verify_born_agreement(empty), str(tmp_path))
    lines = open(paths["table"]).read().splitlines()
    assert lines == ["detector_index,center_m,width_m,counts,empirical_prob,"
                     "theoretical_prob,stderr,z_score"]
