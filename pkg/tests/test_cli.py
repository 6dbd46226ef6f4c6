"""End-to-end command tests driving `main` in process."""

import json
import re

import pytest

from saccadeoc.cli import RunConfig, main, parse_config_text
from saccadeoc.errors import ConfigurationError
from saccadeoc.signals import Variability, export_recording, generate_synthetic_subject

FIXED_PARAMS = """
cost.q = 20000
noise.alpha = 0.05
data.trials = 5
data.duration_sd = 0
data.amplitude_sd = 0
data.position_noise = 0
data.direction = 0
"""

NOISELESS_DATA = """
data.trials = 4
data.duration_sd = 0
data.amplitude_sd = 0
data.position_noise = 0
data.direction = 0
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _fit_json(tmp_path, q=1e6, alpha=0.0):
    path = tmp_path / "fit.json"
    path.write_text(json.dumps({
        "q": q, "alpha": alpha, "velocity_error_pct": 0.0,
        "displacement_error_pct": None,
    }))
    return str(path)


def test_parse_config_text_values_and_comments():
    mapping = parse_config_text("a.b = 1 # trailing\n# whole line\n\nc.d= x=y\n")
    assert mapping == {"a.b": "1", "c.d": "x=y"}


@pytest.mark.parametrize("text", ["just words\n", "a.b =\n", "a.b = 1\na.b = 2\n"])
def test_parse_config_text_rejects_malformed(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_config_rejects_unknown_key_and_bad_number(tmp_path):
    with pytest.raises(ConfigurationError, match="unknown config keys"):
        RunConfig.load(_write(tmp_path, "a.conf", "no.such.key = 1\n"))
    with pytest.raises(ConfigurationError, match="must be a number"):
        RunConfig.load(_write(tmp_path, "b.conf", "plant.tau1 = fast\n"))


def test_config_defaults_parse():
    cfg = RunConfig.load(None)
    assert cfg.q is None and cfg.alpha is None
    assert cfg.dt == 0.004
    assert cfg.sweep_amplitudes == (6.0, 8.5, 10.4, 12.0)


def test_simulate_outputs_and_determinism(tmp_path):
    config = _write(tmp_path, "run.conf", FIXED_PARAMS)
    for sub in ("one", "two"):
        code = main(["simulate", "--config", config, "--out", str(tmp_path / sub)])
        assert code == 0
    first = (tmp_path / "one" / "trajectory.csv").read_bytes()
    assert first == (tmp_path / "two" / "trajectory.csv").read_bytes()
    assert ((tmp_path / "one" / "simulate.json").read_bytes()
            == (tmp_path / "two" / "simulate.json").read_bytes())

    assert first.decode().splitlines()[0] == "time_s,theta_h_deg,vel_h_degps"
    summary = json.loads((tmp_path / "one" / "simulate.json").read_text())
    assert summary["label"] == "a12_d0"
    assert summary["q"] == 20000.0
    assert summary["monte_carlo"] is None
    assert summary["velocity_error_pct"] < 5.0


def test_simulate_with_trials_reports_ensemble(tmp_path):
    config = _write(tmp_path, "run.conf", FIXED_PARAMS)
    assert main(["simulate", "--config", config, "--out", str(tmp_path),
                 "--trials", "16"]) == 0
    mc = json.loads((tmp_path / "simulate.json").read_text())["monte_carlo"]
    assert mc["trials"] == 16
    assert len(mc["final_mean_deg"]) == 1
    assert len(mc["final_std_deg"]) == 1


def test_simulate_requires_fixed_parameters(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    assert "cost.q" in capsys.readouterr().err


def test_fit_writes_result(tmp_path):
    config = _write(tmp_path, "run.conf", NOISELESS_DATA)
    assert main(["fit", "--config", config, "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "fit.json").read_text())
    assert payload["stage"] == "two-stage"
    assert payload["condition"] == "a12_d0"
    assert payload["q"] > 0.0
    # self-consistent noiseless data leaves nothing for the noise term
    assert payload["alpha"] == 0.0
    assert payload["velocity_error_pct"] < 0.5
    assert payload["displacement_error_pct"] < 6.0


def test_fit_q_only_stage_skips_noise(tmp_path):
    config = _write(tmp_path, "run.conf", NOISELESS_DATA)
    assert main(["fit", "--config", config, "--out", str(tmp_path),
                 "--stage", "q-only"]) == 0
    payload = json.loads((tmp_path / "fit.json").read_text())
    assert payload["stage"] == "q-only"
    assert payload["alpha"] == 0.0
    assert payload["alpha_evaluations"] == 0


def test_fit_rejects_fixed_q(tmp_path, capsys):
    config = _write(tmp_path, "run.conf", "cost.q = 100\n")
    assert main(["fit", "--config", config, "--out", str(tmp_path)]) == 2
    assert "cost.q = fit" in capsys.readouterr().err


def test_amplitude_sweep_outputs(tmp_path):
    config = _write(tmp_path, "run.conf",
                    NOISELESS_DATA + "run.amplitudes = 8.5,10.4,12\n")
    code = main(["sweep", "--kind", "amplitude", "--config", config,
                 "--out", str(tmp_path), "--fit-json", _fit_json(tmp_path)])
    assert code == 0
    csv_lines = (tmp_path / "sweep_amplitude.csv").read_text().splitlines()
    assert csv_lines[0] == ("label,velocity_error_pct,displacement_error_pct,"
                            "data_amplitude_deg,model_amplitude_deg,"
                            "data_peak_degps,model_peak_degps")
    assert len(csv_lines) == 4
    summary = json.loads((tmp_path / "sweep_amplitude.json").read_text())
    assert summary["conditions"] == ["a8.5_d0", "a10.4_d0", "a12_d0"]
    assert summary["absent"] == []
    assert summary["velocity_error_pct"]["mean"] < 5.0
    assert set(summary["main_sequence"]) == {"data", "model"}
    assert summary["main_sequence"]["model"]["r_squared"] > 0.9


def test_direction_sweep_outputs(tmp_path):
    config = _write(tmp_path, "run.conf", NOISELESS_DATA + "run.directions = 0,45\n")
    code = main(["sweep", "--kind", "direction", "--config", config,
                 "--out", str(tmp_path), "--fit-json", _fit_json(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "sweep_direction.json").read_text())
    assert summary["kind"] == "direction"
    assert summary["conditions"] == ["a12_d0", "a12_d45"]
    assert "main_sequence" not in summary


def test_sweep_reads_recorded_condition_directory(tmp_path):
    rec = generate_synthetic_subject(
        amplitudes=(12.0,), directions=(0.0,), trials_per_target=4,
        variability=Variability(0.0, 0.0, 0.0), sample_rate_hz=480.0, seed=2,
    )
    data_dir = tmp_path / "recorded"
    data_dir.mkdir()
    export_recording(rec, data_dir / "a12_d0.csv")
    config = _write(tmp_path, "run.conf",
                    "data.input = {}\nrun.amplitudes = 6,12\ndata.direction = 0\n"
                    .format(data_dir))
    code = main(["sweep", "--kind", "amplitude", "--config", config,
                 "--out", str(tmp_path), "--fit-json", _fit_json(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "sweep_amplitude.json").read_text())
    assert summary["absent"] == ["a6_d0"]
    csv_text = (tmp_path / "sweep_amplitude.csv").read_text()
    assert "\na6_d0,nan," in csv_text


def test_sweep_missing_fit_json_is_config_error(tmp_path, capsys):
    code = main(["sweep", "--kind", "amplitude", "--out", str(tmp_path),
                 "--fit-json", str(tmp_path / "nope.json")])
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_verify_line_format_and_exit(tmp_path, capsys):
    code = main(["verify", "--systems", "2", "--probes", "3",
                 "--json", "--out", str(tmp_path)])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    names = ["oracle-equivalence", "deterministic-reduction",
             "value-form", "axis-decoupling"]
    assert len(lines) == 4
    for line, name in zip(lines, names):
        assert re.match(
            rf"^check {name}: PASS \(metric=\d\.\d{{3}}e[+-]\d+, "
            rf"threshold=\d\.\de[+-]\d+\) .+$", line), line
    payload = json.loads((tmp_path / "verify.json").read_text())
    assert payload["passed"] is True
    assert [c["name"] for c in payload["checks"]] == names


def test_verify_negative_control_fails(capsys):
    code = main(["verify", "--systems", "2", "--probes", "2", "--debug-flip-sign"])
    assert code == 1
    assert "check oracle-equivalence: FAIL" in capsys.readouterr().out


def test_seed_resolution_order(tmp_path, monkeypatch):
    config = _write(tmp_path, "run.conf", FIXED_PARAMS)
    monkeypatch.setenv("SACCADE_OC_SEED", "77")
    assert main(["simulate", "--config", config, "--out", str(tmp_path / "env")]) == 0
    assert json.loads((tmp_path / "env" / "simulate.json").read_text())["seed"] == 77
    assert main(["simulate", "--config", config, "--out", str(tmp_path / "flag"),
                 "--seed", "5"]) == 0
    assert json.loads((tmp_path / "flag" / "simulate.json").read_text())["seed"] == 5

    monkeypatch.setenv("SACCADE_OC_SEED", "not-a-seed")
    assert main(["simulate", "--config", config, "--out", str(tmp_path)]) == 2


def test_missing_config_file_is_config_error(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "absent.conf")]) == 2
    assert "config file not found" in capsys.readouterr().err


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--kind", "sideways"])
    assert exc.value.code == 2
