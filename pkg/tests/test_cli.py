import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

import latticebounds.runner as runner_module
from latticebounds.bounds import BoundInterval
from latticebounds.cli import main
from latticebounds.report import PLOT_HEADER

RUNNER = CliRunner()


MINIMAL_CONFIG = """\
lattice:
  dimensions: [a, b]
  levels: [[0, 1], [0, 1]]
outcome:
  column: y
  k_lo: 0.0
  k_hi: 1.0
effects:
  - [[1, 0], [0, 0]]
bootstrap:
  replicates: 19
  seed: 3
"""

SHAPED_CONFIG = """\
lattice:
  dimensions: [a, b]
  levels: [[0, 1], [0, 1]]
outcome:
  column: y
  k_lo: 0.0
  k_hi: 1.0
assumptions:
  smtr: on
  spm: all
effects:
  - [[1, 0], [0, 0]]
  - [[1, 1], [0, 1]]
bootstrap:
  replicates: 19
  seed: 3
"""


def write_inputs(tmp_path, config_text=MINIMAL_CONFIG, y=None):
    config = tmp_path / "config.yaml"
    config.write_text(config_text, encoding="utf-8")
    rng = np.random.default_rng(0)
    n = 60
    frame = pd.DataFrame(
        {
            "y": rng.integers(0, 5, size=n) / 4 if y is None else y,
            "a": rng.integers(0, 2, size=n),
            "b": rng.integers(0, 2, size=n),
        }
    )
    data = tmp_path / "data.csv"
    frame.to_csv(data, index=False)
    return config, data


class TestRunCommand:
    def test_minimal_run_writes_report_and_plot_data(self, tmp_path):
        config, data = write_inputs(tmp_path)
        out = tmp_path / "out"
        result = RUNNER.invoke(
            main,
            ["run", "--config", str(config), "--data", str(data), "--out-dir", str(out), "--quiet"],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((out / "report.json").read_text())
        assert report["assumption_sets"] == ["none"]
        assert len(report["effects"]) == 1
        lines = (out / "plot_data.csv").read_text().splitlines()
        assert lines[0] == PLOT_HEADER
        assert len(lines) == 2

    def test_missing_column_is_config_error(self, tmp_path):
        config, data = write_inputs(tmp_path)
        frame = pd.read_csv(data).drop(columns=["b"])
        frame.to_csv(data, index=False)
        result = RUNNER.invoke(
            main, ["run", "--config", str(config), "--data", str(data), "--quiet"]
        )
        assert result.exit_code == 1
        assert "missing columns" in result.output

    def test_unknown_treatment_code_is_error(self, tmp_path):
        config, data = write_inputs(tmp_path)
        frame = pd.read_csv(data)
        frame.loc[0, "a"] = 7
        frame.to_csv(data, index=False)
        result = RUNNER.invoke(
            main, ["run", "--config", str(config), "--data", str(data), "--quiet"]
        )
        assert result.exit_code == 1
        assert "not in the declared lattice" in result.output

    def test_out_of_range_outcomes_falsify(self, tmp_path):
        config, data = write_inputs(tmp_path, y=np.full(60, 1.5))
        out = tmp_path / "out"
        result = RUNNER.invoke(
            main,
            ["run", "--config", str(config), "--data", str(data), "--out-dir", str(out), "--quiet"],
        )
        assert result.exit_code == 2
        report = json.loads((out / "report.json").read_text())
        assert report["diagnostics"]["falsified"] is True
        assert any("outside the declared range" in w for w in report["diagnostics"]["warnings"])

    def test_report_bytes_deterministic(self, tmp_path):
        config, data = write_inputs(tmp_path, config_text=SHAPED_CONFIG)
        blobs = []
        for name in ("out1", "out2"):
            out = tmp_path / name
            result = RUNNER.invoke(
                main,
                ["run", "--config", str(config), "--data", str(data), "--out-dir", str(out), "--quiet"],
            )
            assert result.exit_code == 0, result.output
            blobs.append(
                (
                    (out / "report.json").read_bytes(),
                    (out / "plot_data.csv").read_bytes(),
                )
            )
        assert blobs[0] == blobs[1]

    def test_seed_override_changes_cis_not_points(self, tmp_path):
        config, data = write_inputs(tmp_path, config_text=SHAPED_CONFIG)
        reports = {}
        for seed in (3, 99):
            out = tmp_path / f"out{seed}"
            result = RUNNER.invoke(
                main,
                [
                    "run", "--config", str(config), "--data", str(data),
                    "--out-dir", str(out), "--seed", str(seed), "--quiet",
                ],
            )
            assert result.exit_code == 0
            reports[seed] = json.loads((out / "report.json").read_text())
        for i in range(2):
            a = reports[3]["effects"][i]["bounds"]
            b = reports[99]["effects"][i]["bounds"]
            for set_name in a:
                assert a[set_name]["lower"] == b[set_name]["lower"]
                assert a[set_name]["upper"] == b[set_name]["upper"]
        assert reports[3]["provenance"]["seed"] == 3
        assert reports[99]["provenance"]["seed"] == 99

    def test_plot_rows_reproduce_report_values(self, tmp_path):
        config, data = write_inputs(tmp_path, config_text=SHAPED_CONFIG)
        out = tmp_path / "out"
        result = RUNNER.invoke(
            main,
            ["run", "--config", str(config), "--data", str(data), "--out-dir", str(out), "--quiet"],
        )
        assert result.exit_code == 0
        report = json.loads((out / "report.json").read_text())
        lines = (out / "plot_data.csv").read_text().splitlines()[1:]
        cells = {}
        for line in lines:
            t1, t2, set_name, lower, upper, ci_lo, ci_hi = line.split(",")
            cells[(t1, t2, set_name)] = (lower, upper, ci_lo, ci_hi)
        for effect in report["effects"]:
            t1 = "(" + " ".join(str(c) for c in effect["t1"]) + ")"
            t2 = "(" + " ".join(str(c) for c in effect["t2"]) + ")"
            for set_name, cell in effect["bounds"].items():
                got = cells[(t1, t2, set_name)]
                assert got[0] == repr(cell["lower"])
                assert got[1] == repr(cell["upper"])
                assert got[2] == repr(cell["ci_lower"])
                assert got[3] == repr(cell["ci_upper"])


class TestVerifyCommand:
    def test_agreement_exits_zero(self, tmp_path):
        config, data = write_inputs(tmp_path, config_text=SHAPED_CONFIG)
        result = RUNNER.invoke(
            main, ["verify", "--config", str(config), "--data", str(data)]
        )
        assert result.exit_code == 0, result.output
        assert "DISAGREE" not in result.output
        assert "-> ok" in result.output

    def test_corrupted_bound_detected(self, tmp_path, monkeypatch):
        config, data = write_inputs(tmp_path, config_text=SHAPED_CONFIG)
        true_fn = runner_module.effect_bounds_any_pair

        def corrupted(*args, **kwargs):
            interval = true_fn(*args, **kwargs)
            return BoundInterval(
                lower=interval.lower - 0.01, upper=interval.upper, empty=interval.empty
            )

        monkeypatch.setattr(runner_module, "effect_bounds_any_pair", corrupted)
        result = RUNNER.invoke(
            main, ["verify", "--config", str(config), "--data", str(data)]
        )
        assert result.exit_code == 3
        assert "DISAGREE" in result.output

    def test_falsifying_data_consistent_on_both_sides(self, tmp_path):
        config, data = write_inputs(
            tmp_path, config_text=SHAPED_CONFIG, y=np.full(60, 1.25)
        )
        result = RUNNER.invoke(
            main, ["verify", "--config", str(config), "--data", str(data)]
        )
        assert result.exit_code == 0, result.output
        assert "EMPTY" in result.output
        assert "INFEASIBLE" in result.output
        assert "DISAGREE" not in result.output

    def test_incomparable_pairs_annotated(self, tmp_path):
        config_text = MINIMAL_CONFIG.replace(
            "  - [[1, 0], [0, 0]]", "  - [[1, 0], [0, 1]]"
        )
        config, data = write_inputs(tmp_path, config_text=config_text)
        result = RUNNER.invoke(
            main, ["verify", "--config", str(config), "--data", str(data)]
        )
        assert result.exit_code == 0
        assert "incomparable" in result.output


class TestSynthCommand:
    @pytest.mark.parametrize("kind", ["supermodular", "submodular", "smtr", "mixed"])
    def test_synth_output_runs(self, tmp_path, kind):
        result = RUNNER.invoke(
            main,
            ["synth", "--kind", kind, "--size", "400", "--seed", "5", "--out-dir", str(tmp_path)],
        )
        assert result.exit_code == 0, result.output
        out = tmp_path / "out"
        run_result = RUNNER.invoke(
            main,
            [
                "run",
                "--config", str(tmp_path / "synth_config.yaml"),
                "--data", str(tmp_path / "synth_data.csv"),
                "--out-dir", str(out),
                "--replicates", "9",
                "--quiet",
            ],
        )
        assert run_result.exit_code == 0, run_result.output
        assert (out / "report.json").exists()

    def test_synth_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            result = RUNNER.invoke(
                main,
                ["synth", "--kind", "mixed", "--size", "300", "--seed", "8", "--out-dir", str(tmp_path / sub)],
            )
            assert result.exit_code == 0
        assert (tmp_path / "a" / "synth_data.csv").read_bytes() == (
            tmp_path / "b" / "synth_data.csv"
        ).read_bytes()
