"""End-to-end tests of the ``roughvol`` command line interface."""

import json
import subprocess
import sys

import pytest

from roughvol import __version__
from roughvol.cli import main

TINY_SKEW = {
    "experiment": "skew-ratio",
    "maturities": [0.05, 0.1],
    "n_paths": 800,
    "n_steps": 8,
}


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestArgumentParsing:
    def test_no_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_bad_format_choice_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["skew-ratio", "--format", "pdf"])
        assert excinfo.value.code == 2


class TestConfigErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["skew-ratio", "--config", str(tmp_path / "nope.json")])
        assert code == 2
        assert "config error: cannot read config file" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["skew-ratio", "--config", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_non_object_json(self, tmp_path, capsys):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        assert main(["skew-ratio", "--config", str(path)]) == 2
        assert "JSON object" in capsys.readouterr().err

    def test_invalid_values_listed(self, tmp_path, capsys):
        config = write_config(
            tmp_path, {"bogus": 1, "model": {"hurst": 1.5}, "n_paths": 1}
        )
        assert main(["skew-ratio", "--config", config]) == 2
        err = capsys.readouterr().err
        for fragment in ("bogus", "hurst", "n_paths"):
            assert fragment in err

    def test_experiment_mismatch(self, tmp_path, capsys):
        config = write_config(tmp_path, {"experiment": "power-law"})
        assert main(["skew-ratio", "--config", config]) == 2
        assert "config is for experiment" in capsys.readouterr().err


class TestRuns:
    def test_skew_ratio_writes_outputs(self, tmp_path, capsys):
        config = write_config(tmp_path, TINY_SKEW)
        out = tmp_path / "out"
        code = main(["skew-ratio", "--config", config, "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0, captured.err
        assert (out / "skew-ratio.csv").exists()
        assert (out / "skew-ratio.svg").exists()
        assert (out / "skew-ratio.meta.json").exists()
        assert captured.out.count("wrote ") == 3

    def test_csv_only(self, tmp_path):
        config = write_config(tmp_path, {**TINY_SKEW, "maturities": [0.1]})
        out = tmp_path / "out"
        code = main(
            ["skew-ratio", "--config", config, "--out", str(out), "--format", "csv"]
        )
        assert code == 0
        assert not (out / "skew-ratio.svg").exists()
        assert (out / "skew-ratio.csv").exists()

    def test_flag_overrides_file(self, tmp_path):
        config = write_config(tmp_path, {**TINY_SKEW, "seed": 11, "maturities": [0.1]})
        out = tmp_path / "out"
        code = main(
            ["skew-ratio", "--config", config, "--out", str(out), "--seed", "12"]
        )
        assert code == 0
        meta = json.loads((out / "skew-ratio.meta.json").read_text())
        assert meta["config"]["seed"] == 12
        assert meta["config"]["n_paths"] == 800

    def test_identical_invocations_identical_bytes(self, tmp_path):
        config = write_config(tmp_path, TINY_SKEW)
        blobs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["skew-ratio", "--config", config, "--out", str(out)]) == 0
            blobs.append(
                (
                    (out / "skew-ratio.csv").read_bytes(),
                    (out / "skew-ratio.svg").read_bytes(),
                )
            )
        assert blobs[0] == blobs[1]

    def test_sabr_curvature_runs_fast(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["sabr-curvature", "--out", str(out)])
        assert code == 0, capsys.readouterr().err
        header = (out / "sabr-curvature.csv").read_text().splitlines()[0]
        assert header == (
            "T,curv_lv,se_curv_lv,curv_iv,se_curv_iv,gap,se_gap,ratio,se_ratio"
        )

    def test_power_law_prints_fits(self, tmp_path, capsys):
        config = write_config(
            tmp_path,
            {
                "experiment": "power-law",
                "maturities": [0.04, 0.06, 0.09, 0.14, 0.2],
                "n_paths": 4000,
                "n_steps": 16,
            },
        )
        out = tmp_path / "out"
        code = main(["power-law", "--config", config, "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0, captured.err
        assert "fit curv_iv: exponent" in captured.out
        assert "fit curv_lv: exponent" in captured.out
        meta = json.loads((out / "power-law.meta.json").read_text())
        assert "exponent_difference" in meta

    def test_degenerate_run_exits_3(self, tmp_path, capsys):
        config = write_config(
            tmp_path,
            {**TINY_SKEW, "maturities": [0.1], "model": {"nu": 0.0}},
        )
        out = tmp_path / "out"
        code = main(["skew-ratio", "--config", config, "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 3
        assert "flag:" in captured.err
        assert "numerical failure" in captured.err
        assert (out / "skew-ratio.csv").exists()  # outputs still land for inspection


class TestSelftestCommand:
    def test_selftest_passes(self, capsys):
        code = main(["selftest", "--paths", "3000", "--steps", "16"])
        captured = capsys.readouterr()
        assert code == 0, captured.out
        assert "selftest: 5/5 checks passed" in captured.out
        assert captured.out.count("ok  ") == 5


class TestConsoleEntry:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "roughvol.cli", "--version"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert __version__ in proc.stdout
