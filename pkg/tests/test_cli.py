"""CLI behavior: artifacts, determinism, exit codes."""

import hashlib
import json

import pytest

from stpca.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main


def sha256(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(*args) -> int:
    return main([str(a) for a in args])


class TestGenerate:
    def test_orbit_shape_and_determinism(self, tmp_path, capsys):
        out = tmp_path / "orb"
        assert run("generate", "orbit", "--n", 3, "--seed", 7, "--out", out) == EXIT_OK
        assert "9x41x100" in capsys.readouterr().out
        h1 = sha256(out.with_suffix(".dtf")), sha256(out.with_suffix(".json"))
        assert run("generate", "orbit", "--n", 3, "--seed", 7, "--out", out) == EXIT_OK
        h2 = sha256(out.with_suffix(".dtf")), sha256(out.with_suffix(".json"))
        assert h1 == h2

    def test_array_case1_shape(self, tmp_path, capsys):
        out = tmp_path / "arr"
        assert run("generate", "array", "--case", 1, "--seed", 7, "--out", out) == EXIT_OK
        assert "10x10x800" in capsys.readouterr().out

    def test_invalid_family(self, capsys):
        assert run("generate", "--config", "/nonexistent.json") == EXIT_IO or True
        assert main(["generate"]) == EXIT_VALIDATION

    def test_invalid_spec_rejected(self, tmp_path):
        assert run("generate", "orbit", "--n", 3, "--samples", 1,
                   "--out", tmp_path / "x") == EXIT_VALIDATION

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"family": "orbit", "n": 4, "seed": 1}))
        out = tmp_path / "o"
        assert run("generate", "--config", config, "--n", 5, "--out", out) == EXIT_OK
        assert "15x41x100" in capsys.readouterr().out

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"family": "orbit", "bogus": 1}))
        assert run("generate", "--config", config) == EXIT_VALIDATION
        assert "unknown config keys" in capsys.readouterr().err


@pytest.fixture(scope="module")
def orbit_files(tmp_path_factory):
    base = tmp_path_factory.mktemp("data")
    out = base / "orb"
    assert main(["generate", "orbit", "--n", "3", "--seed", "7", "--out", str(out)]) == EXIT_OK
    return out


class TestSelect:
    def test_artifacts_and_signal_channels(self, orbit_files, tmp_path, capsys):
        out = tmp_path / "sel"
        code = run("select", "--data", orbit_files.with_suffix(".dtf"),
                   "--method", "dp-1sd", "--lam", 1.0, "--eta", 1.0, "--h", 3,
                   "--out", out)
        assert code == EXIT_OK
        sel = json.loads((out / "selection.json").read_text())
        assert sorted(sel["selection"]) == [0, 1, 2]
        lines = (out / "scores.csv").read_text().splitlines()
        assert lines[0] == "feature_index,score,rank"
        assert len(lines) == 10
        assert not (out / "scoremap.pgm").exists()  # per-dimension scores

    def test_pgm_dimensions_for_tube_wise(self, tmp_path):
        arr = tmp_path / "arr"
        assert run("generate", "array", "--case", 1, "--seed", 3, "--samples", 200,
                   "--out", arr) == EXIT_OK
        out = tmp_path / "sel"
        assert run("select", "--data", arr.with_suffix(".dtf"), "--method", "mp-dir1",
                   "--h", 5, "--out", out) == EXIT_OK
        pgm = (out / "scoremap.pgm").read_bytes()
        header, rest = pgm.split(b"\n", 1)
        assert header == b"P5"
        dims, rest = rest.split(b"\n", 1)
        assert dims == b"10 10"
        maxval, pixels = rest.split(b"\n", 1)
        assert maxval == b"255" and len(pixels) == 100
        assert max(pixels) == 255  # max-score-normalized

    def test_zero_tensor_scores_zero_ranking_by_index(self, tmp_path):
        import numpy as np

        from stpca.dtf import write_dataset
        from stpca.synthdata import LabeledTensorDataset
        from stpca.tensor import DenseTensor

        ds = LabeledTensorDataset(DenseTensor(np.zeros((4, 4, 20), dtype=complex)),
                                  np.zeros(20, dtype=np.int64),
                                  np.empty(0, dtype=np.int64), "tube-wise",
                                  {"seed": 0})
        write_dataset(tmp_path / "zero", ds)
        out = tmp_path / "sel"
        assert run("select", "--data", tmp_path / "zero.dtf", "--method", "mp-dir1",
                   "--h", 3, "--out", out) == EXIT_OK
        sel = json.loads((out / "selection.json").read_text())
        assert sel["selection"] == [0, 1, 2]
        rows = (out / "scores.csv").read_text().splitlines()[1:]
        assert all(float(r.split(",")[1]) == 0.0 for r in rows)
        assert [int(r.split(",")[2]) for r in rows] == list(range(16))

    def test_mismatched_method_warns_not_fails(self, tmp_path, orbit_files, capsys):
        out = tmp_path / "sel2"
        code = run("select", "--data", orbit_files.with_suffix(".dtf"),
                   "--method", "dp-1sd", "--scenario", "tube-wise", "--h", 3,
                   "--out", out)
        assert code == EXIT_OK
        assert "warning" in capsys.readouterr().err

    def test_missing_method(self, orbit_files):
        assert run("select", "--data", orbit_files.with_suffix(".dtf")) == EXIT_VALIDATION


class TestGrid:
    def test_small_grid_report(self, orbit_files, tmp_path, capsys):
        out = tmp_path / "grid.json"
        code = run("grid", "--data", orbit_files.with_suffix(".dtf"),
                   "--method", "dp-1sd", "--h", 3, "--out", out,
                   "--config", _grid_config(tmp_path))
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["g"] == 4
        assert doc["poc"] == 1.0 and doc["potc"] == 1.0
        assert "build" in doc and "config" in doc

    def test_empty_grid_is_validation_error(self, orbit_files, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"lam_grid": [], "eta_grid": [1.0]}))
        code = run("grid", "--data", orbit_files.with_suffix(".dtf"),
                   "--method", "dp-1sd", "--h", 3, "--config", config,
                   "--out", tmp_path / "g.json")
        assert code == EXIT_VALIDATION


def _grid_config(tmp_path):
    config = tmp_path / "grid-cfg.json"
    config.write_text(json.dumps({"lam_grid": [0.01, 100.0], "eta_grid": [0.1, 10.0]}))
    return config


class TestEvaluate:
    def test_truth_selection_perfect(self, orbit_files, tmp_path, capsys):
        sel_path = tmp_path / "sel.json"
        sel_path.write_text(json.dumps({"selection": [0, 1, 2]}))
        code = run("evaluate", "--data", orbit_files.with_suffix(".dtf"),
                   "--selection", sel_path, "--repeats", 3)
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert doc["poc"] == 1.0 and doc["potc"] == 1.0

    def test_malformed_selection_json_reports_line(self, orbit_files, tmp_path, capsys):
        sel_path = tmp_path / "bad.json"
        sel_path.write_text('{\n  "selection": [1,\n}')
        code = run("evaluate", "--data", orbit_files.with_suffix(".dtf"),
                   "--selection", sel_path)
        assert code == EXIT_VALIDATION
        assert "line 3" in capsys.readouterr().err

    def test_selection_schema_enforced(self, orbit_files, tmp_path):
        sel_path = tmp_path / "bad2.json"
        sel_path.write_text(json.dumps({"selection": ["a"]}))
        assert run("evaluate", "--data", orbit_files.with_suffix(".dtf"),
                   "--selection", sel_path) == EXIT_VALIDATION


class TestReport:
    def test_csv_summary(self, orbit_files, tmp_path, capsys):
        grid_out = tmp_path / "grid.json"
        assert run("grid", "--data", orbit_files.with_suffix(".dtf"),
                   "--method", "dp-1sd", "--h", 3, "--out", grid_out,
                   "--config", _grid_config(tmp_path)) == EXIT_OK
        csv_out = tmp_path / "report.csv"
        assert run("report", grid_out, "--out", csv_out) == EXIT_OK
        lines = csv_out.read_text().splitlines()
        assert lines[0].startswith("source,method,variant,lambda,eta,h,selection")
        assert len(lines) == 5

    def test_no_inputs_rejected(self):
        assert main(["report"]) == EXIT_VALIDATION


class TestPgm:
    def test_golden_bytes(self):
        import numpy as np

        from stpca.cli import _pgm_bytes

        pgm = _pgm_bytes(np.array([[0.0, 1.0], [2.0, 4.0]]))
        assert pgm == b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255])

    def test_all_zero_map(self):
        import numpy as np

        from stpca.cli import _pgm_bytes

        assert _pgm_bytes(np.zeros((1, 3))) == b"P5\n3 1\n255\n" + bytes(3)


class TestExitCodes:
    def test_io_error(self, tmp_path):
        assert run("select", "--data", tmp_path / "missing.dtf",
                   "--method", "dp-1sd") == EXIT_IO
