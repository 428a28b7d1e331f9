import json
from pathlib import Path

import numpy as np
import pytest

from anisotl.analyzers import make_covering_profile
from anisotl.cli import main
from anisotl.grids import GridSpec
from anisotl.linalg_expansive import validate_expansive
from anisotl.storage import load_array, load_field, save_field, write_csv
from anisotl.suite import SuiteSpec, suite_generate


def small_calderon_config(tmp_path, label="cal-a"):
    cfg = {
        "calderon": {
            "label": label,
            "cases": [
                {"matrix": {"dim": 1, "entries": [2.0]}, "grid": {"extent": 8.0, "n": 512}}
            ],
        },
        "quasinorm-axioms": {
            "label": label + "-axioms",
            "points": 500,
            "matrices": [{"dim": 1, "entries": [2.0]}],
        },
        "admissibility": {
            "label": label + "-adm",
            "n_frequencies": 10,
            "cases": [
                {"matrix": {"dim": 1, "entries": [2.0]}, "grid": {"extent": 8.0, "n": 512}}
            ],
        },
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


class TestStorage:
    def test_field_round_trip(self, tmp_path):
        E = validate_expansive([[2.0]])
        grid = GridSpec(d=1, extent=8.0, n=512)
        phi = make_covering_profile(E, grid)
        fields = suite_generate(SuiteSpec(count=1, seed=3), grid, phi.gauge)
        path = tmp_path / "f.bin"
        save_field(path, fields[0])
        back = load_field(path, phi.gauge)
        assert np.allclose(back.spec, fields[0].spec)
        assert back.band_t == pytest.approx(fields[0].band_t)

    def test_header_is_json_line(self, tmp_path):
        E = validate_expansive([[2.0]])
        grid = GridSpec(d=1, extent=8.0, n=512)
        phi = make_covering_profile(E, grid)
        fields = suite_generate(SuiteSpec(count=1, seed=3), grid, phi.gauge)
        path = tmp_path / "f.bin"
        save_field(path, fields[0])
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
        assert header["kind"] == "field"
        assert header["byte_order"] == "little"

    def test_csv_formatting_is_deterministic(self, tmp_path):
        rows = [{"a": 0.1 + 0.2, "b": True, "c": "x"}]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(p1, ["a", "b", "c"], rows)
        write_csv(p2, ["a", "b", "c"], rows)
        assert p1.read_bytes() == p2.read_bytes()
        assert b"0.30000000000000004" in p1.read_bytes()


class TestCli:
    def test_validate_exit_zero(self, tmp_path):
        cfg = small_calderon_config(tmp_path)
        code = main(["--out", str(tmp_path / "res"), "validate", "--config", str(cfg)])
        assert code == 0
        assert (tmp_path / "res" / "cal-a" / "calderon.csv").exists()

    def test_malformed_config_exit_two(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["run", "--kind", "calderon", "--config", str(bad)])
        assert code == 2

    def test_missing_kind_exit_two(self, tmp_path):
        cfg = tmp_path / "empty.json"
        cfg.write_text("{}")
        code = main(["--out", str(tmp_path / "r"), "run", "--config", str(cfg)])
        assert code == 2

    def test_determinism_byte_identical(self, tmp_path):
        cfg = small_calderon_config(tmp_path)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["--out", str(out1), "run", "--kind", "calderon", "--config", str(cfg), "--set", "label=det"]) in (0,)
        assert main(["--out", str(out2), "run", "--kind", "calderon", "--config", str(cfg), "--set", "label=det"]) in (0,)
        f1 = (out1 / "det" / "calderon.csv").read_bytes()
        f2 = (out2 / "det" / "calderon.csv").read_bytes()
        assert f1 == f2
        s1 = (out1 / "det" / "summary.json").read_bytes()
        s2 = (out2 / "det" / "summary.json").read_bytes()
        assert s1 == s2

    def test_set_override_changes_config(self, tmp_path):
        out = tmp_path / "res"
        code = main(
            [
                "--out", str(out),
                "run", "--kind", "quasinorm-axioms",
                "--set", "points=400",
                "--set", "label=fast",
                "--set", 'matrices=[{"dim": 1, "entries": [2.0]}]',
            ]
        )
        assert code == 0
        manifest = json.loads((out / "fast" / "manifest.json").read_text())
        assert manifest["config"]["points"] == 400

    def test_suite_emission(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"suite": {"count": 2, "seed": 5}, "grid": {"extent": 8.0, "n": 512}}))
        out = tmp_path / "res"
        code = main(["--out", str(out), "suite", "--config", str(cfg)])
        assert code == 0
        files = sorted((out / "suite").glob("field_*.bin"))
        assert len(files) == 2
        arr, header = load_array(files[0])
        assert header["kind"] == "field"

    def test_zero_field_suite_empty_tables(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"suite": {"count": 0, "seed": 5}, "grid": {"extent": 8.0, "n": 512}}))
        out = tmp_path / "res"
        code = main(["--out", str(out), "suite", "--config", str(cfg)])
        assert code == 0
        lines = (out / "suite" / "suite.csv").read_text().strip().splitlines()
        assert len(lines) == 1  # header only

    def test_frames_stage_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "frames": {
                        "label": "frames-fast",
                        "grid": {"extent": 8.0, "n": 512},
                        "suite": {"count": 2, "seed": 21, "t_range": [1.8, 2.6]},
                        "s_range": [-2.5, 0.5],
                        "iterations": 20,
                    }
                }
            )
        )
        out = tmp_path / "res"
        code = main(["--out", str(out), "frames", "moments", "--config", str(cfg)])
        assert code == 0
        csv_text = (out / "frames-fast" / "frames-moments.csv").read_text()
        assert "moments" in csv_text and "reconstruction" not in csv_text

    def test_norm_single_field_report(self, tmp_path):
        # store one suite field, then ask for its norm reports
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"suite": {"count": 1, "seed": 5}, "grid": {"extent": 8.0, "n": 1024}}))
        out = tmp_path / "res"
        assert main(["--out", str(out), "suite", "--config", str(cfg)]) == 0
        field_path = next((out / "suite").glob("field_*.bin"))
        code = main(
            [
                "--out", str(out),
                "norm", "--field", str(field_path),
                "--alpha", "0.0", "--q", "2", "--J", "5", "--L", "2",
            ]
        )
        assert code == 0
        report = json.loads((out / "norm" / "norm_report.json").read_text())
        assert report["tl_q"]["value"] > 0
        assert report["besov"]["value"] >= report["tl_inf"]["value"] * (1 - 1e-9)
