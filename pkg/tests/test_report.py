"""CSV/manifest/figure emission and the command line wrapper."""

import json

import numpy as np
import pytest

from risloc.cli import main
from risloc.harness import SweepSpec, load_sweep_spec, run_sweep
from risloc.protocol import ProtocolConfig
from risloc.report import CSV_HEADER, emit_report, write_csv, write_manifest
from risloc.scene import SceneSpec

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(scope="module")
def small_result():
    spec = SweepSpec(
        parameter="sigma",
        values=(1.0, 2.0),
        trials=3,
        schemes=("proposed", "random_config"),
        master_seed=5,
        scene=SceneSpec(grid=(2, 2, 1), ris_grid=(2, 2)),
        protocol=ProtocolConfig(num_cycles=1),
        record_timing=False,
    )
    return run_sweep(spec)


class TestCsv:
    def test_header_and_shape(self, small_result, tmp_path):
        path = write_csv(small_result, tmp_path / "r.csv")
        lines = open(path, encoding="utf-8").read().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert lines[0] == "scheme,param,value,mean_error_m,stderr_m,mean_opt_seconds,mean_evals"
        assert len(lines) == 1 + 4  # 2 schemes x 2 values

    def test_lf_line_endings(self, small_result, tmp_path):
        path = write_csv(small_result, tmp_path / "r.csv")
        raw = open(path, "rb").read()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")

    def test_full_float_precision(self, small_result, tmp_path):
        path = write_csv(small_result, tmp_path / "r.csv")
        rows = [l.split(",") for l in open(path).read().splitlines()[1:]]
        for row, p in zip(rows, small_result.points):
            assert row[0] == p.scheme and row[1] == p.param
            assert float(row[2]) == p.value
            assert float(row[3]) == p.mean_error_m  # repr round-trips exactly
            assert float(row[4]) == p.stderr_m
            assert float(row[6]) == p.mean_evals

    def test_timing_column_zeroed_when_not_recorded(self, small_result, tmp_path):
        path = write_csv(small_result, tmp_path / "r.csv", record_timing=False)
        rows = [l.split(",") for l in open(path).read().splitlines()[1:]]
        assert all(float(r[5]) == 0.0 for r in rows)


class TestManifest:
    def test_round_trips_the_spec(self, small_result, tmp_path):
        path = write_manifest(small_result.spec, tmp_path / "m.json")
        doc = json.load(open(path))
        assert doc["format"] == 1
        assert SweepSpec.from_dict(doc["sweep"]) == small_result.spec
        assert load_sweep_spec(path) == small_result.spec

    def test_stable_serialization(self, small_result, tmp_path):
        a = write_manifest(small_result.spec, tmp_path / "a.json")
        b = write_manifest(small_result.spec, tmp_path / "b.json")
        assert open(a, "rb").read() == open(b, "rb").read()
        text = open(a).read()
        assert text.index('"format"') < text.index('"sweep"')
        assert text.endswith("\n")


class TestEmitReport:
    def test_writes_all_artifacts(self, small_result, tmp_path):
        out = emit_report(small_result, tmp_path / "out")
        csv_bytes = open(out["csv"], "rb").read()
        assert csv_bytes.startswith(b"scheme,param,")
        assert len(out["figures"]) == 2
        for fig in out["figures"]:
            assert open(fig, "rb").read().startswith(PNG_MAGIC)

    def test_figures_optional(self, small_result, tmp_path):
        out = emit_report(small_result, tmp_path / "bare", figures=False)
        assert "figures" not in out
        assert not list((tmp_path / "bare").glob("*.png"))

    def test_manifest_rerun_reproduces_csv(self, small_result, tmp_path):
        first = emit_report(small_result, tmp_path / "one", figures=False)
        spec = load_sweep_spec(first["manifest"])
        second = emit_report(run_sweep(spec), tmp_path / "two", figures=False)
        assert open(first["csv"], "rb").read() == open(second["csv"], "rb").read()


class TestCli:
    def spec_file(self, tmp_path, **kw):
        spec = SweepSpec(
            parameter="sigma", values=(1.0,), trials=2,
            schemes=("random_config",), master_seed=3,
            scene=SceneSpec(grid=(2, 2, 1), ris_grid=(2, 2)),
            protocol=ProtocolConfig(num_cycles=1), record_timing=False, **kw)
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"sweep": spec.to_dict()}))
        return path

    def scene_file(self, tmp_path):
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(
            {"scene": SceneSpec(grid=(2, 2, 1), ris_grid=(2, 2)).to_dict()}))
        return path

    def test_run_writes_reports_and_figures(self, tmp_path, capsys):
        spec = self.spec_file(tmp_path)
        out = tmp_path / "results"
        assert main(["run", "--spec", str(spec), "--out", str(out)]) == 0
        assert (out / "results.csv").exists()
        assert (out / "manifest.json").exists()
        assert (out / "sweep_error.png").read_bytes().startswith(PNG_MAGIC)
        assert (out / "sweep_cost.png").read_bytes().startswith(PNG_MAGIC)
        assert "wrote" in capsys.readouterr().out

    def test_run_no_figures(self, tmp_path):
        spec = self.spec_file(tmp_path)
        out = tmp_path / "bare"
        assert main(["run", "--spec", str(spec), "--out", str(out),
                     "--no-figures"]) == 0
        assert not list(out.glob("*.png"))

    def test_single_prints_trace(self, tmp_path, capsys):
        scene = self.scene_file(tmp_path)
        trace = tmp_path / "trace.json"
        code = main(["single", "--scene", str(scene), "--scheme", "random_config",
                     "--seed", "4", "--cycles", "2", "--out", str(trace)])
        assert code == 0
        text = capsys.readouterr().out
        assert "mean error" in text
        doc = json.load(open(trace))
        assert doc["scheme"] == "random_config"
        assert len(doc["cycles"]) == 2
        assert all("pattern" in c and "rss" in c for c in doc["cycles"])

    def test_bad_scheme_exits_2(self, tmp_path, capsys):
        scene = self.scene_file(tmp_path)
        code = main(["single", "--scene", str(scene), "--scheme", "warp",
                     "--seed", "1"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_spec_exits_2(self, tmp_path, capsys):
        code = main(["run", "--spec", str(tmp_path / "absent.json")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_json_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--spec", str(bad)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_invalid_spec_values_exit_2(self, tmp_path, capsys):
        doc = {"sweep": {"parameter": "sigma", "values": [], "trials": 1,
                         "schemes": ["random_config"]}}
        bad = tmp_path / "empty_values.json"
        bad.write_text(json.dumps(doc))
        assert main(["run", "--spec", str(bad)]) == 2
        assert "error:" in capsys.readouterr().err
