"""End-to-end CLI behavior: exit codes, file outputs, JSON reports."""

import json

import jsonschema
import numpy as np
import pytest

from curvecloud import __version__
from curvecloud.backbone import config_to_json, init_backbone_params, toy_profile
from curvecloud.cli import main
from curvecloud.io import (
    load_curves_bin,
    load_labels_csv,
    load_scan_bin,
    save_backbone_params,
    save_curves_bin,
    save_scan_csv,
)
from curvecloud.model import ConversionConfig, PointCloud, build_curve_cloud
from curvecloud.simulate import Plane, Scene, SensorPose, scene_to_dict

from conftest import make_curves
from test_io import parse_ply

SCHEMA = json.loads(
    (__import__("pathlib").Path(__file__).resolve().parents[1]
     / "src/curvecloud/schemas/report.schema.json").read_text()
)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def check_report(out, command):
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    assert report["version"] == __version__
    assert report["command"] == command
    return report


@pytest.fixture
def scene_file(tmp_path):
    scene = Scene((Plane((0, 0, 1), 5.0),), SensorPose((0, 0, 0), (0, 0, 1), (0, 1, 0)))
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(scene_to_dict(scene)))
    return path


@pytest.fixture
def five_point_csv(tmp_path):
    xs = np.array([0.0, 0.1, 0.2, 1.0, 1.1])
    pc = PointCloud(
        np.column_stack([xs, np.zeros(5), np.zeros(5)]),
        np.arange(5, dtype=np.float64),
        np.ones(5, np.int64),
        1,
    )
    path = tmp_path / "scan.csv"
    save_scan_csv(pc, path)
    return path


@pytest.fixture
def curves_file(rng, tmp_path):
    cc, _ = make_curves(rng, n_beams=2, curves_per_beam=3, lo=20, hi=40)
    path = tmp_path / "curves.bin"
    save_curves_bin(cc, path)
    return path, cc


class TestExitCodes:
    def test_missing_required_flag_is_usage_error(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", "--out", str(tmp_path / "s.bin"))
        assert code == 1
        assert "scene" in err

    def test_unknown_command_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 1

    def test_bad_scene_json_is_data_error(self, capsys, tmp_path):
        bad = tmp_path / "scene.json"
        bad.write_text("{not json")
        code, _, err = run(
            capsys, "simulate", "--scene", str(bad), "--out", str(tmp_path / "o.bin")
        )
        assert code == 2
        assert err

    def test_missing_input_file_is_data_error(self, capsys, tmp_path):
        code, _, _ = run(
            capsys, "convert", "--in", str(tmp_path / "nope.bin"),
            "--delta", "0.5", "--out", str(tmp_path / "o.bin"),
        )
        assert code == 2

    def test_negative_delta_is_usage_error(self, capsys, five_point_csv, tmp_path):
        code, _, err = run(
            capsys, "convert", "--in", str(five_point_csv),
            "--delta", "-1", "--out", str(tmp_path / "o.bin"),
        )
        assert code == 1
        assert "delta" in err

    def test_bad_threads_value_is_usage_error(self, capsys, scene_file, tmp_path):
        code, _, _ = run(
            capsys, "simulate", "--threads", "0",
            "--scene", str(scene_file), "--out", str(tmp_path / "o.bin"),
        )
        assert code == 1

    def test_version_flag(self, capsys):
        code, out, err = run(capsys, "--version")
        assert code == 0
        assert __version__ in out + err


class TestSimulate:
    def test_budget_and_determinism(self, capsys, scene_file, tmp_path):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        code, out, _ = run(
            capsys, "simulate", "--scene", str(scene_file),
            "--points", "300", "--seed", "7", "--out", str(a), "--json",
        )
        assert code == 0
        report = check_report(out, "simulate")
        assert report["status"] == "ok"
        assert report["n_points"] == 300
        code, _, _ = run(
            capsys, "simulate", "--scene", str(scene_file),
            "--points", "300", "--seed", "7", "--out", str(b),
        )
        assert code == 0
        assert a.read_bytes() == b.read_bytes()
        assert load_scan_bin(a).n == 300

    def test_csv_output_and_beam_counts(self, capsys, scene_file, tmp_path):
        out_path = tmp_path / "scan.csv"
        code, out, _ = run(
            capsys, "simulate", "--scene", str(scene_file), "--beams", "4",
            "--points", "256", "--out", str(out_path), "--json",
        )
        assert code == 0
        report = check_report(out, "simulate")
        assert sum(report["per_beam_counts"]) == 256
        assert len(report["per_beam_counts"]) == 4
        assert out_path.exists()


class TestConvert:
    def test_five_point_fixture(self, capsys, five_point_csv, tmp_path):
        out_path = tmp_path / "c.bin"
        code, out, _ = run(
            capsys, "convert", "--in", str(five_point_csv),
            "--delta", "0.5", "--out", str(out_path), "--json",
        )
        assert code == 0
        report = check_report(out, "convert")
        assert report["n_curves"] == 2
        cc = load_curves_bin(out_path)
        assert np.array_equal(cc.offsets, [0, 3, 5])

    def test_huge_delta_single_curve(self, capsys, five_point_csv, tmp_path):
        out_path = tmp_path / "c.bin"
        code, out, _ = run(
            capsys, "convert", "--in", str(five_point_csv),
            "--delta", "1e9", "--out", str(out_path), "--json",
        )
        assert code == 0
        assert check_report(out, "convert")["n_curves"] == 1

    def test_tiny_delta_singletons(self, capsys, five_point_csv, tmp_path):
        out_path = tmp_path / "c.bin"
        code, out, _ = run(
            capsys, "convert", "--in", str(five_point_csv),
            "--delta", "1e-12", "--out", str(out_path), "--json",
        )
        assert code == 0
        assert check_report(out, "convert")["n_curves"] == 5

    def test_idempotent_output(self, capsys, five_point_csv, tmp_path):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        for path in (a, b):
            code, _, _ = run(
                capsys, "convert", "--in", str(five_point_csv),
                "--delta", "0.5", "--out", str(path),
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_range_scaling_flags(self, capsys, five_point_csv, tmp_path):
        out_path = tmp_path / "c.bin"
        code, _, _ = run(
            capsys, "convert", "--in", str(five_point_csv), "--delta", "0.5",
            "--range-scaling", "--origin", "0,0,0", "--reference-range", "2.0",
            "--out", str(out_path),
        )
        assert code == 0
        assert out_path.exists()


class TestFpsAndGroup:
    def test_fps_epsilon_larger_than_curves(self, capsys, curves_file, tmp_path):
        path, cc = curves_file
        out_path = tmp_path / "sel.csv"
        code, out, _ = run(
            capsys, "fps", "--in", str(path),
            "--epsilon", "1e9", "--out", str(out_path), "--json",
        )
        assert code == 0
        report = check_report(out, "fps")
        assert report["n_selected"] == cc.n_curves  # one survivor per curve
        idx = np.loadtxt(out_path, skiprows=1, dtype=np.int64)
        assert np.array_equal(np.sort(idx), np.sort(cc.offsets[:-1]))

    def test_group_csv_shape(self, capsys, curves_file, tmp_path):
        path, cc = curves_file
        out_path = tmp_path / "groups.csv"
        code, out, _ = run(
            capsys, "group", "--in", str(path), "--radius", "0.1",
            "--epsilon", "0.05", "--out", str(out_path), "--json",
        )
        assert code == 0
        report = check_report(out, "group")
        rows = np.loadtxt(out_path, delimiter=",", skiprows=1, dtype=np.int64)
        rows = rows.reshape(-1, 4)
        assert rows.shape[0] == report["n_centroids"]
        assert np.array_equal(rows[:, 3], rows[:, 2] - rows[:, 1])
        assert (rows[:, 3] >= 1).all()


class TestForwardPipeline:
    def test_init_forward_export(self, capsys, curves_file, tmp_path):
        path, cc = curves_file
        config_path = tmp_path / "config.json"
        config_path.write_text(config_to_json(toy_profile()))
        params_dir = tmp_path / "params"
        code, out, _ = run(
            capsys, "init-params", "--config", str(config_path),
            "--seed", "3", "--out", str(params_dir), "--json",
        )
        assert code == 0
        check_report(out, "init-params")

        labels_path = tmp_path / "labels.csv"
        logits_path = tmp_path / "logits.bin"
        code, out, _ = run(
            capsys, "forward", "--in", str(path), "--params", str(params_dir),
            "--config", str(config_path), "--logits", str(logits_path),
            "--out", str(labels_path), "--json",
        )
        assert code == 0
        report = check_report(out, "forward")
        assert report["n_points"] == cc.n
        assert sum(report["label_counts"]) == cc.n
        labels = load_labels_csv(labels_path)
        assert labels.shape == (cc.n,)

        ply_path = tmp_path / "out.ply"
        code, _, _ = run(
            capsys, "export-ply", "--in", str(path),
            "--labels", str(labels_path), "--out", str(ply_path),
        )
        assert code == 0
        _, rows = parse_ply(ply_path.read_text())
        assert rows.shape == (cc.n, 6)
        assert np.allclose(rows[:, :3], cc.positions, rtol=1e-6, atol=1e-8)

    def test_zero_head_labels_all_zero(self, capsys, curves_file, tmp_path):
        import dataclasses

        path, cc = curves_file
        params = init_backbone_params(toy_profile(), 0)
        zero_layers = tuple(
            dataclasses.replace(
                layer, weight=np.zeros_like(layer.weight), bias=np.zeros_like(layer.bias)
            )
            for layer in params.head.layers
        )
        params = dataclasses.replace(
            params, head=dataclasses.replace(params.head, layers=zero_layers)
        )
        params_dir = tmp_path / "params"
        save_backbone_params(params, params_dir)
        labels_path = tmp_path / "labels.csv"
        code, _, _ = run(
            capsys, "forward", "--in", str(path), "--params", str(params_dir),
            "--out", str(labels_path),
        )
        assert code == 0
        assert (load_labels_csv(labels_path) == 0).all()

    def test_config_mismatch_is_data_error(self, capsys, curves_file, tmp_path):
        import dataclasses

        path, _ = curves_file
        params_dir = tmp_path / "params"
        save_backbone_params(init_backbone_params(toy_profile(), 0), params_dir)
        other = dataclasses.replace(toy_profile(), classes=7)
        config_path = tmp_path / "other.json"
        config_path.write_text(config_to_json(other))
        code, _, err = run(
            capsys, "forward", "--in", str(path), "--params", str(params_dir),
            "--config", str(config_path), "--out", str(tmp_path / "l.csv"),
        )
        assert code == 2
        assert "config" in err


class TestBench:
    def test_repeat_one_produces_one_sample_per_size(self, capsys):
        code, out, _ = run(
            capsys, "bench", "--op", "fps1d", "--sizes", "2e3,4e3",
            "--repeat", "1", "--json",
        )
        assert code == 0
        report = check_report(out, "bench")
        results = report["results"]
        assert {r["n"] for r in results} == {2000, 4000}
        for r in results:
            assert len(r["samples_ms"]) == 1
            assert r["op"] == "fps1d"
            assert r["median_ms"] > 0

    def test_both_backends(self, capsys):
        from curvecloud import available_backends

        code, out, _ = run(
            capsys, "bench", "--op", "convert", "--sizes", "2e3",
            "--repeat", "1", "--backend", "both", "--json",
        )
        assert code == 0
        report = check_report(out, "bench")
        got = {r["backend"] for r in report["results"]}
        assert got == set(available_backends())

    def test_human_table(self, capsys):
        code, out, _ = run(
            capsys, "bench", "--op", "fps1d", "--sizes", "2e3", "--repeat", "1"
        )
        assert code == 0
        assert "fps1d" in out

    def test_bad_sizes_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "bench", "--op", "fps1d", "--sizes", "abc")
        assert code == 1


class TestJsonErrorReport:
    def test_error_report_validates(self, capsys, tmp_path):
        bad = tmp_path / "scene.json"
        bad.write_text("[]")
        code, out, _ = run(
            capsys, "simulate", "--scene", str(bad),
            "--out", str(tmp_path / "o.bin"), "--json",
        )
        assert code == 2
        report = check_report(out, "simulate")
        assert report["status"] == "error"
        assert report["error"]
