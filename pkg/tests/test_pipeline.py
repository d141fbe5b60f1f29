# stdlib
import json

# third party
import pandas as pd
import pytest

# first party
from audit_logger import get_audit_log, get_failed_stages
from exceptions import ConfigError, MalformedHeader
from helpers import read_csv_bytes
from intensity_report import REPORT_COLUMNS
from pipeline import (
    EXIT_CONFIG,
    EXIT_INPUT,
    EXIT_OK,
    SPECS_FILE,
    SYM_INDEX_COLUMNS,
    analyze_artifacts,
    audited,
    evaluate_directory,
    phantom_file_name,
    phantom_gen_artifacts,
    report_artifacts,
    run_pipeline,
    run_stage,
    segment_artifacts,
)
from settings import load_config

PIPELINE_FILES = ["asymmetry.pgm", "focus.json", "model.json", "report.csv"]


def _files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestRunPipeline:
    def test_writes_every_artifact(self, tmp_path, scan_file):
        out = tmp_path / "out"
        assert run_pipeline(load_config(input=scan_file, out=out, k_max=4)) == EXIT_OK
        files = _files(out)
        assert sorted(files) == PIPELINE_FILES

        focus = json.loads(files["focus.json"])
        assert focus["side"] == "Left"
        assert focus["axis_col"] == 128
        model = json.loads(files["model.json"])
        assert list(model) == ["k", "centers", "assignments", "epsilon_k", "d_k", "sym_index"]
        assert files["asymmetry.pgm"].startswith(b"P5\n256 256\n255\n")
        report = read_csv_bytes(files["report.csv"])
        assert list(report.columns) == REPORT_COLUMNS
        assert report.loc[0, "label"] == "scan.pgm"

    def test_byte_identical_reruns(self, tmp_path, scan_file):
        cfg = dict(input=scan_file, k_max=4, seed=5)
        assert run_pipeline(load_config(out=tmp_path / "a", **cfg)) == EXIT_OK
        assert run_pipeline(load_config(out=tmp_path / "b", **cfg)) == EXIT_OK
        assert _files(tmp_path / "a") == _files(tmp_path / "b")

    def test_baseline_row_comes_first(self, tmp_path, scan_file, normal_scan_file):
        out = tmp_path / "out"
        assert run_pipeline(load_config(input=scan_file, baseline=normal_scan_file, out=out, k_max=3)) == 0
        report = read_csv_bytes((out / "report.csv").read_bytes())
        assert report["label"].tolist() == ["normal.pgm", "scan.pgm"]
        assert report.loc[0, "red_ratio"] == 1.0
        # the lesion darkens the scan
        assert report.loc[1, "red_ratio"] < 1.0

    def test_symmetric_scan_has_no_model(self, tmp_path, normal_scan_file):
        out = tmp_path / "out"
        assert run_pipeline(load_config(input=normal_scan_file, out=out)) == EXIT_OK
        assert json.loads((out / "model.json").read_bytes()) is None
        assert json.loads((out / "focus.json").read_bytes())["side"] == "None"

    def test_missing_input_leaves_no_output(self, tmp_path):
        out = tmp_path / "out"
        code = run_pipeline(load_config(input=tmp_path / "absent.pgm", out=out))
        assert code == EXIT_INPUT
        assert not out.exists()
        assert len(get_failed_stages()) == 1

    def test_malformed_input(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        out = tmp_path / "out"
        assert run_pipeline(load_config(input=bad, out=out)) == EXIT_INPUT
        assert not out.exists()

    def test_missing_paths_are_configuration_errors(self, tmp_path, scan_file):
        assert run_pipeline(load_config(input=scan_file)) == EXIT_CONFIG
        assert run_pipeline(load_config(out=tmp_path / "out")) == EXIT_CONFIG
        assert not (tmp_path / "out").exists()

    def test_audit_records_each_stage(self, tmp_path, scan_file):
        run_pipeline(load_config(input=scan_file, out=tmp_path / "out", k_max=3))
        stages = set(get_audit_log()["stage"])
        assert {"load", "normalize", "detect_focus", "channel_summary", "emit_report"} <= stages


class TestStages:
    def test_segment(self, tmp_path, scan_file):
        plot = tmp_path / "sym.html"
        artifacts = segment_artifacts(load_config(input=scan_file, k_max=4), plot)
        table = read_csv_bytes(artifacts["sym_index.csv"])
        assert list(table.columns) == SYM_INDEX_COLUMNS
        assert table["k"].tolist() == [2, 3, 4]
        assert table["selected"].sum() == 1
        model = json.loads(artifacts["model.json"])
        assert model["k"] == int(table.loc[table["selected"], "k"].iloc[0])
        assert plot.exists()

    def test_segment_without_candidates(self, normal_scan_file):
        artifacts = segment_artifacts(load_config(input=normal_scan_file))
        assert json.loads(artifacts["model.json"]) is None
        assert artifacts["sym_index.csv"].decode().strip() == ",".join(SYM_INDEX_COLUMNS)

    def test_analyze(self, scan_file):
        artifacts = analyze_artifacts(load_config(input=scan_file, k_max=3))
        assert sorted(artifacts) == ["asymmetry.pgm", "focus.json"]
        assert json.loads(artifacts["focus.json"])["side"] == "Left"

    def test_report_in_json_with_classes(self, tmp_path, scan_file, normal_scan_file):
        plot = tmp_path / "chart.html"
        cfg = load_config(baseline=normal_scan_file, report_format="Json")
        artifacts = report_artifacts(cfg, [scan_file], plot)
        assert sorted(artifacts) == ["classes.json", "report.json"]
        rows = json.loads(artifacts["report.json"])
        assert [row["label"] for row in rows] == ["normal.pgm", "scan.pgm"]
        classes = json.loads(artifacts["classes.json"])
        assert set(classes) == {"normal.pgm", "scan.pgm"}
        assert set(classes.values()) <= {"WithinNormalBand", "OutOfBand"}
        assert plot.read_text().startswith("<html>")

    def test_report_needs_an_input(self):
        with pytest.raises(ConfigError, match="input is required"):
            report_artifacts(load_config(), [])


class TestPhantomStages:
    def test_gen_writes_specs_and_images(self):
        artifacts = phantom_gen_artifacts(load_config(seed=2, noise_sigma=0.0), 3)
        assert sorted(artifacts) == [phantom_file_name(i) for i in range(3)] + [SPECS_FILE]
        assert len(json.loads(artifacts[SPECS_FILE])) == 3

    def test_gen_then_eval(self, tmp_path):
        cfg = load_config(seed=2, noise_sigma=0.0, k_max=3)
        assert run_stage(lambda: phantom_gen_artifacts(cfg, 2), tmp_path) == EXIT_OK
        report = evaluate_directory(cfg, tmp_path)
        assert report.n == 2
        assert report.true_positives + report.false_negatives == 1

    def test_threads_match_serial(self, tmp_path):
        cfg = load_config(seed=3, noise_sigma=0.0, k_max=3)
        run_stage(lambda: phantom_gen_artifacts(cfg, 4), tmp_path)
        serial = evaluate_directory(cfg, tmp_path)
        threaded = evaluate_directory(load_config(seed=3, noise_sigma=0.0, k_max=3, n_jobs=2), tmp_path)
        assert serial == threaded


def test_audited_records_failures():
    with pytest.raises(MalformedHeader):
        with audited("load", "x.pgm"):
            raise MalformedHeader("bad magic")
    failed = get_failed_stages()
    assert failed.loc[0, "stage"] == "load"
    assert failed.loc[0, "error_message"] == "bad magic"
    assert isinstance(get_audit_log(), pd.DataFrame)
