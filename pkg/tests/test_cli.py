"""The command line: exit codes, file hygiene, byte-level reproducibility."""

from __future__ import annotations

import json
import os

import pytest

from janossy_kit.cli import main

GAP_CONFIG = {
    "model": {"variant": "random", "seed": 31, "nodes": 4, "particles": 2,
              "floors": 2},
    "windows": [{"mask": [True, False, False, False]},
                {"mask": [False, False, False, True]}],
    "task": {"name": "gap"},
}

CORR_CONFIG = {
    "model": {"variant": "random", "seed": 31, "nodes": 4, "particles": 2,
              "floors": 2},
    "task": {"name": "correlations",
             "point_sets": [[[1, 0]], [[1, 0], [2, 3]]],
             "dump_kernel": True},
    "output": {"formats": ["json", "csv"]},
}

EXTREMES_CONFIG = {
    "model": {"variant": "unitary", "potential": [0.0, 0.0, 0.5],
              "particles": 2,
              "space": {"kind": "quadrature", "interval": [-6.0, 6.0],
                        "order": 32}},
    "task": {"name": "extremes", "floor": 1, "k": 1,
             "thresholds": [-1.0, 0.0, 1.0, 2.0]},
    "output": {"formats": ["json", "csv"]},
}

VERIFY_CONFIG = {
    "task": {"name": "verify", "suite": "heine", "instances": 4, "seed": 2},
}


def write_config(tmp_path, doc, name="config.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(tmp_path, doc, *args, out="out") -> tuple[int, str]:
    cfg = write_config(tmp_path, doc)
    out_dir = str(tmp_path / out)
    code = main(["run", cfg, "--out", out_dir, *args])
    return code, out_dir


def test_gap_task_end_to_end(tmp_path, capsys):
    code, out_dir = run(tmp_path, GAP_CONFIG)
    assert code == 0
    report = json.load(open(os.path.join(out_dir, "report.json")))
    assert report["schema"] == "jk-report-1"
    assert report["task"] == "gap"
    assert report["results"]["route_abs_difference"] < 1e-10
    # timings are printed, never stored
    assert "wall" in capsys.readouterr().out
    assert "wall" not in open(os.path.join(out_dir, "report.json")).read()


def test_correlations_task_writes_tagged_csv(tmp_path):
    code, out_dir = run(tmp_path, CORR_CONFIG)
    assert code == 0
    csv_text = open(os.path.join(out_dir, "correlations.csv")).read()
    assert csv_text.startswith("# jk-csv-1 correlations")
    kernel_text = open(os.path.join(out_dir, "kernel.csv")).read()
    assert kernel_text.startswith("# jk-csv-1 kernel")
    kernel_doc = json.load(open(os.path.join(out_dir, "kernel.json")))
    assert kernel_doc["schema"] == "jk-kernel-1"
    report = json.load(open(os.path.join(out_dir, "report.json")))
    assert sorted(report["files"]) == ["correlations.csv", "kernel.csv",
                                       "kernel.json"]


def test_extremes_task_curve_is_monotone(tmp_path):
    code, out_dir = run(tmp_path, EXTREMES_CONFIG)
    assert code == 0
    report = json.load(open(os.path.join(out_dir, "report.json")))
    cdfs = [p["cdf"] for p in report["results"]["points"]]
    assert all(b >= a - 1e-12 for a, b in zip(cdfs, cdfs[1:]))
    lines = open(os.path.join(out_dir, "extremes.csv")).read().splitlines()
    assert lines[0].startswith("# jk-csv-1 extremes")
    assert lines[1] == "s,prob_ge,cdf,p_count_0"


def test_verify_task_prints_pass_lines(tmp_path, capsys):
    code, out_dir = run(tmp_path, VERIFY_CONFIG)
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("heine instance") == 4
    report = json.load(open(os.path.join(out_dir, "report.json")))
    assert report["results"]["suite"] == "heine"
    assert report["passed"] is True


def test_reruns_are_byte_identical(tmp_path):
    code1, out1 = run(tmp_path, EXTREMES_CONFIG, out="first")
    code2, out2 = run(tmp_path, EXTREMES_CONFIG, out="second")
    code3, out3 = run(tmp_path, EXTREMES_CONFIG, "--threads", "4",
                      out="third")
    assert code1 == code2 == code3 == 0
    for name in ("report.json", "extremes.csv"):
        first = open(os.path.join(out1, name), "rb").read()
        assert first == open(os.path.join(out2, name), "rb").read()
        assert first == open(os.path.join(out3, name), "rb").read()


def test_malformed_json_exits_2_without_output_dir(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    out_dir = tmp_path / "never"
    code = main(["run", str(cfg), "--out", str(out_dir)])
    assert code == 2
    assert not out_dir.exists()


@pytest.mark.parametrize("doc", [
    {"task": {"name": "mystery"}},
    {"task": {"name": "gap"}},  # no model
    {"model": GAP_CONFIG["model"], "task": {"name": "gap"}},  # no windows
    {"model": GAP_CONFIG["model"], "task": {"name": "correlations"}},
    {"model": GAP_CONFIG["model"], "surprise": 1,
     "task": {"name": "correlations", "point_sets": [[[1, 0]]]}},
    {"model": GAP_CONFIG["model"],
     "task": {"name": "correlations", "point_sets": [[[1, 0, 9]]]}},
    {"model": GAP_CONFIG["model"],
     "task": {"name": "correlations", "point_sets": [[[9, 0]]]}},
    {"model": GAP_CONFIG["model"], "output": {"formats": ["xml"]},
     "task": {"name": "correlations", "point_sets": [[[1, 0]]]}},
    {"task": {"name": "verify", "suite": "mystery"}},
    {"model": {"variant": "random", "seed": 1},
     "task": {"name": "correlations", "point_sets": [[[1, 0]]]}},
])
def test_invalid_configs_exit_2_without_partial_files(tmp_path, doc):
    code, out_dir = run(tmp_path, doc)
    assert code == 2
    assert not os.path.exists(out_dir)


def test_budget_flag_exits_4(tmp_path):
    doc = {"task": {"name": "verify", "suite": "partition", "instances": 3,
                    "seed": 2}}
    code, _ = run(tmp_path, doc, "--budget", "2")
    assert code == 4


def test_singular_model_exits_3(tmp_path):
    doc = {
        "model": {"variant": "explicit",
                  "space": {"kind": "discrete", "points": [0.0, 1.0],
                            "masses": [1.0, 1.0]},
                  "f": [[1.0, 1.0], [1.0, 1.0]],
                  "phi": [[1.0, 1.0], [1.0, 1.0]]},
        "task": {"name": "correlations", "point_sets": [[[1, 0]]]},
    }
    code, out_dir = run(tmp_path, doc)
    assert code == 3
    assert not os.path.exists(os.path.join(out_dir, "report.json"))


def test_tolerance_override_exits_1_but_writes_report(tmp_path):
    doc = {"task": {"name": "verify", "suite": "correlations",
                    "instances": 6, "seed": 2},
           "tolerances": {"verify": 1e-30}}
    code, out_dir = run(tmp_path, doc)
    assert code == 1
    report = json.load(open(os.path.join(out_dir, "report.json")))
    assert report["passed"] is False


def test_seed_flag_overrides_verify_seed(tmp_path):
    doc = {"task": {"name": "verify", "suite": "heine", "instances": 3,
                    "seed": 2}}
    code_a, out_a = run(tmp_path, doc, out="a")
    code_b, out_b = run(tmp_path, doc, "--seed", "2", out="b")
    code_c, out_c = run(tmp_path, doc, "--seed", "99", out="c")
    assert code_a == code_b == code_c == 0
    ra = json.load(open(os.path.join(out_a, "report.json")))
    rb = json.load(open(os.path.join(out_b, "report.json")))
    rc = json.load(open(os.path.join(out_c, "report.json")))
    assert ra["results"]["records"] == rb["results"]["records"]
    assert ra["results"]["records"] != rc["results"]["records"]


def test_missing_config_file_exits_2(tmp_path):
    code = main(["run", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "never")])
    assert code == 2
    assert not (tmp_path / "never").exists()


def test_bad_flag_values_exit_2(tmp_path):
    cfg = write_config(tmp_path, VERIFY_CONFIG)
    assert main(["run", cfg, "--threads", "0"]) == 2
    assert main(["run", cfg, "--budget", "0"]) == 2


def test_no_leftover_temp_files(tmp_path):
    _, out_dir = run(tmp_path, CORR_CONFIG)
    leftovers = [name for name in os.listdir(out_dir)
                 if name.startswith(".tmp-") or name.endswith(".tmp")]
    assert leftovers == []
