import json
import subprocess
import sys

import pytest

import corpus

CLI = [sys.executable, "-m", "groundeval.cli"]


def run_cli(*args):
    return subprocess.run(
        CLI + list(args), capture_output=True, text=True, timeout=120
    )


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    truth, pred = corpus.write_corpus(d, n_per_task=3, seed=7)
    return truth, pred


def test_version_flag():
    proc = run_cli("--version")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.1.0"


def test_no_subcommand_is_config_error():
    proc = run_cli()
    assert proc.returncode == 3


def test_unknown_flag_is_config_error():
    proc = run_cli("score", "--nope")
    assert proc.returncode == 3


def test_score_happy_path(small_corpus, tmp_path):
    truth, pred = small_corpus
    out = tmp_path / "report.json"
    proc = run_cli("score", "--task", "all", "--truth", str(truth),
                   "--pred", str(pred), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    report = json.loads(out.read_text())
    assert set(report["tasks"]) == {"object", "area", "affordance", "trajectory", "grasp pose"}
    for agg in report["tasks"].values():
        assert agg["mean_x100"] == 100.0
    assert report["config"]["task"] == "all"
    assert len(report["rows"]) == 15


def test_score_single_task_with_dash_name(small_corpus, tmp_path):
    truth, pred = small_corpus
    out = tmp_path / "report.json"
    proc = run_cli("score", "--task", "grasp-pose", "--truth", str(truth),
                   "--pred", str(pred), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    report = json.loads(out.read_text())
    assert set(report["tasks"]) == {"grasp pose"}
    assert report["config"]["task"] == "grasp pose"


def test_score_distance_mode(small_corpus, tmp_path):
    truth, pred = small_corpus
    out = tmp_path / "report.json"
    proc = run_cli("score", "--task", "trajectory", "--traj-mode", "distance",
                   "--truth", str(truth), "--pred", str(pred), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    agg = json.loads(out.read_text())["tasks"]["trajectory"]
    assert agg["mean_distance"] == 0.0


def test_score_missing_truth_file_is_io_error(small_corpus, tmp_path):
    _, pred = small_corpus
    proc = run_cli("score", "--truth", str(tmp_path / "absent.jsonl"),
                   "--pred", str(pred), "--out", str(tmp_path / "o.json"))
    assert proc.returncode == 1


def test_score_duplicate_truth_is_schema_error(small_corpus, tmp_path):
    _, pred = small_corpus
    line = json.dumps({"id": "a", "task": "object", "frames": {"0": [0, 0, 10, 10]}})
    truth = write_lines(tmp_path / "dup.jsonl", [line, line])
    proc = run_cli("score", "--truth", str(truth), "--pred", str(pred),
                   "--out", str(tmp_path / "o.json"))
    assert proc.returncode == 2
    assert "duplicate" in proc.stderr


def test_score_bad_payload_is_schema_error(small_corpus, tmp_path):
    _, pred = small_corpus
    truth = write_lines(
        tmp_path / "bad.jsonl",
        [json.dumps({"id": "a", "task": "object", "frames": {"0": [0, 0, 10]}})],
    )
    proc = run_cli("score", "--truth", str(truth), "--pred", str(pred),
                   "--out", str(tmp_path / "o.json"))
    assert proc.returncode == 2
    assert "line 1" in proc.stderr


def test_score_parse_threshold_exceeded_is_exit_2(tmp_path):
    truth = write_lines(
        tmp_path / "t.jsonl",
        [json.dumps({"id": "a", "task": "affordance", "frames": {"0": [[500, 500]]}})],
    )
    pred = write_lines(tmp_path / "p.jsonl", [json.dumps({"id": "a", "raw": "no span"})])
    proc = run_cli("score", "--truth", str(truth), "--pred", str(pred),
                   "--out", str(tmp_path / "o.json"), "--parse-failure-limit", "0")
    assert proc.returncode == 2
    assert "failed to parse" in proc.stderr


def test_score_unmatched_error_vs_skip(tmp_path):
    truth = write_lines(
        tmp_path / "t.jsonl",
        [json.dumps({"id": "a", "task": "affordance", "frames": {"0": [[500, 500]]}})],
    )
    pred = write_lines(
        tmp_path / "p.jsonl",
        [
            json.dumps({"id": "a", "raw": "<affordance> <frame 0>: (500, 500) </affordance>"}),
            json.dumps({"id": "ghost", "raw": "<affordance> <frame 0>: (1, 1) </affordance>"}),
        ],
    )
    out = tmp_path / "o.json"
    proc = run_cli("score", "--truth", str(truth), "--pred", str(pred), "--out", str(out))
    assert proc.returncode == 2
    proc = run_cli("score", "--truth", str(truth), "--pred", str(pred),
                   "--out", str(out), "--unmatched", "skip")
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["skipped_unmatched"] == 1


def test_score_config_errors(small_corpus, tmp_path):
    truth, pred = small_corpus
    out = str(tmp_path / "o.json")
    base = ["score", "--truth", str(truth), "--pred", str(pred), "--out", out]
    assert run_cli(*base, "--task", "boxes").returncode == 3
    assert run_cli(*base, "--workers", "0").returncode == 3
    assert run_cli(*base, "--parse-failure-limit", "1.5").returncode == 3
    assert run_cli(*base, "--iou-threshold", "0").returncode == 3
    assert run_cli(*base, "--iou-threshold", "1.2").returncode == 3
    assert run_cli(*base, "--traj-mode", "fast").returncode == 3


def test_score_workers_flag_matches_serial(small_corpus, tmp_path):
    truth, pred = small_corpus
    out1, out4 = tmp_path / "r1.json", tmp_path / "r4.json"
    assert run_cli("score", "--truth", str(truth), "--pred", str(pred),
                   "--out", str(out1)).returncode == 0
    assert run_cli("score", "--truth", str(truth), "--pred", str(pred),
                   "--out", str(out4), "--workers", "4").returncode == 0
    r1, r4 = json.loads(out1.read_text()), json.loads(out4.read_text())
    assert r1["rows"] == r4["rows"] and r1["tasks"] == r4["tasks"]


def test_plan_happy_path(tmp_path):
    lengths = write_lines(tmp_path / "lens.jsonl", ["8", "7", "6", "5"])
    out = tmp_path / "plan.json"
    proc = run_cli("plan", "--lengths", str(lengths), "--world-size", "2",
                   "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(out.read_text())
    assert payload == {"buckets": [["0", "3"], ["1", "2"]], "loads": [13, 13], "makespan": 13}


def test_plan_world_size_zero_is_config_error(tmp_path):
    lengths = write_lines(tmp_path / "lens.jsonl", ["8"])
    proc = run_cli("plan", "--lengths", str(lengths), "--world-size", "0",
                   "--out", str(tmp_path / "plan.json"))
    assert proc.returncode == 3


def test_plan_missing_file_is_io_error(tmp_path):
    proc = run_cli("plan", "--lengths", str(tmp_path / "absent.jsonl"),
                   "--world-size", "2", "--out", str(tmp_path / "plan.json"))
    assert proc.returncode == 1


def test_plan_bad_tokens_is_schema_error(tmp_path):
    lengths = write_lines(tmp_path / "lens.jsonl", ["0"])
    proc = run_cli("plan", "--lengths", str(lengths), "--world-size", "2",
                   "--out", str(tmp_path / "plan.json"))
    assert proc.returncode == 2


def test_filter_happy_path(tmp_path):
    rows = [
        {"id": "a", "value": 0.5},
        {"id": "b", "value": 0.95},
        {"id": "c", "value": 0.1},
        {"id": "d", "value": 0.0, "frame_valid": False},
    ]
    scores = write_lines(tmp_path / "rows.jsonl", [json.dumps(r) for r in rows])
    out = tmp_path / "ids.json"
    proc = run_cli("filter", "--scores", str(scores), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(out.read_text())
    assert payload == {"ids": ["a", "d"], "low": 40.0, "high": 80.0}


def test_filter_reads_score_reports(small_corpus, tmp_path):
    truth, pred = small_corpus
    report_path = tmp_path / "report.json"
    assert run_cli("score", "--truth", str(truth), "--pred", str(pred),
                   "--out", str(report_path)).returncode == 0
    out = tmp_path / "ids.json"
    proc = run_cli("filter", "--scores", str(report_path), "--low", "90",
                   "--high", "100", "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    ids = json.loads(out.read_text())["ids"]
    assert len(ids) == 15  # perfect corpus: everything scores 100

    narrow = tmp_path / "none.json"
    proc = run_cli("filter", "--scores", str(report_path), "--low", "40",
                   "--high", "80", "--out", str(narrow))
    assert proc.returncode == 0
    assert json.loads(narrow.read_text())["ids"] == []


def test_filter_low_above_high_is_config_error(tmp_path):
    scores = write_lines(tmp_path / "rows.jsonl", [json.dumps({"id": "a", "value": 0.5})])
    proc = run_cli("filter", "--scores", str(scores), "--low", "80", "--high", "40",
                   "--out", str(tmp_path / "ids.json"))
    assert proc.returncode == 3


def test_filter_row_without_value_is_schema_error(tmp_path):
    scores = write_lines(tmp_path / "rows.jsonl", [json.dumps({"id": "a"})])
    proc = run_cli("filter", "--scores", str(scores),
                   "--out", str(tmp_path / "ids.json"))
    assert proc.returncode == 2


def test_batch_happy_path(tmp_path):
    calls = [
        {"id": "t1", "fn": "reward_trajectory",
         "args": {"pred": [[0, 0], [1, 0]], "truth": [[0, 0], [1, 0]]}},
        {"id": "adv", "fn": "group_advantages", "args": {"rewards": [1, 0, 0, 0, 0]}},
        {"id": "sur", "fn": "grpo_surrogate",
         "args": {"ratios": [2.0], "advantages": [1.0], "kl_terms": [0.0], "beta": 0.0}},
        {"id": "gnd", "fn": "score_grounding",
         "args": {"pred": {"frame": 0, "coords": [[0, 0], [500, 500]]},
                  "truth": {"frames": {"0": [0.0, 0.0, 0.5, 0.5]}}}},
    ]
    calls_path = write_lines(tmp_path / "calls.jsonl", [json.dumps(c) for c in calls])
    out = tmp_path / "results.jsonl"
    proc = run_cli("batch", "--calls", str(calls_path), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    results = {r["id"]: r for r in map(json.loads, out.read_text().splitlines())}
    assert results["t1"]["result"] == 1.0
    assert results["adv"]["result"]["advantages"][0] == pytest.approx(1.9995001249687576)
    assert results["sur"]["result"] == pytest.approx(1.28)
    assert results["gnd"]["result"] == {"value": 1.0, "frame_valid": True}


def test_batch_unknown_fn_is_schema_error(tmp_path):
    calls_path = write_lines(
        tmp_path / "calls.jsonl", [json.dumps({"fn": "nope", "args": {}})]
    )
    proc = run_cli("batch", "--calls", str(calls_path),
                   "--out", str(tmp_path / "results.jsonl"))
    assert proc.returncode == 2


def test_batch_missing_args_is_schema_error(tmp_path):
    calls_path = write_lines(
        tmp_path / "calls.jsonl",
        [json.dumps({"fn": "reward_trajectory", "args": {"pred": [[0, 0], [1, 0]]}})],
    )
    proc = run_cli("batch", "--calls", str(calls_path),
                   "--out", str(tmp_path / "results.jsonl"))
    assert proc.returncode == 2
    assert "bad arguments" in proc.stderr
