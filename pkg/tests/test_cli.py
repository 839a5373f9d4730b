"""CLI surface tests for every subcommand."""

import json

import pytest

from sqlreward.cli import main

GOLD = "SELECT name FROM cust WHERE ct = 'AU'"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_decompose_sorted_lines(capsys):
    code, out, _ = run_cli(capsys, "decompose", "SELECT name FROM cust AS T1 WHERE ct = 'AU'")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines == sorted(lines)
    assert "FROM(cust)" in lines
    assert "WHERE_PRED(=,cust.ct,VALUE('AU'))" in lines


def test_decompose_json_form(capsys):
    code, out, _ = run_cli(capsys, "decompose", "SELECT name FROM cust", "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["parse_ok"]
    assert {"kind": "FROM", "args": ["cust"]} in payload["ops"]


def test_decompose_file_argument(capsys, tmp_path):
    path = tmp_path / "q.sql"
    path.write_text("SELECT name FROM cust")
    code, out, _ = run_cli(capsys, "decompose", str(path))
    assert code == 0
    assert "SELECT_COL(cust.name)" in out


def test_decompose_parse_error_exit_code(capsys):
    code, _, err = run_cli(capsys, "decompose", "SELECT FROM WHERE")
    assert code == 2
    assert "parse error" in err


def test_exec_json_output(capsys, shop_db):
    code, out, _ = run_cli(capsys, "exec", "SELECT COUNT(*) FROM cust", "--db", shop_db)
    assert code == 0
    payload = json.loads(out)
    assert payload["status"] == "OK"
    assert payload["rows"] == [[4]]


def test_exec_syntax_error_status(capsys, shop_db):
    code, out, _ = run_cli(capsys, "exec", "SELEC 1", "--db", shop_db)
    assert code == 0
    assert json.loads(out)["status"] == "SyntaxError"


def test_usage_error_exit_code_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["exec"])  # missing --db and sql
    assert exc.value.code == 1


def test_data_error_exit_code_2(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "exec", "SELECT 1", "--db", str(tmp_path / "missing.sqlite")
    )
    assert code == 2
    assert "DbNotFound" in err


def test_score_command(capsys, shop_db, tmp_path):
    rollout = tmp_path / "rollout.txt"
    rollout.write_text("<think>pick australian customers</think>" + GOLD)
    code, out, _ = run_cli(
        capsys, "score", "--db", shop_db, "--db-id", "shop",
        "--gold", GOLD, "--rollout", str(rollout), "--no-memory-insert",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["outcome"] == "Match"
    assert payload["breakdown"]["total"] == 4.0


def test_score_with_preset(capsys, shop_db, tmp_path):
    rollout = tmp_path / "rollout.txt"
    rollout.write_text("<think>t</think>SELECT name FROM cust WHERE ct = 'NZ'")
    code, out, _ = run_cli(
        capsys, "score", "--db", shop_db, "--db-id", "shop",
        "--gold", GOLD, "--rollout", str(rollout),
        "--preset", "S4", "--no-memory-insert",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["outcome"] == "ExecutedMismatch"
    assert payload["breakdown"]["exec"] == 1


def _write_fixture_files(tmp_path):
    dataset = tmp_path / "dataset.jsonl"
    candidates = tmp_path / "candidates.jsonl"
    dataset.write_text(json.dumps({
        "question_id": "q1", "db_id": "shop", "question": "", "evidence": "",
        "SQL": GOLD,
    }) + "\n")
    candidates.write_text(json.dumps({
        "question_id": "q1", "db_id": "shop",
        "candidates": [GOLD,
                       "SELECT cust.name FROM cust WHERE cust.ct = 'AU'",
                       "SELECT name FROM cust WHERE ct = 'NZ'"],
        "traces": ["pick australians", "pick australian customers",
                   "choose the wrong country"],
    }) + "\n")
    return str(dataset), str(candidates)


def test_enrich_command(capsys, db_root, tmp_path):
    dataset, candidates = _write_fixture_files(tmp_path)
    out_path = tmp_path / "pools.jsonl"
    code, out, _ = run_cli(
        capsys, "enrich", "--dataset", dataset, "--candidates", candidates,
        "--db-root", db_root, "--out", str(out_path),
    )
    assert code == 0
    audit = json.loads(out)
    assert audit["empty_gold_count"] == 0
    row = json.loads(out_path.read_text().strip())
    assert row["gold"] == GOLD
    assert row["variants"] == ["SELECT cust.name FROM cust WHERE cust.ct = 'AU'"]


def test_vote_command(capsys, db_root, tmp_path):
    _, candidates = _write_fixture_files(tmp_path)
    code, out, _ = run_cli(capsys, "vote", "--candidates", candidates,
                           "--db-root", db_root)
    assert code == 0
    row = json.loads(out.strip())
    assert row["question_id"] == "q1"
    assert row["sql"] == GOLD
    assert row["group_sizes"] == [2, 1]


def test_eval_command(capsys, db_root, tmp_path):
    dataset, candidates = _write_fixture_files(tmp_path)
    report_path = tmp_path / "report.json"
    code, out, _ = run_cli(
        capsys, "eval", "--dataset", dataset, "--candidates", candidates,
        "--db-root", db_root, "--report", str(report_path),
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["ex"] == 1.0
    assert summary["pass_at_k"] == 1.0
    report = json.loads(report_path.read_text())
    assert report["per_question"][0]["question_id"] == "q1"
    assert report["self_bleu"] is not None


def test_memory_lifecycle(capsys, db_root, tmp_path):
    seeds = tmp_path / "seeds.jsonl"
    trace_a = "id name ct " + " ".join(f"a{i}" for i in range(37))
    trace_b = "total placed id " + " ".join(f"b{i}" for i in range(37))
    seeds.write_text("\n".join([
        json.dumps({"trace": f"<think>{trace_a}</think>SELECT 1",
                    "db_id": "school", "exec_correct": True}),
        json.dumps({"trace": "<think>skipped</think>SELECT 2",
                    "db_id": "school", "exec_correct": False}),
    ]) + "\n")
    bank_path = tmp_path / "bank.jsonl"

    code, out, _ = run_cli(capsys, "memory", "init", "--seeds", str(seeds),
                           "--out", str(bank_path), "--dim", "32")
    assert code == 0
    assert json.loads(out)["bank_size"] == 1

    trace_file = tmp_path / "trace.txt"
    trace_file.write_text(trace_b)
    code, out, _ = run_cli(
        capsys, "memory", "insert", "--bank", str(bank_path),
        "--trace", str(trace_file), "--db-id", "shop", "--db-root", db_root,
    )
    assert code == 0
    assert json.loads(out)["action"] == "Inserted"

    code, out, _ = run_cli(capsys, "memory", "stats", "--bank", str(bank_path))
    assert code == 0
    assert json.loads(out) == {"bank_size": 2, "dims": 32}

    query_file = tmp_path / "query.txt"
    query_file.write_text(trace_a)
    code, out, _ = run_cli(
        capsys, "memory", "query", "--bank", str(bank_path),
        "--trace", str(query_file), "--db-id", "shop", "--k", "5",
        "--scope", "CrossDB",
    )
    assert code == 0
    rows = [json.loads(l) for l in out.strip().splitlines()]
    assert len(rows) == 1  # the shop-inserted entry is excluded by CrossDB
    assert rows[0]["db_id"] == "school"


def test_config_file_accepted_everywhere(capsys, db_root, tmp_path):
    cfg = tmp_path / "engine.yaml"
    cfg.write_text(f"db_root: {db_root}\npreset: S2\n")
    code, out, _ = run_cli(
        capsys, "--config", str(cfg), "decompose", "SELECT name FROM cust"
    )
    assert code == 0


def test_spider_style_dataset_mapping(capsys, db_root, tmp_path):
    dataset = tmp_path / "spider.jsonl"
    dataset.write_text(json.dumps({
        "db_id": "shop", "question": "names?", "query": GOLD,
    }) + "\n")
    candidates = tmp_path / "cands.jsonl"
    candidates.write_text(json.dumps({
        "question_id": "0", "db_id": "shop", "candidates": [GOLD],
    }) + "\n")
    report_path = tmp_path / "report.json"
    code, out, _ = run_cli(
        capsys, "eval", "--dataset", str(dataset), "--candidates",
        str(candidates), "--db-root", db_root, "--report", str(report_path),
    )
    assert code == 0
    assert json.loads(out)["ex"] == 1.0
