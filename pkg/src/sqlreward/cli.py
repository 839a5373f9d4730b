"""Unified command line: decompose, exec, score, enrich, vote, eval, memory, serve.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .atomic import decompose
from .config import load_config
from .data import load_candidates, load_dataset
from .enrichment import audit_pools, build_reference_pool, save_pools
from .executor import (
    DbNotFound,
    GoldExecutionFailed,
    execute_sql,
    resolve_db_path,
    schema_columns,
)
from .memory import MemoryBank, RetrievalScope, make_embedder
from .selection import evaluate_dataset, group_by_execution, majority_vote
from .service import RewardService, ScoreRequest, serve_stdio

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _read_text_arg(value: str) -> str:
    """Treat the argument as a path when one exists, else as literal SQL/text."""
    if os.path.isfile(value):
        with open(value, encoding="utf-8") as f:
            return f.read()
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sqlreward", description=__doc__)
    parser.add_argument("--config", default=None, help="engine config file (YAML/JSON)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="canonical atomic operations of a SQL text")
    p.add_argument("sql", help="SQL text or a file containing it")
    p.add_argument("--json", action="store_true", help="emit {kind, args[]} objects")

    p = sub.add_parser("exec", help="run SQL on a SQLite file")
    p.add_argument("sql", help="SQL text or a file containing it")
    p.add_argument("--db", required=True)
    p.add_argument("--timeout", type=int, default=30000, help="budget in ms")

    p = sub.add_parser("score", help="score one rollout")
    p.add_argument("--db", help="database file (overrides --db-id lookup)")
    p.add_argument("--db-id", default="")
    p.add_argument("--gold", required=True, help="gold SQL text or file")
    p.add_argument("--pool", help="reference pool JSONL (optional)")
    p.add_argument("--bank", help="memory snapshot JSONL (optional)")
    p.add_argument("--rollout", required=True, help="rollout text or file")
    p.add_argument("--preset", default=None, help="shaping preset S1..S4")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--scope", default=None, choices=[s.value for s in RetrievalScope])
    p.add_argument("--no-memory-insert", action="store_true")

    p = sub.add_parser("enrich", help="build execution-verified reference pools")
    p.add_argument("--dataset", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--db-root", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timeout", type=int, default=30000)

    p = sub.add_parser("vote", help="majority-vote a candidate file")
    p.add_argument("--candidates", required=True)
    p.add_argument("--db-root", required=True)
    p.add_argument("--timeout", type=int, default=30000)

    p = sub.add_parser("eval", help="EX / Pass@K / diagnostics over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--db-root", required=True)
    p.add_argument("--report", required=True, help="output report JSON path")
    p.add_argument("--timeout", type=int, default=30000)

    p = sub.add_parser("memory", help="memory bank operations")
    msub = p.add_subparsers(dest="memory_command", required=True)

    m = msub.add_parser("init", help="seed a bank from verified traces")
    m.add_argument("--seeds", required=True,
                   help="JSONL rows {trace, db_id, exec_correct}")
    m.add_argument("--out", required=True)
    m.add_argument("--dim", type=int, default=None)
    m.add_argument("--provider", default=None)

    m = msub.add_parser("insert", help="gate + dedup + insert one trace")
    m.add_argument("--bank", required=True)
    m.add_argument("--trace", required=True, help="trace text or file")
    m.add_argument("--db-id", required=True)
    m.add_argument("--db-root", default=None, help="for schema column lookup")
    m.add_argument("--columns", default=None, help="comma-separated column names")
    m.add_argument("--provider", default=None)

    m = msub.add_parser("query", help="top-k retrieval")
    m.add_argument("--bank", required=True)
    m.add_argument("--trace", required=True, help="query trace text or file")
    m.add_argument("--db-id", required=True)
    m.add_argument("--k", type=int, default=None)
    m.add_argument("--scope", default=None, choices=[s.value for s in RetrievalScope])
    m.add_argument("--provider", default=None)

    m = msub.add_parser("stats", help="bank size and dimensions")
    m.add_argument("--bank", required=True)

    p = sub.add_parser("serve", help="run the batch scoring service")
    p.add_argument("--transport", choices=["stdio", "http"], default="stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8731)

    return parser


# ---------------------------------------------------------------------------
# command bodies


def cmd_decompose(args) -> int:
    sql = _read_text_arg(args.sql)
    ops = decompose(sql)
    if args.json:
        payload = {
            "parse_ok": ops.parse_ok,
            "error": ops.error,
            "ops": [{"kind": op.kind, "args": list(op.args)}
                    for op in sorted(ops.ops)],
        }
        print(json.dumps(payload, indent=2))
    else:
        for line in ops.renderings():
            print(line)
        if not ops.parse_ok:
            print(f"parse error: {ops.error}", file=sys.stderr)
            return DATA_ERROR
    return 0


def cmd_exec(args) -> int:
    res = execute_sql(args.db, _read_text_arg(args.sql), args.timeout)
    print(json.dumps({
        "status": res.status.value,
        "elapsed_ms": res.elapsed_ms,
        "rows": res.rows,
        "error_message": res.error_message,
    }))
    return 0


def cmd_score(args, config) -> int:
    from .enrichment import ReferencePool, load_pools
    from .memory import MemoryBank
    from .rewards import SHAPING_PRESETS, ScoreContext, composite_reward
    from .memory import make_embedder as _make

    gold = _read_text_arg(args.gold).strip()
    rollout = _read_text_arg(args.rollout)
    preset = args.preset or config.preset
    if preset not in SHAPING_PRESETS:
        print(f"error: unknown preset {preset}", file=sys.stderr)
        return USAGE_ERROR

    db_path = args.db or resolve_db_path(config.db_root, args.db_id)
    pool = ReferencePool(gold=gold, db_id=args.db_id)
    if args.pool:
        pools = load_pools(args.pool)
        for candidate in pools.values():
            if candidate.gold.strip() == gold:
                pool = candidate
                break
    if args.bank and os.path.isfile(args.bank):
        bank = MemoryBank.load(args.bank)
    else:
        bank = MemoryBank(dim=config.embedding_dim)
    embedder = _make(config.embedding_provider, dim=bank.dim,
                     url=config.embedding_url, path=config.embedding_file)
    ctx = ScoreContext(
        db_path=db_path,
        db_id=args.db_id,
        pool=pool,
        bank=bank,
        embedder=embedder,
        params=SHAPING_PRESETS[preset],
        k=args.k or config.k,
        scope=RetrievalScope(args.scope or config.scope),
        memory_insert=not args.no_memory_insert and config.memory_insert,
        timeout_ms=config.score_timeout_ms,
    )
    result = composite_reward(rollout, ctx)
    b = result.breakdown
    print(json.dumps({
        "breakdown": {"format": b.format, "exec": b.exec, "atomic": b.atomic,
                      "memory": b.memory, "total": b.total},
        "outcome": b.outcome.value,
        "memory_action": result.memory_action,
    }))
    if args.bank and not args.no_memory_insert:
        bank.save(args.bank)
    return 0


def cmd_enrich(args) -> int:
    dataset = load_dataset(args.dataset)
    candidates = load_candidates(args.candidates)
    pools = []
    for row in dataset:
        qid = row["question_id"]
        entry = candidates.get(qid, {})
        db_path = resolve_db_path(args.db_root, row["db_id"])
        pools.append(build_reference_pool(
            row["SQL"], entry.get("candidates", []), db_path,
            timeout_ms=args.timeout, question_id=qid, db_id=row["db_id"],
        ))
    save_pools(pools, args.out)
    report = audit_pools(pools)
    print(json.dumps(report.as_dict()))
    return 0


def cmd_vote(args) -> int:
    candidates = load_candidates(args.candidates)
    for qid, entry in candidates.items():
        db_path = resolve_db_path(args.db_root, entry["db_id"])
        groups = group_by_execution(entry["candidates"], db_path, args.timeout)
        vote = majority_vote(groups, entry["candidates"])
        print(json.dumps({
            "question_id": qid,
            "sql": vote.sql,
            "index": vote.index,
            "no_executable": vote.no_executable,
            "group_sizes": groups.sizes(),
            "failed": len(groups.failed),
        }))
    return 0


def cmd_eval(args) -> int:
    dataset = load_dataset(args.dataset)
    candidates = load_candidates(args.candidates)
    report = evaluate_dataset(
        dataset, candidates,
        lambda db_id: resolve_db_path(args.db_root, db_id),
        timeout_ms=args.timeout,
    )
    with open(args.report, "w", encoding="utf-8") as f:
        json.dump(report.as_dict(), f, indent=2)
    print(json.dumps({
        "ex": report.ex,
        "pass_at_k": report.pass_at_k,
        "mean_exec_groups": report.mean_exec_groups,
        "self_bleu": report.self_bleu,
        "questions": len(report.per_question),
    }))
    return 0


def _embedder_from(args, config, dim=None):
    provider = getattr(args, "provider", None) or config.embedding_provider
    return make_embedder(provider, dim=dim or config.embedding_dim,
                         url=config.embedding_url, path=config.embedding_file)


def cmd_memory(args, config) -> int:
    if args.memory_command == "init":
        seeds = []
        with open(args.seeds, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                seeds.append((row["trace"], row["db_id"],
                              bool(row.get("exec_correct", False))))
        dim = args.dim or config.embedding_dim
        embedder = _embedder_from(args, config, dim=dim)
        bank = MemoryBank.init(seeds, embedder, dim=dim)
        bank.save(args.out)
        print(json.dumps({"bank_size": len(bank), "dims": bank.dim,
                          "snapshot": args.out}))
        return 0

    if args.memory_command == "insert":
        bank = MemoryBank.load(args.bank)
        trace = _read_text_arg(args.trace)
        if args.columns:
            cols = [c.strip() for c in args.columns.split(",") if c.strip()]
        elif args.db_root:
            cols = schema_columns(resolve_db_path(args.db_root, args.db_id))
        else:
            print("error: provide --columns or --db-root", file=sys.stderr)
            return USAGE_ERROR
        embedder = _embedder_from(args, config, dim=bank.dim)
        result = bank.insert(trace, args.db_id, cols, embedder)
        if result.action == "Inserted":
            bank.save(args.bank)
        print(json.dumps({"action": result.action, "reason": result.reason,
                          "similarity": result.similarity,
                          "bank_size": len(bank)}))
        return 0

    if args.memory_command == "query":
        from .memory import extract_think

        bank = MemoryBank.load(args.bank)
        trace = extract_think(_read_text_arg(args.trace))
        embedder = _embedder_from(args, config, dim=bank.dim)
        query = embedder.embed(trace)
        hits = bank.retrieve(
            query, args.db_id,
            k=args.k or config.k,
            scope=RetrievalScope(args.scope or config.scope),
        )
        for entry in hits:
            print(json.dumps({"id": entry.id, "db_id": entry.db_id,
                              "trace": entry.trace, "source": entry.source}))
        return 0

    if args.memory_command == "stats":
        bank = MemoryBank.load(args.bank)
        print(json.dumps({"bank_size": len(bank), "dims": bank.dim}))
        return 0

    return USAGE_ERROR


def cmd_serve(args, config) -> int:
    service = RewardService(config)
    if args.transport == "stdio":
        serve_stdio(service)
        return 0
    from .http_api import serve_http

    serve_http(service, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR

    try:
        if args.command == "decompose":
            return cmd_decompose(args)
        if args.command == "exec":
            return cmd_exec(args)
        if args.command == "score":
            return cmd_score(args, config)
        if args.command == "enrich":
            return cmd_enrich(args)
        if args.command == "vote":
            return cmd_vote(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "memory":
            return cmd_memory(args, config)
        if args.command == "serve":
            return cmd_serve(args, config)
    except (DbNotFound, GoldExecutionFailed, FileNotFoundError,
            json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DATA_ERROR
    return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
