"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one pass/fail line
per criterion.
"""

import json
import random
import sys
import time

import numpy as np
import pytest

from fixture_corpus import FIXTURE, fixture_questions_and_candidates
from sqlreward.atomic import AtomicOp, AtomicOpSet, OP_KINDS, decompose, jaccard
from sqlreward.config import EngineConfig
from sqlreward.enrichment import ReferencePool, audit_pools, build_reference_pool
from sqlreward.executor import (
    denotation_match,
    execute_sql,
    resolve_db_path,
)
from sqlreward.memory import (
    MemoryBank,
    RetrievalScope,
    StubEmbedder,
    centroid,
    quality_gate,
)
from sqlreward.rewards import (
    SHAPING_PRESETS,
    ScoreContext,
    composite_reward,
    shape,
)
from sqlreward.selection import (
    evaluate_dataset,
    group_by_execution,
    majority_vote,
    self_bleu,
)
from sqlreward.service import RewardService
from test_atomic import INVARIANCE_PAIRS, brute_force_jaccard, random_op
from test_memory import COLS, FakeEmbedder, make_good_trace
from test_selection import _assert_grouping_matches_pairwise, oracle_bleu


def report(line: str) -> None:
    print(line, file=sys.stderr, flush=True)


S3 = SHAPING_PRESETS["S3"]
S4 = SHAPING_PRESETS["S4"]


def test_criterion_shaping_exactness():
    start = time.monotonic()
    assert abs(shape(1.0, S3) - 0.8005) <= 1e-12
    assert abs(shape(1.0, S4) - 0.8) <= 1e-12
    assert shape(0.95, S3) < 0.95
    xs = [i / 1000 for i in range(1001)]
    for name, params in SHAPING_PRESETS.items():
        values = [shape(x, params) for x in xs]
        assert all(a <= b for a, b in zip(values, values[1:])), name
    elapsed = time.monotonic() - start
    assert elapsed < 1.0, f"shaping checks took {elapsed:.2f}s"
    report("ACCEPTANCE PASS: shaping exactness (S3=0.8005, S4=0.8, monotone grid)")


def test_criterion_reward_ladder(shop_db):
    start = time.monotonic()
    gold = "SELECT name FROM cust WHERE ct = 'AU'"
    stub = StubEmbedder(dim=32)
    bank = MemoryBank(dim=32)
    bank._append("choose customers from the right country", "other_db",
                 stub.embed("choose customers from the right country"), "SEED")
    ctx = ScoreContext(
        db_path=shop_db, db_id="shop",
        pool=ReferencePool(gold=gold), bank=bank, embedder=stub,
        params=S3, memory_insert=False,
    )

    wrong_format = composite_reward("SELECT 1 with no think block", ctx).breakdown
    assert wrong_format.total == 0.0

    # parses for decomposition, fails at runtime (unknown column)
    non_exec_sql = "SELECT name FROM cust WHERE country = 'AU'"
    non_exec = composite_reward(f"<think>t</think>{non_exec_sql}", ctx).breakdown
    j = jaccard(decompose(non_exec_sql), decompose(gold))
    assert non_exec.format == 1 and non_exec.exec == 0
    assert non_exec.atomic == pytest.approx(shape(j, S3), abs=1e-12)
    assert non_exec.total == pytest.approx(1 + shape(j, S3) + non_exec.memory, abs=1e-12)

    wrong_sql = "SELECT name FROM cust WHERE ct = 'NZ'"
    wrong = composite_reward(f"<think>t</think>{wrong_sql}", ctx).breakdown
    j = jaccard(decompose(wrong_sql), decompose(gold))
    assert wrong.format == 1 and wrong.exec == 1
    assert wrong.atomic == pytest.approx(shape(j, S3), abs=1e-12)
    assert wrong.total == pytest.approx(2 + shape(j, S3) + wrong.memory, abs=1e-12)

    correct = composite_reward(f"<think>t</think>{gold}", ctx).breakdown
    assert correct.atomic == 0.0
    assert correct.total == 4.0

    assert wrong_format.total < non_exec.total < wrong.total < correct.total
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"ladder took {elapsed:.2f}s"
    report("ACCEPTANCE PASS: reward ladder (0 / 1+phi+mem / 2+phi+mem / 4.0)")


def test_criterion_atomic_invariance_corpus():
    assert len(INVARIANCE_PAIRS) >= 30
    for left, right in INVARIANCE_PAIRS:
        assert jaccard(decompose(left), decompose(right)) == 1.0, (left, right)

    rng = random.Random(4242)
    for _ in range(100):
        a_list = [random_op(rng) for _ in range(rng.randint(0, 12))]
        b_list = [random_op(rng) for _ in range(rng.randint(0, 12))]
        if a_list and rng.random() < 0.7:
            b_list.extend(rng.sample(a_list, rng.randint(1, len(a_list))))
        a = AtomicOpSet(ops=frozenset(a_list), source_sql="", parse_ok=True)
        b = AtomicOpSet(ops=frozenset(b_list), source_sql="", parse_ok=True)
        assert jaccard(a, b) == brute_force_jaccard(a_list, b_list)
    report("ACCEPTANCE PASS: atomic invariance corpus (>=30 pairs at 1.0; "
           "100 randomized pairs == brute-force oracle)")


def test_criterion_memory_gate_boundaries():
    # token count 29 / 30
    assert quality_gate(make_good_trace("a", 29), COLS).reason == "TooShort"
    assert quality_gate(make_good_trace("b", 30), COLS).accepted

    # schema density 0.049 / 0.05 over 1000 tokens
    def density_trace(mentions: int) -> str:
        cols = ["id" if i % 2 == 0 else "name" for i in range(mentions)]
        fills = [f"f{i}" for i in range(1000 - mentions)]
        seq, ci, fi = [], iter(cols), iter(fills)
        for i in range(1000):
            nxt = next(ci, None) if i % 20 == 0 else None
            seq.append(nxt if nxt is not None else next(fi))
        return " ".join(seq)

    assert quality_gate(density_trace(49), COLS).reason == "LowDensity"
    assert quality_gate(density_trace(50), COLS).accepted

    # distinct column mentions 1 / 2
    one = " ".join(["id", "id"] + [f"g{i}" for i in range(38)])
    two = " ".join(["id", "name"] + [f"g{i}" for i in range(38)])
    assert quality_gate(one, COLS).reason == "FewColumns"
    assert quality_gate(two, COLS).accepted

    # bigram uniqueness 0.599 / 0.60
    def diversity_trace(k: int, m: int) -> str:
        return " ".join(["id"] * k + ["name"] + [f"t{i}" for i in range(m - 1)])

    low = quality_gate(diversity_trace(403, 598), COLS)
    assert low.reason == "LowDiversity" and low.metrics["bigram_uniqueness"] == 0.599
    ok = quality_gate(diversity_trace(402, 599), COLS)
    assert ok.accepted and ok.metrics["bigram_uniqueness"] == 0.600

    # dedup cosine 0.899 / 0.900 (exact arithmetic constructions)
    t_a, t_b, t_c = (make_good_trace(t) for t in ("da", "db", "dc"))
    unit_a = np.array([0.6, 0.8, 0.0, 0.0, 0.0])
    perp = np.array([-0.8, 0.6, 0.0, 0.0, 0.0])
    near = 0.899 * unit_a + float(np.sqrt(1 - 0.899 ** 2)) * perp
    emb = FakeEmbedder({
        t_a: [3.0, 4.0, 0.0, 0.0, 0.0],        # norm 5
        t_b: [1.0, 1.5, 0.5, 0.5, 0.5],        # norm 2, dot = 9 -> cos 0.9
        t_c: near.tolist(),                     # cos ~= 0.899
    }, dim=5)
    bank = MemoryBank(dim=5)
    assert bank.insert(t_a, "shop", COLS, emb).action == "Inserted"
    dup = bank.insert(t_b, "shop", COLS, emb)
    assert dup.action == "Duplicate" and dup.similarity == 0.9
    assert bank.insert(t_c, "shop", COLS, emb).action == "Inserted"

    # CrossDB scope soundness over 1000 random banks
    rng = random.Random(77)
    for _ in range(1000):
        bank = MemoryBank(dim=6)
        n = rng.randint(1, 10)
        for i in range(n):
            vec = np.array([rng.gauss(0, 1) for _ in range(6)])
            bank._append(f"t{i}", rng.choice("xyz"), vec, "SEED")
        query_db = rng.choice("xyz")
        query = np.array([rng.gauss(0, 1) for _ in range(6)])
        for entry in bank.retrieve(query, query_db, k=4,
                                   scope=RetrievalScope.CROSS_DB):
            assert entry.db_id != query_db
    report("ACCEPTANCE PASS: memory gate boundaries (29/30, 0.049/0.05, 1/2, "
           "0.599/0.60, 0.899/0.900) and CrossDB soundness x1000")


def test_criterion_retrieval_oracle():
    rng = random.Random(31337)
    for n in (10, 100, 1000):
        bank = MemoryBank(dim=12)
        for i in range(n):
            vec = np.array([rng.gauss(0, 1) for _ in range(12)])
            bank._append(f"t{i}", rng.choice("abc"), vec, "SEED")
        query = np.array([rng.gauss(0, 1) for _ in range(12)])

        scored = []
        for idx, entry in enumerate(bank.entries):
            if entry.db_id == "a":
                continue
            dot = sum(float(x) * float(y) for x, y in zip(entry.embedding, query))
            na = sum(float(x) ** 2 for x in entry.embedding) ** 0.5
            nb = sum(float(y) ** 2 for y in query) ** 0.5
            scored.append((idx, dot / (na * nb) if na and nb else 0.0))
        scored.sort(key=lambda t: (-t[1], t[0]))
        expected = [bank.entries[i].id for i, _ in scored[:15]]

        got = [e.id for e in bank.retrieve(query, "a", k=15,
                                           scope=RetrievalScope.CROSS_DB)]
        assert got == expected, f"bank size {n}"

    vectors = [np.array([rng.gauss(0, 1) for _ in range(12)]) for _ in range(9)]
    mean = centroid(vectors)
    by_hand = np.array([sum(v[d] for v in vectors) / 9 for d in range(12)])
    assert np.max(np.abs(mean - by_hand)) <= 1e-9
    report("ACCEPTANCE PASS: retrieval == full-scan oracle (10/100/1000) and "
           "centroid == componentwise mean to 1e-9")


EMPTY_GOLD_QUESTIONS = {
    "e00": ("shop", "SELECT name FROM cust WHERE ct = 'XX'",
            ["SELECT name FROM cust WHERE 1 = 0"]),
    "e01": ("shop", "SELECT name FROM cust WHERE id > 999",
            ["SELECT name FROM cust WHERE id > 1000"]),
    "e02": ("school", "SELECT name FROM students WHERE grade = 99",
            ["SELECT name FROM students WHERE grade = 98"]),
}


def test_criterion_enrichment_soundness(db_root, tmp_path):
    questions, candidate_map, _ = fixture_questions_and_candidates()
    # hand-plant three empty-gold questions on top of the 20-question corpus
    for qid, (db_id, gold, cands) in EMPTY_GOLD_QUESTIONS.items():
        questions.append({"question_id": qid, "db_id": db_id, "question": "",
                          "evidence": "", "SQL": gold})
        candidate_map[qid] = {"db_id": db_id, "candidates": cands}

    # handcrafted candidate files on disk, read back through the loaders
    dataset_path = tmp_path / "dataset.jsonl"
    cand_path = tmp_path / "candidates.jsonl"
    dataset_path.write_text("\n".join(json.dumps(q) for q in questions) + "\n")
    cand_path.write_text("\n".join(
        json.dumps({"question_id": qid, "db_id": entry["db_id"],
                    "candidates": entry["candidates"]})
        for qid, entry in candidate_map.items()
    ) + "\n")

    from sqlreward.data import load_candidates, load_dataset

    pools = []
    loaded_cands = load_candidates(str(cand_path))
    for row in load_dataset(str(dataset_path)):
        db_path = resolve_db_path(db_root, row["db_id"])
        entry = loaded_cands.get(row["question_id"], {})
        pool = build_reference_pool(
            row["SQL"], entry.get("candidates", []), db_path,
            question_id=row["question_id"], db_id=row["db_id"],
        )
        pools.append(pool)

    # soundness: every retained variant re-verifies denotation-equal to gold
    for pool in pools:
        db_path = resolve_db_path(db_root, pool.db_id)
        gold_rows = execute_sql(db_path, pool.gold, 5000).rows
        for variant in pool.variants:
            res = execute_sql(db_path, variant, 5000)
            assert res.ok, (pool.question_id, variant)
            assert denotation_match(res.rows, gold_rows), (pool.question_id, variant)

    # audit reports exactly the hand-planted flags
    audit = audit_pools(pools)
    assert sorted(audit.flagged_question_ids) == sorted(EMPTY_GOLD_QUESTIONS)
    assert audit.empty_gold_count == 3

    # atomic reward against the enriched pool dominates gold-only
    from sqlreward.rewards import atomic_reward

    for pool in pools:
        gold_only = ReferencePool(gold=pool.gold)
        entry = loaded_cands[pool.question_id]
        for pred in entry["candidates"]:
            assert atomic_reward(pred, pool, S3) >= atomic_reward(pred, gold_only, S3)
    report("ACCEPTANCE PASS: enrichment soundness (re-verification, planted "
           "empty-gold audit, pool-monotone atomic reward)")


def test_criterion_voting_oracle(db_root):
    start = time.monotonic()
    questions, candidate_map, labels = fixture_questions_and_candidates()

    for row in questions:
        qid = row["question_id"]
        candidates = candidate_map[qid]["candidates"]
        assert len(candidates) <= 10
        db_path = resolve_db_path(db_root, row["db_id"])
        groups = group_by_execution(candidates, db_path, 5000)
        _assert_grouping_matches_pairwise(candidates, groups, db_path)
        vote = majority_vote(groups, candidates)
        if groups.groups:
            max_size = max(len(g.members) for g in groups.groups)
            winning = [g for g in groups.groups if vote.index in g.members]
            assert len(winning) == 1 and len(winning[0].members) == max_size

    report_obj = evaluate_dataset(
        questions, candidate_map,
        lambda db_id: resolve_db_path(db_root, db_id), timeout_ms=5000,
    )
    assert report_obj.ex <= report_obj.pass_at_k
    for q in report_obj.per_question:
        assert q.ex <= q.pass_at_k
        assert q.ex == int(labels[q.question_id])
    assert report_obj.ex == 0.65

    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"eval fixture took {elapsed:.2f}s"
    report("ACCEPTANCE PASS: voting oracle (O(K^2) agreement, EX<=Pass@K, "
           f"EX=0.65 exactly, end-to-end in {elapsed:.2f}s)")


def test_criterion_self_bleu():
    identical = ["sum totals per customer then rank them"] * 5
    assert self_bleu(identical) == pytest.approx(1.0)

    disjoint = ["alpha beta gamma delta epsilon", "uno dos tres cuatro cinco"]
    assert self_bleu(disjoint) == pytest.approx(0.0, abs=1e-9)

    crafted = [
        "join the orders table with customers and sum totals",
        "join the orders table with suppliers and count rows",
        "filter customers by country then sum the order totals",
    ]
    expected = sum(
        oracle_bleu(crafted[i], [crafted[j] for j in range(3) if j != i])
        for i in range(3)
    ) / 3
    assert self_bleu(crafted) == pytest.approx(expected, abs=1e-6)
    report("ACCEPTANCE PASS: Self-BLEU (identical=1.0, disjoint~0, crafted "
           "== independent oracle to 1e-6)")


def test_criterion_service_contract(db_root, tmp_path):
    gold = "SELECT name FROM cust WHERE ct = 'AU'"
    good = ("<think>id name ct " + " ".join(f"w{i}" for i in range(37))
            + "</think>" + gold)
    bank_path = str(tmp_path / "bank.jsonl")
    service = RewardService(EngineConfig(
        db_root=db_root, embedding_dim=16, bank_path=bank_path,
        parallelism=4, score_timeout_ms=400,
    ))

    # 32-rollout batch (one GRPO group): ordered responses, echoed ids
    requests = []
    for i in range(32):
        row = {"id": f"g{i:02d}", "question_id": f"g{i:02d}", "db_id": "shop",
               "rollout": good, "gold_sql": gold}
        if i == 7:  # poisoned: unknown database
            row["db_id"] = "no_such_db"
        if i == 13:  # poisoned: runaway SQL, bounded by the timeout
            row["rollout"] = ("<think>spin</think>WITH RECURSIVE c(x) AS "
                              "(SELECT 1 UNION ALL SELECT x+1 FROM c) "
                              "SELECT COUNT(*) FROM c")
        requests.append(row)
    responses = service.score_batch(requests)
    assert len(responses) == 32
    assert [r["id"] for r in responses] == [f"g{i:02d}" for i in range(32)]
    assert responses[7]["error"]["type"] == "DbNotFound"
    assert responses[13]["outcome"] == "Failed"
    healthy = [r for i, r in enumerate(responses) if i not in (7, 13)]
    assert all(r["breakdown"]["total"] == 4.0 for r in healthy)

    # snapshot round-trips across a service restart
    size_before = len(service.bank)
    assert size_before >= 1
    service.snapshot()
    restarted = RewardService(EngineConfig(
        db_root=db_root, embedding_dim=16, bank_path=bank_path,
    ))
    assert len(restarted.bank) == size_before
    report("ACCEPTANCE PASS: service contract (32 ordered echoed responses, "
           "per-item degradation, snapshot round-trip)")
