#!/usr/bin/env python3
"""Smoke test for the insertrank_py extension module.

Builds nothing itself: it locates the cdylib produced by
`cargo build -p insertrank-py` (debug or release), exposes it on
sys.path under the importable name, and drives the main operations.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def locate_extension() -> Path:
    candidates = [
        REPO_ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libinsertrank_py.so", "libinsertrank_py.dylib", "insertrank_py.dll")
    ]
    for path in candidates:
        if path.is_file():
            return path
    sys.exit(
        "insertrank_py cdylib not found; run `cargo build -p insertrank-py` first\n"
        f"searched: {', '.join(str(c) for c in candidates)}"
    )


def import_module(tmp: Path):
    source = locate_extension()
    suffix = ".pyd" if source.suffix == ".dll" else ".so"
    shutil.copy2(source, tmp / f"insertrank_py{suffix}")
    sys.path.insert(0, str(tmp))
    import insertrank_py

    return insertrank_py


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="insertrank_py_"))
    ir = import_module(tmp)

    # Tokenization.
    assert ir.tokenize("Counting reads, per-interval!") == [
        "counting",
        "reads",
        "per",
        "interval",
    ]
    assert ir.tokenize("") == []

    # BM25 indexing, scoring, retrieval.
    index = ir.Bm25Index.build([("d1", "a b a"), ("d2", "b c")], k1=0.9, b=0.4)
    assert index.num_docs == 2
    assert abs(index.avgdl - 2.5) < 1e-12
    score = index.score(["a"], 0)
    assert abs(score - 0.8862) < 1e-4, score
    hits = index.retrieve("a b", k=10)
    assert [h[0] for h in hits] == ["d1", "d2"]
    assert hits[0][2] == 1  # first_stage_rank

    # Index file round trip.
    index_path = tmp / "toy.bmix"
    index.save(index_path)
    loaded = ir.Bm25Index.load(index_path)
    assert loaded.num_docs == 2
    assert loaded.doc_text("d2") == "b c"

    # Score display modes.
    assert ir.display_scores([2.0, 4.0, 6.0], "norm01") == ["0.000", "0.500", "1.000"]
    assert ir.display_scores([2.0, 4.0, 6.0], "norm0100") == ["0.0", "50.0", "100.0"]
    assert ir.display_scores([5.0, 5.0], "norm01") == ["1.000", "1.000"]
    assert ir.display_scores([3.14159], "raw") == ["3.14"]
    assert ir.display_scores([1.0, 2.0], "none") is None

    # Deterministic shuffling keeps (doc, score) tuples intact.
    pairs = [("d1", 4.0), ("d2", 3.0), ("d3", 2.0), ("d4", 1.0)]
    shuffled = ir.shuffle_pairs(pairs, seed=7)
    assert shuffled == ir.shuffle_pairs(pairs, seed=7)
    assert sorted(shuffled) == sorted(pairs)

    # Prompt construction.
    docs = ["first passage", "second passage"]
    prompt = ir.build_prompt("toy query", docs, ["3.21", "1.05"], "bright", 2)
    assert ir.RETRIEVER_SENTENCE in prompt
    assert "[1]. first passage BM25 score: 3.21" in prompt
    assert "a list of 2 ids" in prompt
    vanilla = ir.build_prompt("toy query", docs, None, "r2med", 2)
    assert ir.RETRIEVER_SENTENCE not in vanilla
    assert "BM25 score:" not in vanilla

    # Ranking parsing and repair.
    ranking, repairs = ir.parse_ranking("```json\n[2, 1]\n```", n=2, topk=2)
    assert (ranking, repairs) == ([2, 1], [])
    ranking, repairs = ir.parse_ranking("I think [2, 2, 9, 1] json follows", n=3, topk=3)
    assert ranking == [2, 1, 3]
    assert repairs == ["dup", "oob", "fill"]
    ranking, repairs = ir.parse_ranking("no list here", n=4, topk=2)
    assert (ranking, repairs) == ([1, 2], ["no_parse"])

    # NDCG.
    assert ir.ndcg_at_k(["d1", "d9"], {"d1": 1}, 10) == 1.0
    got = ir.ndcg_at_k(["d9", "d1"], {"d1": 1}, 10)
    assert abs(got - 1.0 / math.log2(3)) < 1e-12, got

    # Run-file evaluation.
    run_path = tmp / "run.txt"
    run_path.write_text("q1 Q0 d1 1 1.000000 tag\n")
    qrels_path = tmp / "qrels.tsv"
    qrels_path.write_text("q1\td1\t1\n")
    mean, per_query = ir.evaluate_run_files(run_path, qrels_path, 10)
    assert mean == 1.0 and per_query == {"q1": 1.0}

    print("insertrank_py smoke test passed")


if __name__ == "__main__":
    main()
