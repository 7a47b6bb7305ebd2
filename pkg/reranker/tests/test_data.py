"""File interfaces: JSONL loaders, run and qrels parsing, pair building."""

import pytest

from reranker import (
    ConfigError,
    DataError,
    RunEntry,
    TrainingPair,
    build_pairs,
    load_doc_texts,
    load_labeled_docs,
    load_topic_texts,
    precision_at_k,
    read_qrels,
    read_run,
    write_run,
)
from reranker.data import read_jsonl


def _record(**overrides):
    base = {
        "topic_id": "1",
        "topic_text": "adult with condition",
        "doc_id": "D1",
        "doc_text": "condition trial",
        "label": "pos",
        "phase": "topical",
    }
    base.update(overrides)
    return base


def _write_jsonl(path, records):
    import json

    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def test_run_round_trip_formats_scores(tmp_path):
    run = {
        "1": [RunEntry("D2", 1, 2.5, "t"), RunEntry("D1", 2, 1.0, "t")],
        "2": [RunEntry("D3", 1, 0.25, "t")],
    }
    path = tmp_path / "run.txt"
    write_run(run, path)
    text = path.read_text("utf-8")
    assert text == ("1 Q0 D2 1 2.500000 t\n"
                    "1 Q0 D1 2 1.000000 t\n"
                    "2 Q0 D3 1 0.250000 t\n")
    assert read_run(path) == {
        "1": [RunEntry("D2", 1, 2.5, "t"), RunEntry("D1", 2, 1.0, "t")],
        "2": [RunEntry("D3", 1, 0.25, "t")],
    }


@pytest.mark.parametrize(
    "line",
    [
        "1 Q0 D1 2 1.000000 t",  # rank out of sequence
        "1 QX D1 1 1.000000 t",  # wrong literal
        "1 Q0 D1 1 1.000000",  # missing tag
        "1 Q0 D1 one 1.000000 t",  # bad rank
    ],
)
def test_read_run_rejects_malformed_lines(tmp_path, line):
    path = tmp_path / "run.txt"
    path.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_run(path)


def test_read_run_rejects_increasing_scores_and_duplicates(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("1 Q0 D1 1 1.000000 t\n1 Q0 D2 2 2.000000 t\n", encoding="utf-8")
    with pytest.raises(DataError, match="line 2"):
        read_run(path)
    path.write_text("1 Q0 D1 1 2.000000 t\n1 Q0 D1 2 1.000000 t\n", encoding="utf-8")
    with pytest.raises(DataError, match="duplicate"):
        read_run(path)


def test_read_qrels_validates_grades(tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("1 0 D1 2\n1 0 D2 0\n2 0 D1 1\n", encoding="utf-8")
    assert read_qrels(path) == {"1": {"D1": 2, "D2": 0}, "2": {"D1": 1}}
    path.write_text("1 0 D1 3\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_qrels(path)
    path.write_text("1 0 D1\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_qrels(path)


def test_read_jsonl_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"ok": 1}\n{broken\n', encoding="utf-8")
    with pytest.raises(DataError, match="line 2"):
        read_jsonl(path)


def test_load_labeled_docs_validates_fields(tmp_path):
    path = tmp_path / "pairs.jsonl"
    _write_jsonl(path, [_record()])
    assert load_labeled_docs(path) == [_record()]
    bad = _record()
    del bad["doc_text"]
    _write_jsonl(path, [bad])
    with pytest.raises(DataError, match="doc_text"):
        load_labeled_docs(path)
    _write_jsonl(path, [_record(label="maybe")])
    with pytest.raises(DataError, match="label"):
        load_labeled_docs(path)
    _write_jsonl(path, [_record(phase="warmup")])
    with pytest.raises(DataError, match="phase"):
        load_labeled_docs(path)


def test_build_pairs_crosses_within_topic_only():
    records = [
        _record(topic_id="1", doc_id="A", label="pos", doc_text="pa"),
        _record(topic_id="1", doc_id="B", label="pos", doc_text="pb"),
        _record(topic_id="1", doc_id="C", label="neg", doc_text="nc"),
        _record(topic_id="1", doc_id="D", label="neg", doc_text="nd"),
        _record(topic_id="2", doc_id="E", label="pos", doc_text="pe"),
        _record(topic_id="2", doc_id="F", label="neg", doc_text="nf"),
        _record(topic_id="3", doc_id="G", label="pos", doc_text="pg", phase="criteria"),
    ]
    pairs = build_pairs(records, "topical")
    assert len(pairs) == 2 * 2 + 1
    assert all(p.phase == "topical" for p in pairs)
    crossed = {(p.d_pos, p.d_neg) for p in pairs}
    assert ("pa", "nf") not in crossed
    assert ("pe", "nf") in crossed
    assert build_pairs(records, "criteria") == []
    with pytest.raises(ConfigError):
        build_pairs(records, "warmup")


def test_training_pair_validation():
    with pytest.raises(DataError):
        TrainingPair("1", "", "p", "n", "topical")
    with pytest.raises(DataError):
        TrainingPair("1", "q", "p", "n", "warmup")


def test_load_doc_texts_rejects_duplicates_and_gaps(tmp_path):
    path = tmp_path / "docs.jsonl"
    _write_jsonl(path, [
        {"doc_id": "D1", "topical_text": "a", "criteria_text": "b"},
        {"doc_id": "D1", "topical_text": "c", "criteria_text": "d"},
    ])
    with pytest.raises(DataError, match="duplicate"):
        load_doc_texts(path)
    _write_jsonl(path, [{"doc_id": "D1", "topical_text": "a"}])
    with pytest.raises(DataError, match="criteria_text"):
        load_doc_texts(path)


def test_load_topic_texts(tmp_path):
    path = tmp_path / "topics.jsonl"
    _write_jsonl(path, [
        {"topic_id": "1", "text": "first", "age_years": 40.0},
        {"topic_id": "2", "text": "second"},
    ])
    assert load_topic_texts(path) == {"1": "first", "2": "second"}
    _write_jsonl(path, [{"topic_id": "1"}])
    with pytest.raises(DataError):
        load_topic_texts(path)
    _write_jsonl(path, [{"topic_id": "1", "text": "a"}, {"topic_id": "1", "text": "b"}])
    with pytest.raises(DataError, match="duplicate"):
        load_topic_texts(path)


def test_precision_denominator_is_always_k():
    judged = {"D1": 2, "D2": 1, "D3": 2}
    assert precision_at_k(["D1", "D2", "D3"], judged, k=10) == 0.2
    assert precision_at_k(["D1", "D3"], judged, k=2) == 1.0
    assert precision_at_k([], judged, k=10) == 0.0
    assert precision_at_k(["D2"], judged, k=1, threshold=1) == 1.0
