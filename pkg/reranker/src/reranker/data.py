"""File interfaces shared with the retrieval pipeline.

Everything the trainer consumes arrives as files: JSON-lines pair files
(topic_id, topic_text, doc_id, doc_text, label, phase), JSON-lines document
texts (doc_id, topical_text, criteria_text), JSON-lines topic records
(topic_id, text), TREC-format run files, and qrels. Nothing here imports
the retrieval package; the formats are the contract.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path


class DataError(Exception):
    """Malformed or inconsistent input file (exit code 1)."""


class ConfigError(Exception):
    """Invalid invocation or option value (exit code 2)."""


PHASES = ("topical", "criteria")


@dataclass(frozen=True)
class TrainingPair:
    topic_id: str
    query: str
    d_pos: str
    d_neg: str
    phase: str

    def __post_init__(self):
        if self.phase not in PHASES:
            raise DataError(f"unknown phase {self.phase!r}")
        if not self.query or not self.d_pos or not self.d_neg:
            raise DataError("training pair texts must be non-empty")


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    rank: int
    score: float
    tag: str


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} line {lineno}: {exc}") from None
    return records


def load_labeled_docs(path: str | Path) -> list[dict]:
    """Per-document labeled records from the pipeline's pair export.

    Each record carries topic_id, topic_text, doc_id, doc_text, label
    (pos/neg), and phase. Pairs are formed here by crossing positives with
    negatives of the same topic.
    """
    records = read_jsonl(path)
    for i, r in enumerate(records, start=1):
        missing = {"topic_id", "topic_text", "doc_id", "doc_text", "label", "phase"} - set(r)
        if missing:
            raise DataError(f"{path} record {i}: missing fields {sorted(missing)}")
        if r["label"] not in ("pos", "neg"):
            raise DataError(f"{path} record {i}: label must be pos or neg")
        if r["phase"] not in PHASES:
            raise DataError(f"{path} record {i}: unknown phase {r['phase']!r}")
    return records


def build_pairs(records: list[dict], phase: str) -> list[TrainingPair]:
    """Cross each topic's positives with its negatives."""
    if phase not in PHASES:
        raise ConfigError(f"unknown phase {phase!r}")
    by_topic: dict[str, dict[str, list[dict]]] = {}
    for r in records:
        if r["phase"] != phase:
            continue
        sides = by_topic.setdefault(r["topic_id"], {"pos": [], "neg": []})
        sides[r["label"]].append(r)
    pairs = []
    for topic_id in sorted(by_topic):
        sides = by_topic[topic_id]
        for p in sides["pos"]:
            for n in sides["neg"]:
                pairs.append(TrainingPair(
                    topic_id=topic_id,
                    query=p["topic_text"],
                    d_pos=p["doc_text"],
                    d_neg=n["doc_text"],
                    phase=phase,
                ))
    return pairs


def load_doc_texts(path: str | Path) -> dict[str, dict[str, str]]:
    """doc_id -> {topical_text, criteria_text} from the document export."""
    out = {}
    for i, r in enumerate(read_jsonl(path), start=1):
        missing = {"doc_id", "topical_text", "criteria_text"} - set(r)
        if missing:
            raise DataError(f"{path} record {i}: missing fields {sorted(missing)}")
        if r["doc_id"] in out:
            raise DataError(f"{path} record {i}: duplicate doc id {r['doc_id']}")
        out[r["doc_id"]] = {
            "topical_text": r["topical_text"],
            "criteria_text": r["criteria_text"],
        }
    return out


def load_topic_texts(path: str | Path) -> dict[str, str]:
    """topic_id -> text from the pipeline's topic annotation export."""
    out = {}
    for i, r in enumerate(read_jsonl(path), start=1):
        if "topic_id" not in r or "text" not in r:
            raise DataError(f"{path} record {i}: expected topic_id and text fields")
        if r["topic_id"] in out:
            raise DataError(f"{path} record {i}: duplicate topic id {r['topic_id']}")
        out[r["topic_id"]] = r["text"]
    return out


def read_run(path: str | Path) -> dict[str, list[RunEntry]]:
    run: dict[str, list[RunEntry]] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DataError(f"{path} line {lineno}: expected 6 whitespace-separated fields")
        topic_id, q0, doc_id, rank_text, score_text, tag = parts
        if q0 != "Q0":
            raise DataError(f"{path} line {lineno}: second field must be Q0")
        try:
            rank, score = int(rank_text), float(score_text)
        except ValueError:
            raise DataError(f"{path} line {lineno}: bad rank or score") from None
        entries = run.setdefault(topic_id, [])
        if rank != len(entries) + 1:
            raise DataError(f"{path} line {lineno}: rank {rank} out of sequence")
        if entries and score > entries[-1].score:
            raise DataError(f"{path} line {lineno}: score increases within topic")
        if any(e.doc_id == doc_id for e in entries):
            raise DataError(f"{path} line {lineno}: duplicate doc {doc_id}")
        entries.append(RunEntry(doc_id, rank, score, tag))
    return run


def write_run(run: dict[str, list[RunEntry]], path: str | Path) -> None:
    lines = []
    for topic_id in run:
        for e in run[topic_id]:
            lines.append(f"{topic_id} Q0 {e.doc_id} {e.rank} {e.score:.6f} {e.tag}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_qrels(path: str | Path) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise DataError(f"{path} line {lineno}: expected `topic 0 doc grade`")
        topic_id, _, doc_id, grade_text = parts
        try:
            grade = int(grade_text)
        except ValueError:
            raise DataError(f"{path} line {lineno}: bad grade") from None
        if not 0 <= grade <= 2:
            raise DataError(f"{path} line {lineno}: grade outside 0..2")
        out.setdefault(topic_id, {})[doc_id] = grade
    return out


def split_topics(topic_ids: list[str], seed: int = 13) -> tuple[list[str], list[str], list[str]]:
    """Deterministic 60/10/30 train/dev/test split over topic ids."""
    ids = sorted(set(topic_ids))
    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    n_train = round(n * 0.6)
    n_dev = round(n * 0.1)
    train, dev, test = ids[:n_train], ids[n_train:n_train + n_dev], ids[n_train + n_dev:]
    return sorted(train), sorted(dev), sorted(test)


def precision_at_k(ranked_doc_ids: list[str], judged: dict[str, int],
                   k: int = 10, threshold: int = 2) -> float:
    hits = sum(1 for d in ranked_doc_ids[:k] if judged.get(d, 0) >= threshold)
    return hits / k
