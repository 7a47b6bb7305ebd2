"""Graded-relevance evaluation: TREC run/qrels I/O, nDCG/P/RR, t-test, reports.

Grades are 0 (not relevant), 1 (topically relevant but excluded by criteria),
2 (eligible). nDCG uses the raw grade as gain with a log2(i+1) discount and
treats unjudged documents as grade 0. P@k and RR binarize at a configurable
threshold, by default grade >= 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from scipy.stats import t as _t_dist

from .errors import ConfigError, DataError

GRADES = (0, 1, 2)


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    rank: int
    score: float
    tag: str


Run = dict[str, list[RunEntry]]
Judgments = dict[str, int]  # doc_id -> grade, for one topic


@dataclass(frozen=True)
class Qrels:
    judgments: dict[tuple[str, str], int]

    def topics(self) -> list[str]:
        return sorted({t for t, _ in self.judgments}, key=topic_sort_key)

    def for_topic(self, topic_id: str) -> Judgments:
        return {
            doc: grade for (t, doc), grade in self.judgments.items() if t == topic_id
        }


def topic_sort_key(topic_id: str):
    return (0, int(topic_id), "") if topic_id.isdigit() else (1, 0, topic_id)


def read_qrels(path: str | Path) -> Qrels:
    judgments: dict[tuple[str, str], int] = {}
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
            raise DataError(f"{path} line {lineno}: grade {grade_text!r} is not an integer") from None
        if grade not in GRADES:
            raise DataError(f"{path} line {lineno}: grade {grade} outside 0..2")
        judgments[(topic_id, doc_id)] = grade
    return Qrels(judgments)


def read_run(path: str | Path) -> Run:
    run: Run = {}
    seen_docs: dict[str, set[str]] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DataError(f"{path} line {lineno}: expected `topic Q0 doc rank score tag`")
        topic_id, _, doc_id, rank_text, score_text, tag = parts
        try:
            rank, score = int(rank_text), float(score_text)
        except ValueError:
            raise DataError(f"{path} line {lineno}: bad rank/score") from None
        entries = run.setdefault(topic_id, [])
        docs = seen_docs.setdefault(topic_id, set())
        if doc_id in docs:
            raise DataError(f"{path} line {lineno}: duplicate doc {doc_id} for topic {topic_id}")
        docs.add(doc_id)
        if rank != len(entries) + 1:
            raise DataError(
                f"{path} line {lineno}: rank {rank} breaks the contiguous 1..n sequence"
            )
        if entries and score > entries[-1].score:
            raise DataError(f"{path} line {lineno}: score increases with rank")
        entries.append(RunEntry(doc_id, rank, score, tag))
    return run


def format_score(score: float) -> str:
    return f"{score:.6f}"


def write_run(run: Run, path: str | Path) -> None:
    """Emit TREC run lines; writing then reading a canonical file round-trips."""
    lines = []
    for topic_id, entries in run.items():
        for e in entries:
            lines.append(f"{topic_id} Q0 {e.doc_id} {e.rank} {format_score(e.score)} {e.tag}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def ranking_from_scores(scored: list[tuple[str, float]], tag: str) -> list[RunEntry]:
    return [RunEntry(doc_id, i + 1, s, tag) for i, (doc_id, s) in enumerate(scored)]


def ndcg_at_k(ranked_doc_ids: list[str], judgments: Judgments, k: int) -> float:
    if k < 1:
        raise ConfigError(f"metric cutoff must be >= 1, got {k}")
    dcg = 0.0
    for i, doc_id in enumerate(ranked_doc_ids[:k]):
        dcg += judgments.get(doc_id, 0) / math.log2(i + 2)
    idcg = 0.0
    for i, grade in enumerate(sorted(judgments.values(), reverse=True)[:k]):
        idcg += grade / math.log2(i + 2)
    return dcg / idcg if idcg > 0 else 0.0


def precision_at_k(
    ranked_doc_ids: list[str], judgments: Judgments, k: int, threshold: int = 2
) -> float:
    if k < 1:
        raise ConfigError(f"metric cutoff must be >= 1, got {k}")
    hits = sum(1 for doc_id in ranked_doc_ids[:k] if judgments.get(doc_id, 0) >= threshold)
    return hits / k


def reciprocal_rank(ranked_doc_ids: list[str], judgments: Judgments, threshold: int = 2) -> float:
    for i, doc_id in enumerate(ranked_doc_ids):
        if judgments.get(doc_id, 0) >= threshold:
            return 1.0 / (i + 1)
    return 0.0


def parse_metric(name: str) -> tuple[str, int | None]:
    """'ndcg@5' -> ('ndcg', 5); 'p@10' -> ('p', 10); 'rr' -> ('rr', None)."""
    lowered = name.strip().lower()
    if lowered == "rr":
        return ("rr", None)
    kind, sep, depth = lowered.partition("@")
    if sep and kind in ("ndcg", "p") and depth.isdigit() and int(depth) >= 1:
        return (kind, int(depth))
    raise ConfigError(f"unknown metric {name!r} (expected ndcg@K, p@K, or rr)")


def metric_value(
    metric: str, ranked_doc_ids: list[str], judgments: Judgments, threshold: int = 2
) -> float:
    kind, depth = parse_metric(metric)
    if kind == "ndcg":
        return ndcg_at_k(ranked_doc_ids, judgments, depth)
    if kind == "p":
        return precision_at_k(ranked_doc_ids, judgments, depth, threshold)
    return reciprocal_rank(ranked_doc_ids, judgments, threshold)


def evaluate_run(
    run: Run, qrels: Qrels, metrics: list[str], threshold: int = 2
) -> tuple[dict[str, dict[str, float]], dict[str, float]]:
    """Per-topic metric table and unweighted means over the judged topics.

    Topics judged in the qrels but missing from the run score 0 everywhere;
    run-only topics are ignored.
    """
    for m in metrics:
        parse_metric(m)
    per_topic: dict[str, dict[str, float]] = {}
    for topic_id in qrels.topics():
        judgments = qrels.for_topic(topic_id)
        ranked = [e.doc_id for e in run.get(topic_id, [])]
        per_topic[topic_id] = {
            m: metric_value(m, ranked, judgments, threshold) for m in metrics
        }
    n = len(per_topic)
    means = {
        m: (sum(row[m] for row in per_topic.values()) / n if n else 0.0) for m in metrics
    }
    return per_topic, means


def paired_t_test(per_topic_a: list[float], per_topic_b: list[float]) -> float:
    """Two-sided paired t-test p-value, with degenerate-case conventions:
    all-zero differences give 1.0, zero-variance nonzero-mean differences 0.0."""
    if len(per_topic_a) != len(per_topic_b):
        raise DataError("paired t-test needs equal-length observation lists")
    n = len(per_topic_a)
    if n < 2:
        raise DataError("paired t-test needs at least 2 paired observations")
    diffs = [a - b for a, b in zip(per_topic_a, per_topic_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t_stat = mean / math.sqrt(var / n)
    return float(2.0 * _t_dist.sf(abs(t_stat), n - 1))


def count_at_cutoffs(run: Run, qrels: Qrels, max_k: int) -> list[tuple[int, float, float]]:
    """(k, mean eligible count, mean excluded count) for k = 1..max_k."""
    if max_k < 1:
        raise ConfigError(f"max_k must be >= 1, got {max_k}")
    topics = qrels.topics()
    rows = []
    for k in range(1, max_k + 1):
        eligible = excluded = 0
        for topic_id in topics:
            judgments = qrels.for_topic(topic_id)
            for e in run.get(topic_id, [])[:k]:
                grade = judgments.get(e.doc_id, 0)
                if grade == 2:
                    eligible += 1
                elif grade == 1:
                    excluded += 1
        n = len(topics)
        rows.append((k, eligible / n if n else 0.0, excluded / n if n else 0.0))
    return rows


def render_report_tsv(
    per_topic: dict[str, dict[str, float]], means: dict[str, float], metrics: list[str]
) -> str:
    lines = ["topic\t" + "\t".join(metrics)]
    for topic_id, row in per_topic.items():
        lines.append(topic_id + "\t" + "\t".join(format_score(row[m]) for m in metrics))
    lines.append("mean\t" + "\t".join(format_score(means[m]) for m in metrics))
    return "\n".join(lines) + "\n"


def render_report_json(
    per_topic: dict[str, dict[str, float]], means: dict[str, float]
) -> str:
    return json.dumps({"topics": per_topic, "mean": means}, sort_keys=True, indent=2) + "\n"


def render_counts_csv(rows: list[tuple[int, float, float]]) -> str:
    lines = ["k,mean_eligible,mean_excluded"]
    for k, eligible, excluded in rows:
        lines.append(f"{k},{format_score(eligible)},{format_score(excluded)}")
    return "\n".join(lines) + "\n"
