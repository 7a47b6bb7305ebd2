"""Two-stage reordering of a first-stage run.

Stage one rescores each topic's top-k by the topical model over the
descriptive document text; stage two reorders that block by the criteria
model over the eligibility text. Documents past rank k keep their relative
order, with scores shifted to sit below the new top block so the run stays
monotone. Only the top-k doc set moves; ids never enter or leave it.
"""

from __future__ import annotations

from .data import ConfigError, DataError, RunEntry
from .train import RerankerState, reorder_by_scores

SIDECAR_HEADER = "topic_id\tdoc_id\tstage1_score\tstage2_score"


def _doc_text(docs: dict[str, dict[str, str]], doc_id: str, field: str) -> str:
    entry = docs.get(doc_id)
    if entry is None:
        raise DataError(f"doc {doc_id} has no text in the document export")
    return entry[field]


def rerank_run(
    state_topical: RerankerState,
    state_criteria: RerankerState,
    run: dict[str, list[RunEntry]],
    topics: dict[str, str],
    docs: dict[str, dict[str, str]],
    k: int = 50,
    tag: str = "rerank",
    fusion_weight: float | None = None,
) -> tuple[dict[str, list[RunEntry]], list[tuple[str, str, float, float]]]:
    """Returns the reordered run and sidecar rows for every rescored doc.

    With `fusion_weight` unset the stages apply sequentially. Setting it to
    w in [0,1] switches to a single reorder by w*stage1 + (1-w)*stage2.
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    if fusion_weight is not None and not 0.0 <= fusion_weight <= 1.0:
        raise ConfigError("fusion weight must lie in [0, 1]")
    if state_topical.phase != "topical":
        raise ConfigError(f"stage-1 state has phase {state_topical.phase!r}, want 'topical'")
    if state_criteria.phase != "criteria":
        raise ConfigError(f"stage-2 state has phase {state_criteria.phase!r}, want 'criteria'")

    out: dict[str, list[RunEntry]] = {}
    sidecar: list[tuple[str, str, float, float]] = []
    for topic_id, entries in run.items():
        text = topics.get(topic_id)
        if text is None:
            raise DataError(f"run topic {topic_id} has no text in the topic export")
        top, tail = entries[:k], entries[k:]
        doc_ids = [e.doc_id for e in top]

        s1 = state_topical.model.score_texts(
            text, [_doc_text(docs, d, "topical_text") for d in doc_ids]
        )
        stage1_by_doc = dict(zip(doc_ids, s1))
        stage1_order = reorder_by_scores(doc_ids, s1)

        s2 = state_criteria.model.score_texts(
            text, [_doc_text(docs, d, "criteria_text") for d in stage1_order]
        )
        stage2_by_doc = dict(zip(stage1_order, s2))

        if fusion_weight is None:
            final_order = reorder_by_scores(stage1_order, s2)
            final_score = stage2_by_doc
        else:
            fused = {
                d: fusion_weight * stage1_by_doc[d] + (1 - fusion_weight) * stage2_by_doc[d]
                for d in doc_ids
            }
            final_order = reorder_by_scores(doc_ids, [fused[d] for d in doc_ids])
            final_score = fused

        new_entries = [
            RunEntry(d, i + 1, final_score[d], tag) for i, d in enumerate(final_order)
        ]
        if tail:
            min_top = min(e.score for e in new_entries)
            shift = (min_top - 1.0) - max(e.score for e in tail)
            for offset, e in enumerate(tail):
                new_entries.append(
                    RunEntry(e.doc_id, len(top) + offset + 1, e.score + shift, tag)
                )
        out[topic_id] = new_entries
        for d in doc_ids:
            sidecar.append((topic_id, d, stage1_by_doc[d], stage2_by_doc[d]))
    return out, sidecar


def render_sidecar(rows: list[tuple[str, str, float, float]]) -> str:
    lines = [SIDECAR_HEADER]
    for topic_id, doc_id, s1, s2 in rows:
        lines.append(f"{topic_id}\t{doc_id}\t{s1:.6f}\t{s2:.6f}")
    return "\n".join(lines) + "\n"
