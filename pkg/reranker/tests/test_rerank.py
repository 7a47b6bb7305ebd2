"""Run reordering invariants: the top-k block permutes, nothing else moves."""

import pytest
import torch

from reranker import (
    ConfigError,
    DataError,
    PairScorer,
    RerankerState,
    RunEntry,
    SIDECAR_HEADER,
    render_sidecar,
    rerank_run,
)
from reranker.train import reorder_by_scores
from synth import make_fixture


def stamped_state(phase, seed=0):
    return RerankerState(model=PairScorer(seed=seed), phase=phase)


def constant_state(phase, seed=0):
    state = stamped_state(phase, seed)
    with torch.no_grad():
        state.model.head.weight.zero_()
        state.model.head.bias.zero_()
    return state


@pytest.fixture(scope="module")
def fixture():
    return make_fixture(n_topics=2, grades_per_topic=(18, 18, 24), seed=33)


@pytest.fixture(scope="module")
def states():
    return stamped_state("topical", seed=3), stamped_state("criteria", seed=4)


def test_top_k_multiset_invariant_and_tail_order(fixture, states):
    topics, docs, qrels, run = fixture
    out, sidecar = rerank_run(*states, run, topics, docs, k=50)
    assert set(out) == set(run)
    for topic_id, entries in run.items():
        before_top = [e.doc_id for e in entries[:50]]
        before_tail = [e.doc_id for e in entries[50:]]
        after = out[topic_id]
        assert sorted(d.doc_id for d in after[:50]) == sorted(before_top)
        assert [d.doc_id for d in after[50:]] == before_tail
        assert [d.rank for d in after] == list(range(1, len(entries) + 1))
        scores = [d.score for d in after]
        assert all(a >= b for a, b in zip(scores, scores[1:]))


def test_tail_scores_shift_below_new_top_block(fixture, states):
    topics, docs, qrels, run = fixture
    out, _ = rerank_run(*states, run, topics, docs, k=50)
    for topic_id, entries in run.items():
        after = out[topic_id]
        min_top = min(d.score for d in after[:50])
        tail_before = [e.score for e in entries[50:]]
        tail_after = [d.score for d in after[50:]]
        assert max(tail_after) == pytest.approx(min_top - 1.0)
        diffs_before = [a - b for a, b in zip(tail_before, tail_before[1:])]
        diffs_after = [a - b for a, b in zip(tail_after, tail_after[1:])]
        assert diffs_after == pytest.approx(diffs_before)


def test_k_equal_one_is_an_order_no_op(fixture, states):
    topics, docs, qrels, run = fixture
    out, sidecar = rerank_run(*states, run, topics, docs, k=1)
    for topic_id, entries in run.items():
        assert [d.doc_id for d in out[topic_id]] == [e.doc_id for e in entries]
    assert len(sidecar) == len(run)


def test_constant_scorers_preserve_original_order(fixture):
    topics, docs, qrels, run = fixture
    out, _ = rerank_run(
        constant_state("topical"), constant_state("criteria"), run, topics, docs, k=50
    )
    for topic_id, entries in run.items():
        assert [d.doc_id for d in out[topic_id]] == [e.doc_id for e in entries]


def test_k_beyond_run_depth_rescores_everything(fixture, states):
    topics, docs, qrels, run = fixture
    out, sidecar = rerank_run(*states, run, topics, docs, k=500)
    for topic_id, entries in run.items():
        assert sorted(d.doc_id for d in out[topic_id]) == sorted(e.doc_id for e in entries)
    assert len(sidecar) == sum(len(e) for e in run.values())


def test_deterministic_across_calls(fixture, states):
    topics, docs, qrels, run = fixture
    first = rerank_run(*states, run, topics, docs, k=50)
    second = rerank_run(*states, run, topics, docs, k=50)
    assert first == second


def test_fusion_weight_one_orders_by_stage_one(fixture, states):
    topics, docs, qrels, run = fixture
    _, sidecar = rerank_run(*states, run, topics, docs, k=50)
    fused, _ = rerank_run(*states, run, topics, docs, k=50, fusion_weight=1.0)
    for topic_id, entries in run.items():
        rows = [(d, s1) for t, d, s1, _ in sidecar if t == topic_id]
        by_stage1 = reorder_by_scores([d for d, _ in rows], [s for _, s in rows])
        assert [d.doc_id for d in fused[topic_id][:50]] == by_stage1


def test_sidecar_rows_and_rendering(fixture, states):
    topics, docs, qrels, run = fixture
    _, sidecar = rerank_run(*states, run, topics, docs, k=50)
    assert len(sidecar) == 50 * len(run)
    text = render_sidecar(sidecar)
    lines = text.splitlines()
    assert lines[0] == SIDECAR_HEADER
    assert len(lines) == len(sidecar) + 1
    topic_id, doc_id, s1, s2 = lines[1].split("\t")
    assert (topic_id, doc_id) == (sidecar[0][0], sidecar[0][1])
    assert s1 == f"{sidecar[0][2]:.6f}"
    assert s2 == f"{sidecar[0][3]:.6f}"


def test_missing_document_text_fails_fast(fixture, states):
    topics, docs, qrels, run = fixture
    short = dict(docs)
    victim = run[next(iter(run))][0].doc_id
    del short[victim]
    with pytest.raises(DataError):
        rerank_run(*states, run, topics, short, k=50)


def test_missing_topic_text_fails_fast(fixture, states):
    topics, docs, qrels, run = fixture
    with pytest.raises(DataError):
        rerank_run(*states, run, {}, docs, k=50)


def test_invalid_arguments_are_config_errors(fixture, states):
    topics, docs, qrels, run = fixture
    state_topical, state_criteria = states
    with pytest.raises(ConfigError):
        rerank_run(state_topical, state_criteria, run, topics, docs, k=0)
    with pytest.raises(ConfigError):
        rerank_run(state_topical, state_criteria, run, topics, docs, k=50, fusion_weight=1.5)
    with pytest.raises(ConfigError):
        rerank_run(state_criteria, state_criteria, run, topics, docs, k=50)
    with pytest.raises(ConfigError):
        rerank_run(state_topical, state_topical, run, topics, docs, k=50)
