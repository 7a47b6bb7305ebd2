"""Tokenizer, section assembly, the three scorers, search, and persistence."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bm25plus_direct, inexpb2_direct, tfidf_direct
from trialmatch.annotate import KeywordSet
from trialmatch.corpus import ClinicalTrial
from trialmatch.errors import ConfigError, DataError
from trialmatch.index import (
    Index,
    Model,
    SectionConfig,
    build_index,
    document_tokens,
    read_index,
    score,
    search,
    section_text,
    tokenize,
    write_index,
)

NO_STOP = frozenset()


def _index_from_tokens(docs: dict[str, list[str]]) -> Index:
    """Build an Index directly from token lists, bypassing XML and sections."""
    from collections import Counter

    doc_ids = sorted(docs)
    doc_len = [len(docs[d]) for d in doc_ids]
    postings = {}
    for ordinal, d in enumerate(doc_ids):
        for term, tf in sorted(Counter(docs[d]).items()):
            postings.setdefault(term, []).append((ordinal, tf))
    cfg = SectionConfig.make(["summary"], "")
    return Index(doc_ids, doc_len, postings, cfg)


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("Tinea-Pedis, CONFIRMED.", NO_STOP) == ["tinea", "pedis", "confirmed"]


def test_tokenize_splits_underscores_keeps_digits():
    assert tokenize("type_2 diabetes 2021", NO_STOP) == ["type", "2", "diabetes", "2021"]


def test_tokenize_removes_stopwords():
    sw = frozenset({"the", "of", "no"})
    assert tokenize("The absence of no pain", sw) == ["absence", "pain"]


def test_section_config_validates_names():
    with pytest.raises(ConfigError):
        SectionConfig.make(["summry"], "")
    with pytest.raises(ConfigError):
        SectionConfig.make(["summary"], "x")
    cfg = SectionConfig.make(["summary", "inclusion"], "cf")
    assert cfg.sections == ("summary", "inclusion")
    assert cfg.enrichment == frozenset({"c", "f"})


def test_section_text_variants():
    trial = ClinicalTrial(
        nct_id="NCTX",
        brief_title="Brief",
        official_title="Official",
        summary="Summary text.",
        description="Description text.",
        conditions=("Asthma", "Wheezing"),
        criteria_text="Inclusion Criteria:\n- adults welcome\nExclusion Criteria:\n- children here",
    )
    assert section_text(trial, "brief_title") == "Brief"
    assert section_text(trial, "conditions") == "Asthma Wheezing"
    assert "adults welcome" in section_text(trial, "inclusion")
    assert "children" not in section_text(trial, "inclusion")
    assert "children here" in section_text(trial, "exclusion")
    assert "Inclusion Criteria" in section_text(trial, "criteria")


def test_document_tokens_appends_enrichment_after_base():
    trial = ClinicalTrial(nct_id="NCTX", summary="asthma study")
    ks = KeywordSet(a_cmc=("asthma",), n_pmc=("cancer",))
    cfg = SectionConfig.make(["summary"], "cp")
    toks = document_tokens(trial, ks, cfg, NO_STOP)
    assert toks == ["asthma", "study", "cmc_asthma", "pmc_no_cancer"]


def test_document_tokens_enrichment_not_stopword_filtered():
    trial = ClinicalTrial(nct_id="NCTX", summary="no pain")
    ks = KeywordSet(n_cmc=("no pain",))
    cfg = SectionConfig.make(["summary"], "c")
    toks = document_tokens(trial, ks, cfg, frozenset({"no"}))
    assert toks == ["pain", "cmc_no_no_pain"]


def test_bm25plus_worked_example():
    # Three docs of equal length, term in two of them, tf=1: the tf part is
    # (2.5*1)/(1.5+1) + 1 = 2 and the idf is ln(4/2), so the score is 2*ln(2).
    idx = _index_from_tokens({"D1": ["a", "b"], "D2": ["a", "c"], "D3": ["d", "e"]})
    got = score(Model.BM25PLUS, idx, ["a"], 0)
    assert got == pytest.approx(2 * math.log(2), abs=1e-12)
    assert got == pytest.approx(1.3862943611198906, abs=1e-12)


def test_tfidf_zero_when_df_equals_n():
    idx = _index_from_tokens({"D1": ["a"], "D2": ["a"]})
    assert score(Model.TFIDF, idx, ["a"], 0) == 0.0


def test_query_term_multiplicity_counts():
    idx = _index_from_tokens({"D1": ["a", "b"], "D2": ["c", "d"]})
    one = score(Model.BM25PLUS, idx, ["a"], 0)
    two = score(Model.BM25PLUS, idx, ["a", "a"], 0)
    assert two == pytest.approx(2 * one, abs=1e-12)


def test_unknown_query_term_scores_zero():
    idx = _index_from_tokens({"D1": ["a"], "D2": ["b"]})
    assert score(Model.BM25PLUS, idx, ["zzz"], 0) == 0.0
    assert score(Model.TFIDF, idx, ["zzz"], 0) == 0.0
    assert score(Model.INEXPB2, idx, ["zzz"], 0) == 0.0


def _random_docs(rng, n_docs=6, vocab="abcdef", max_len=12):
    return {
        f"D{i}": [rng.choice(vocab) for _ in range(rng.randint(1, max_len))]
        for i in range(n_docs)
    }


def test_scorers_match_direct_formulas_on_random_corpora():
    rng = random.Random(7)
    for _ in range(200):
        docs = _random_docs(rng, n_docs=rng.randint(2, 8))
        idx = _index_from_tokens(docs)
        doc_ids = sorted(docs)
        token_lists = [docs[d] for d in doc_ids]
        query = [rng.choice("abcdefzz") for _ in range(rng.randint(1, 5))]
        for ordinal in range(len(doc_ids)):
            assert score(Model.BM25PLUS, idx, query, ordinal) == pytest.approx(
                bm25plus_direct(token_lists, query, ordinal), abs=1e-9)
            assert score(Model.TFIDF, idx, query, ordinal) == pytest.approx(
                tfidf_direct(token_lists, query, ordinal), abs=1e-9)
            assert score(Model.INEXPB2, idx, query, ordinal) == pytest.approx(
                inexpb2_direct(token_lists, query, ordinal), abs=1e-9)


def test_bm25plus_monotone_in_tf():
    # Same length, more matches: score must strictly increase.
    idx = _index_from_tokens({"D1": ["a", "b", "b"], "D2": ["a", "a", "b"], "D3": ["c"]})
    lo = score(Model.BM25PLUS, idx, ["a"], 0)
    hi = score(Model.BM25PLUS, idx, ["a"], 1)
    assert hi > lo > 0


def test_search_excludes_zero_scores_and_breaks_ties_by_doc_id():
    idx = _index_from_tokens({"D1": ["a", "b"], "D2": ["a", "b"], "D3": ["c"]})
    hits = search(Model.BM25PLUS, idx, ["a"], 10)
    assert [d for d, _ in hits] == ["D1", "D2"]
    assert hits[0][1] == hits[1][1]


def test_search_honors_k():
    idx = _index_from_tokens({f"D{i}": ["a"] * (i + 1) + ["x"] * (9 - i) for i in range(9)})
    hits = search(Model.BM25PLUS, idx, ["a"], 3)
    assert len(hits) == 3
    scores = [s for _, s in hits]
    assert scores == sorted(scores, reverse=True)


@given(st.integers(min_value=1, max_value=5))
@settings(max_examples=20, deadline=None)
def test_search_k_prefix_property(k):
    idx = _index_from_tokens({
        "D1": ["a", "a"], "D2": ["a", "b"], "D3": ["b", "b"], "D4": ["a", "c"],
    })
    full = search(Model.BM25PLUS, idx, ["a", "b"], 10)
    assert search(Model.BM25PLUS, idx, ["a", "b"], k) == full[:k]


def test_build_index_counts_and_rejects_duplicates():
    t1 = ClinicalTrial(nct_id="NCT1", summary="asthma asthma care")
    t2 = ClinicalTrial(nct_id="NCT2", summary="asthma cure")
    cfg = SectionConfig.make(["summary"], "")
    idx = build_index([(t1, KeywordSet()), (t2, KeywordSet())], cfg, NO_STOP)
    assert idx.n == 2
    assert idx.df["asthma"] == 2
    assert idx.cf["asthma"] == 3
    assert idx.term_frequency("asthma", 0) == 2
    with pytest.raises(DataError):
        build_index([(t1, KeywordSet()), (t1, KeywordSet())], cfg, NO_STOP)


def test_df_bounded_by_n_and_cf():
    rng = random.Random(3)
    docs = _random_docs(rng, n_docs=8)
    idx = _index_from_tokens(docs)
    for term in idx.df:
        assert 1 <= idx.df[term] <= idx.n
        assert idx.df[term] <= idx.cf[term]


def test_index_round_trip_preserves_everything(tmp_path):
    t1 = ClinicalTrial(nct_id="NCT1", summary="alpha beta beta")
    t2 = ClinicalTrial(nct_id="NCT2", summary="beta gamma")
    cfg = SectionConfig.make(["summary", "conditions"], "cf")
    idx = build_index([(t1, KeywordSet()), (t2, KeywordSet())], cfg, NO_STOP)
    path = tmp_path / "idx.bin"
    write_index(idx, path)
    back = read_index(path)
    assert back.doc_ids == idx.doc_ids
    assert back.doc_len == idx.doc_len
    assert back.postings == idx.postings
    assert back.config == idx.config
    assert back.avgdl == idx.avgdl


def test_index_write_is_deterministic(tmp_path):
    t1 = ClinicalTrial(nct_id="NCT1", summary="zed alpha")
    cfg = SectionConfig.make(["summary"], "")
    idx = build_index([(t1, KeywordSet())], cfg, NO_STOP)
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    write_index(idx, p1)
    write_index(idx, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_read_index_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ConfigError):
        read_index(path)


def test_read_index_rejects_trailing_garbage(tmp_path):
    t1 = ClinicalTrial(nct_id="NCT1", summary="alpha")
    cfg = SectionConfig.make(["summary"], "")
    idx = build_index([(t1, KeywordSet())], cfg, NO_STOP)
    path = tmp_path / "idx.bin"
    write_index(idx, path)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(ConfigError):
        read_index(path)


def test_model_parse():
    assert Model.parse("bm25plus") is Model.BM25PLUS
    assert Model.parse("tfidf") is Model.TFIDF
    assert Model.parse("In_ExpB2") is Model.INEXPB2
    with pytest.raises(ConfigError):
        Model.parse("bm25")
    with pytest.raises(ConfigError):
        search(Model.BM25PLUS, _index_from_tokens({"D1": ["a"]}), ["a"], 0)
