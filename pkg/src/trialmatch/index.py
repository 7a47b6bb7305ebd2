"""Inverted index over configurable trial sections, with three lexical scorers.

Documents are tokenized section by section (in the configured order), the
enrichment tokens for the enabled entity sections are appended verbatim, and
the index stores the statistics all three models need: postings with term
frequencies, document lengths, document/collection frequencies.
"""

from __future__ import annotations

import json
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .annotate import TOKEN_RE, KeywordSet, emit_enrichment_tokens
from .corpus import ClinicalTrial, split_criteria
from .errors import ConfigError, DataError

VALID_SECTIONS = (
    "brief_title",
    "official_title",
    "description",
    "summary",
    "conditions",
    "inclusion",
    "exclusion",
    "criteria",
)

ENRICHMENT_FLAGS = ("c", "p", "f")


class Model(Enum):
    BM25PLUS = "bm25plus"
    TFIDF = "tfidf"
    INEXPB2 = "in_expb2"

    @classmethod
    def parse(cls, name: str) -> "Model":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown scoring model {name!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class SectionConfig:
    """Which trial sections feed the index, and which entity sections enrich it."""

    sections: tuple[str, ...]
    enrichment: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.sections:
            raise ConfigError("section config needs at least one section")
        for s in self.sections:
            if s not in VALID_SECTIONS:
                raise ConfigError(f"unknown section {s!r} (expected one of: {', '.join(VALID_SECTIONS)})")
        if len(set(self.sections)) != len(self.sections):
            raise ConfigError("duplicate section in section config")
        for f in self.enrichment:
            if f not in ENRICHMENT_FLAGS:
                raise ConfigError(f"unknown enrichment flag {f!r} (expected c, p, f)")

    @classmethod
    def make(cls, sections, enrichment="") -> "SectionConfig":
        return cls(tuple(sections), frozenset(enrichment))


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("trialmatch").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def tokenize(text: str, stopwords: frozenset[str]) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop stopwords. Digits stay."""
    return [t for t in TOKEN_RE.findall(text.lower()) if t not in stopwords]


def section_text(trial: ClinicalTrial, section: str) -> str:
    if section == "conditions":
        return " ".join(trial.conditions)
    if section in ("inclusion", "exclusion"):
        lists = split_criteria(trial.criteria_text)
        return " ".join(getattr(lists, section))
    if section == "criteria":
        return trial.criteria_text
    return getattr(trial, section)


def document_tokens(
    trial: ClinicalTrial,
    keywords: KeywordSet,
    cfg: SectionConfig,
    stopwords: frozenset[str],
) -> list[str]:
    """Concatenated tokens of the configured sections, then enrichment tokens.

    Enrichment tokens bypass stopword removal by construction.
    """
    tokens: list[str] = []
    for section in cfg.sections:
        tokens.extend(tokenize(section_text(trial, section), stopwords))
    tokens.extend(emit_enrichment_tokens(keywords.restrict(set(cfg.enrichment))))
    return tokens


class Index:
    """Immutable inverted index with the statistics the scorers need."""

    def __init__(self, doc_ids, doc_len, postings, config: SectionConfig):
        self.doc_ids: tuple[str, ...] = tuple(doc_ids)
        self.doc_len: tuple[int, ...] = tuple(doc_len)
        self.postings: dict[str, tuple[tuple[int, int], ...]] = {
            term: tuple(plist) for term, plist in postings.items()
        }
        self.config = config
        self.n = len(self.doc_ids)
        self.avgdl = sum(self.doc_len) / self.n if self.n else 0.0
        self.df = {term: len(plist) for term, plist in self.postings.items()}
        self.cf = {term: sum(tf for _, tf in plist) for term, plist in self.postings.items()}
        self._tf = [dict() for _ in range(self.n)]
        for term, plist in self.postings.items():
            for ordinal, tf in plist:
                self._tf[ordinal][term] = tf

    def term_frequency(self, term: str, ordinal: int) -> int:
        return self._tf[ordinal].get(term, 0)


def build_index(
    trials: list[tuple[ClinicalTrial, KeywordSet]],
    cfg: SectionConfig,
    stopwords: frozenset[str],
) -> Index:
    doc_ids: list[str] = []
    doc_len: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    seen: set[str] = set()
    for ordinal, (trial, keywords) in enumerate(trials):
        if trial.nct_id in seen:
            raise DataError(f"duplicate doc id {trial.nct_id} in index build")
        seen.add(trial.nct_id)
        tokens = document_tokens(trial, keywords, cfg, stopwords)
        doc_ids.append(trial.nct_id)
        doc_len.append(len(tokens))
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((ordinal, tf))
    return Index(doc_ids, doc_len, postings, cfg)


_K1, _B, _DELTA = 1.5, 0.75, 1.0
_C = 1.0


def _gain(model: Model, index: Index, term: str, qtf: int, ordinal: int) -> float:
    tf = index.term_frequency(term, ordinal)
    if tf == 0:
        return 0.0
    df = index.df[term]
    n = index.n
    if model is Model.BM25PLUS:
        idf = math.log((n + 1) / df)
        dl = index.doc_len[ordinal]
        tf_part = ((_K1 + 1) * tf) / (_K1 * (1 - _B + _B * dl / index.avgdl) + tf) + _DELTA
        return qtf * idf * tf_part
    if model is Model.TFIDF:
        return qtf * tf * math.log(n / df)
    if model is Model.INEXPB2:
        cf = index.cf[term]
        dl = index.doc_len[ordinal]
        tfn = tf * math.log2(1 + _C * index.avgdl / dl)
        n_e = n * (1 - (1 - df / n) ** cf)
        return qtf * ((cf + 1) / (df * (tfn + 1))) * tfn * math.log2((n + 1) / (n_e + 0.5))
    raise ConfigError(f"unknown scoring model {model!r}")


def score(model: Model, index: Index, query: list[str], ordinal: int) -> float:
    """Score one document against the query; query term multiplicity counts."""
    if not 0 <= ordinal < index.n:
        raise DataError(f"doc ordinal {ordinal} out of range")
    return sum(
        _gain(model, index, term, qtf, ordinal)
        for term, qtf in sorted(Counter(query).items())
    )


def search(model: Model, index: Index, query: list[str], k: int) -> list[tuple[str, float]]:
    """Top-k documents with positive scores, ties broken by ascending doc id."""
    if k < 1:
        raise ConfigError(f"retrieval depth k must be >= 1, got {k}")
    candidates: set[int] = set()
    for term in set(query):
        for ordinal, _ in index.postings.get(term, ()):
            candidates.add(ordinal)
    scored = []
    for ordinal in sorted(candidates):
        s = score(model, index, query, ordinal)
        if s > 0:
            scored.append((index.doc_ids[ordinal], s))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


_MAGIC = b"TMIX"
FORMAT_VERSION = 1


def write_index(index: Index, path: str | Path) -> None:
    """Serialize: magic, u32 JSON header length, header, then per term
    (u32 name length, name, u32 df, df x (u32 ordinal, u32 tf)), terms sorted."""
    header = {
        "format_version": FORMAT_VERSION,
        "sections": list(index.config.sections),
        "enrichment": sorted(index.config.enrichment),
        "n": index.n,
        "doc_ids": list(index.doc_ids),
        "doc_len": list(index.doc_len),
        "term_count": len(index.postings),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for term in sorted(index.postings):
            name = term.encode("utf-8")
            plist = index.postings[term]
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            fh.write(struct.pack("<I", len(plist)))
            for ordinal, tf in plist:
                fh.write(struct.pack("<II", ordinal, tf))


def read_index(path: str | Path) -> Index:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ConfigError(f"{path}: not an index file (bad magic)")
    (header_len,) = struct.unpack_from("<I", data, 4)
    try:
        header = json.loads(data[8 : 8 + header_len])
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: corrupt index header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"{path}: index format version {header.get('format_version')} "
            f"not supported (expected {FORMAT_VERSION})"
        )
    cfg = SectionConfig.make(header["sections"], header["enrichment"])
    offset = 8 + header_len
    postings: dict[str, list[tuple[int, int]]] = {}
    for _ in range(header["term_count"]):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        term = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (df,) = struct.unpack_from("<I", data, offset)
        offset += 4
        plist = []
        for _ in range(df):
            ordinal, tf = struct.unpack_from("<II", data, offset)
            offset += 8
            plist.append((ordinal, tf))
        postings[term] = plist
    if offset != len(data):
        raise ConfigError(f"{path}: trailing bytes after postings (corrupt file)")
    return Index(header["doc_ids"], header["doc_len"], postings, cfg)
