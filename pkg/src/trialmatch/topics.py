"""Patient description parsing: topic files, demographics, enriched queries."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .annotate import (
    TOKEN_RE,
    Gazetteer,
    KeywordSet,
    TriggerCategory,
    TriggerLexicon,
    emit_enrichment_tokens,
    find_triggers,
    keywords_for_text,
    split_sentences,
    _scope,
    _token_spans,
)
from .corpus import Gender
from .errors import DataError
from .index import tokenize


@dataclass(frozen=True)
class PatientTopic:
    topic_id: str
    text: str
    age_years: float | None = None
    gender: Gender | None = None
    smoker: bool | None = None
    drinker: bool | None = None
    keywords: KeywordSet = field(default_factory=KeywordSet)

    def __post_init__(self):
        if not self.topic_id:
            raise DataError("topic has no id")


def parse_topics(path: str | Path) -> list[tuple[str, str]]:
    """Read topics from XML (`<topic number=...>` elements) or TSV (id<TAB>text).

    Order is preserved; duplicate topic ids are a format error.
    """
    raw = Path(path).read_bytes()
    stripped = raw.lstrip()
    if stripped.startswith(b"<"):
        records = _parse_topics_xml(raw, str(path))
    else:
        records = _parse_topics_tsv(raw.decode("utf-8"), str(path))
    seen = set()
    for topic_id, _ in records:
        if topic_id in seen:
            raise DataError(f"{path}: duplicate topic id {topic_id}")
        seen.add(topic_id)
    return records


def _parse_topics_xml(raw: bytes, source: str) -> list[tuple[str, str]]:
    try:
        root = ET.fromstring(raw)
    except ET.ParseError as exc:
        raise DataError(f"{source}: bad topic XML: {exc}") from exc
    elems = root.iter("topic") if root.tag != "topic" else [root]
    records = []
    for elem in elems:
        topic_id = elem.get("number") or elem.get("id") or ""
        if not topic_id:
            raise DataError(f"{source}: topic element without number/id attribute")
        records.append((topic_id, "".join(elem.itertext()).strip()))
    return records


def _parse_topics_tsv(text: str, source: str) -> list[tuple[str, str]]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise DataError(f"{source} line {lineno}: expected id<TAB>text")
        records.append((parts[0].strip(), parts[1].strip()))
    return records


_AGE_RE = re.compile(
    r"(\d+)\s?-?\s?(years?|yo|y/o|months?|weeks?|days?)(\s?-?\s?old)?", re.IGNORECASE
)
_AGE_UNIT_YEARS = {
    "year": 1.0,
    "yo": 1.0,
    "y/o": 1.0,
    "month": 1.0 / 12.0,
    "week": 7.0 / 365.25,
    "day": 1.0 / 365.25,
}
_PERSON_CUES = {
    "man", "woman", "male", "female", "boy", "girl", "infant", "child",
    "patient", "person", "gentleman", "lady", "adult", "veteran", "baby",
}
_AGE_PREFIX_CUES = {"age", "aged"}

_MALE_CUES = {"man", "male", "he", "him", "his", "himself", "boy", "gentleman", "mr"}
_FEMALE_CUES = {"woman", "female", "she", "her", "hers", "herself", "girl", "lady", "mrs", "ms"}

_SMOKING_PHRASES = ("smoke", "smokes", "smoker", "smoking", "tobacco use")
_DRINKING_PHRASES = ("drink", "drinks", "drinker", "drinking", "alcohol use", "beer", "wine")


def _extract_age(text: str) -> float | None:
    lowered = text.lower()
    for m in _AGE_RE.finditer(lowered):
        unit = m.group(2).rstrip("s")
        value = int(m.group(1)) * _AGE_UNIT_YEARS[unit]
        if not 0 <= value <= 120:
            continue
        if m.group(3):  # "-old" suffix is cue enough
            return value
        before = TOKEN_RE.findall(lowered[: m.start()])
        if before and before[-1] in _AGE_PREFIX_CUES:
            return value
        after = TOKEN_RE.findall(lowered[m.end():])
        if any(tok in _PERSON_CUES for tok in after[:2]):
            return value
    return None


def _extract_gender(text: str) -> Gender | None:
    tokens = TOKEN_RE.findall(text.lower())
    male = sum(1 for t in tokens if t in _MALE_CUES)
    female = sum(1 for t in tokens if t in _FEMALE_CUES)
    if male > female:
        return Gender.MALE
    if female > male:
        return Gender.FEMALE
    return None


def _negated_intervals(sentence: str, triggers: TriggerLexicon) -> list[tuple[int, int]]:
    found = find_triggers(sentence, triggers)
    return [
        _scope(t, found, len(sentence))
        for t in found
        if t.category in (TriggerCategory.NEG_PRE, TriggerCategory.NEG_POST)
    ]


def _lifestyle_status(
    text: str,
    phrases: tuple[str, ...],
    triggers: TriggerLexicon,
    abbreviations: frozenset[str],
) -> bool | None:
    """True on an affirmative phrase match, False when every match sits in a
    negation scope, None without any match."""
    keys = {tuple(TOKEN_RE.findall(p)) for p in phrases}
    max_len = max(len(k) for k in keys)
    status: bool | None = None
    for sentence in split_sentences(text, abbreviations):
        spans = _token_spans(sentence)
        negated = _negated_intervals(sentence, triggers)
        for i in range(len(spans)):
            for length in range(1, min(max_len, len(spans) - i) + 1):
                key = tuple(tok for tok, _, _ in spans[i : i + length])
                if key not in keys:
                    continue
                start, end = spans[i][1], spans[i + length - 1][2]
                in_scope = any(lo <= start and end <= hi for lo, hi in negated)
                if not in_scope:
                    return True
                status = False
    return status


def extract_demographics(
    text: str,
    triggers: TriggerLexicon,
    abbreviations: frozenset[str],
) -> tuple[float | None, Gender | None, bool | None, bool | None]:
    """(age_years, gender, smoker, drinker), any of which may be absent."""
    return (
        _extract_age(text),
        _extract_gender(text),
        _lifestyle_status(text, _SMOKING_PHRASES, triggers, abbreviations),
        _lifestyle_status(text, _DRINKING_PHRASES, triggers, abbreviations),
    )


def build_topic(
    topic_id: str,
    text: str,
    gazetteer: Gazetteer,
    triggers: TriggerLexicon,
    abbreviations: frozenset[str],
) -> PatientTopic:
    age, gender, smoker, drinker = extract_demographics(text, triggers, abbreviations)
    return PatientTopic(
        topic_id=topic_id,
        text=text,
        age_years=age,
        gender=gender,
        smoker=smoker,
        drinker=drinker,
        keywords=keywords_for_text(text, gazetteer, triggers, abbreviations),
    )


def build_query(
    topic: PatientTopic, enrichment: set[str], stopwords: frozenset[str]
) -> list[str]:
    """Tokenized description plus enrichment tokens for the enabled flags.

    Uses the same emitter as document indexing, so query and document
    enrichment vocabularies match exactly.
    """
    return tokenize(topic.text, stopwords) + emit_enrichment_tokens(
        topic.keywords.restrict(enrichment)
    )
