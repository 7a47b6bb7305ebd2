"""Entity mention extraction with negation, temporality, and experiencer modifiers.

A gazetteer supplies disease/drug phrases; a trigger lexicon supplies the
modifier cues (negation before/after the mention, pseudo-negations, history
and family-member words, scope terminators). Mentions are resolved per
sentence, classified into current/past/family sections, and folded into a
six-list keyword set from which synthetic enrichment tokens are emitted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import CriteriaLists
from .errors import DataError

# Token boundaries for all matching: alphanumeric runs, underscores and
# hyphens act as separators. Prevents "dm" matching inside "admission".
TOKEN_RE = re.compile(r"[^\W_]+")


class EntityType(Enum):
    DISEASE = "disease"
    DRUG = "drug"


class Temporality(Enum):
    CURRENT = "current"
    HISTORICAL = "historical"


class Experiencer(Enum):
    PATIENT = "patient"
    FAMILY = "family"


class TriggerCategory(Enum):
    NEG_PRE = "NegPre"
    NEG_POST = "NegPost"
    PSEUDO_NEG = "PseudoNeg"
    HISTORICAL = "Historical"
    FAMILY = "Family"
    TERMINATION = "Termination"


# Categories whose scope runs from the trigger toward the sentence end.
_FORWARD = {TriggerCategory.NEG_PRE, TriggerCategory.HISTORICAL, TriggerCategory.FAMILY}


@dataclass(frozen=True)
class Mention:
    surface: str
    span: tuple[int, int]
    entity_type: EntityType
    negated: bool = False
    temporality: Temporality = Temporality.CURRENT
    experiencer: Experiencer = Experiencer.PATIENT

    @property
    def phrase(self) -> str:
        """Lowercased, whitespace-normalized form of the surface text."""
        return " ".join(TOKEN_RE.findall(self.surface.lower()))


@dataclass(frozen=True)
class KeywordSet:
    """The six entity lists: {affirmative, negated} x {current, past, family}."""

    a_cmc: tuple[str, ...] = ()
    a_pmc: tuple[str, ...] = ()
    a_fmh: tuple[str, ...] = ()
    n_cmc: tuple[str, ...] = ()
    n_pmc: tuple[str, ...] = ()
    n_fmh: tuple[str, ...] = ()

    FIELD_ORDER = ("a_cmc", "a_pmc", "a_fmh", "n_cmc", "n_pmc", "n_fmh")

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in self.FIELD_ORDER}

    @classmethod
    def from_dict(cls, d: dict) -> "KeywordSet":
        return cls(**{name: tuple(d.get(name, ())) for name in cls.FIELD_ORDER})

    def restrict(self, flags: set[str]) -> "KeywordSet":
        """Keep only the lists for the enabled section flags {c, p, f}."""
        keep = {
            "a_cmc": "c", "n_cmc": "c",
            "a_pmc": "p", "n_pmc": "p",
            "a_fmh": "f", "n_fmh": "f",
        }
        return KeywordSet(**{
            name: getattr(self, name) if keep[name] in flags else ()
            for name in self.FIELD_ORDER
        })


def _token_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0).lower(), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]


class Gazetteer:
    """Phrase -> entity type lookup with leftmost-longest matching."""

    def __init__(self, entries: list[tuple[str, EntityType]]):
        self.entries: dict[tuple[str, ...], EntityType] = {}
        self.max_len = 0
        for phrase, etype in entries:
            if not phrase or phrase != phrase.lower():
                raise DataError(f"gazetteer phrase must be lowercase and non-empty: {phrase!r}")
            key = tuple(TOKEN_RE.findall(phrase))
            if not key:
                raise DataError(f"gazetteer phrase has no tokens: {phrase!r}")
            if key in self.entries:
                raise DataError(f"duplicate gazetteer phrase: {phrase!r}")
            self.entries[key] = etype
            self.max_len = max(self.max_len, len(key))

    def __len__(self):
        return len(self.entries)


class TriggerLexicon:
    def __init__(self, entries: list[tuple[str, TriggerCategory]]):
        seen = set()
        self.entries: list[tuple[tuple[str, ...], TriggerCategory]] = []
        self.max_len = 0
        for phrase, category in entries:
            if phrase != phrase.lower():
                raise DataError(f"trigger phrase must be lowercase: {phrase!r}")
            key = tuple(TOKEN_RE.findall(phrase))
            if not key:
                raise DataError(f"trigger phrase has no tokens: {phrase!r}")
            if (key, category) in seen:
                raise DataError(f"duplicate trigger entry: {phrase!r} {category.value}")
            seen.add((key, category))
            self.entries.append((key, category))
            self.max_len = max(self.max_len, len(key))
        self.by_key: dict[tuple[str, ...], list[TriggerCategory]] = {}
        for key, category in self.entries:
            self.by_key.setdefault(key, []).append(category)


def load_gazetteer(path: str | Path | None = None) -> Gazetteer:
    """Read a gazetteer TSV (phrase<TAB>disease|drug); None loads the shipped file."""
    text = _read_data_file(path, "gazetteer.tsv")
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"gazetteer line {lineno}: expected phrase<TAB>type, got {line!r}")
        phrase, etype = parts
        try:
            entries.append((phrase.strip(), EntityType(etype.strip().lower())))
        except ValueError:
            raise DataError(f"gazetteer line {lineno}: unknown entity type {etype!r}") from None
    return Gazetteer(entries)


def load_triggers(path: str | Path | None = None) -> TriggerLexicon:
    """Read a trigger TSV (phrase<TAB>category); None loads the shipped file."""
    text = _read_data_file(path, "triggers.tsv")
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"trigger line {lineno}: expected phrase<TAB>category, got {line!r}")
        phrase, category = parts
        try:
            entries.append((phrase.strip(), TriggerCategory(category.strip())))
        except ValueError:
            raise DataError(f"trigger line {lineno}: unknown category {category!r}") from None
    return TriggerLexicon(entries)


def load_abbreviations(path: str | Path | None = None) -> frozenset[str]:
    text = _read_data_file(path, "abbreviations.txt")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def _read_data_file(path: str | Path | None, default_name: str) -> str:
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    return resources.files("trialmatch").joinpath(f"data/{default_name}").read_text("utf-8")


_SENT_END = re.compile(r"[.?!]+")


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    """Split text on terminal punctuation followed by a capital or digit.

    A period after a known abbreviation (dx., Mr., ...) never splits.
    """
    if abbreviations is None:
        abbreviations = load_abbreviations()
    sentences = []
    start = 0
    for m in _SENT_END.finditer(text):
        rest = text[m.end():]
        if not rest or not rest[0].isspace():
            continue  # mid-token punctuation or end of text
        nxt = rest.lstrip()
        if not nxt or not (nxt[0].isupper() or nxt[0].isdigit()):
            continue
        before = re.search(r"(\S+)$", text[: m.start()])
        if before:
            word = before.group(1).strip("(\"'[").lower()
            if word in abbreviations:
                continue
        piece = text[start : m.end()].strip()
        if piece:
            sentences.append(piece)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def extract_mentions(sentence: str, gazetteer: Gazetteer) -> list[Mention]:
    """Leftmost-longest gazetteer matches on token boundaries, modifiers defaulted."""
    spans = _token_spans(sentence)
    mentions = []
    i = 0
    while i < len(spans):
        matched = 0
        for length in range(min(gazetteer.max_len, len(spans) - i), 0, -1):
            key = tuple(tok for tok, _, _ in spans[i : i + length])
            etype = gazetteer.entries.get(key)
            if etype is not None:
                start = spans[i][1]
                end = spans[i + length - 1][2]
                mentions.append(Mention(sentence[start:end], (start, end), etype))
                matched = length
                break
        i += matched or 1
    return mentions


@dataclass(frozen=True)
class _Trigger:
    start: int
    end: int
    category: TriggerCategory


def find_triggers(sentence: str, triggers: TriggerLexicon) -> list[_Trigger]:
    """All trigger matches, with spans strictly contained in longer trigger
    spans dropped. Containment is what makes pseudo-negations block their
    embedded negation cue and "family history" absorb the bare "history"."""
    spans = _token_spans(sentence)
    found = []
    for i in range(len(spans)):
        for length in range(1, min(triggers.max_len, len(spans) - i) + 1):
            key = tuple(tok for tok, _, _ in spans[i : i + length])
            for category in triggers.by_key.get(key, ()):
                found.append(_Trigger(spans[i][1], spans[i + length - 1][2], category))
    kept = [
        t for t in found
        if not any(
            o.start <= t.start and t.end <= o.end and (o.end - o.start) > (t.end - t.start)
            for o in found
        )
    ]
    kept.sort(key=lambda t: (t.start, -t.end, t.category.value))
    return kept


def _scope(trigger: _Trigger, all_triggers: list[_Trigger], sentence_len: int) -> tuple[int, int]:
    cutters = [
        t for t in all_triggers
        if t is not trigger and t.category in (TriggerCategory.TERMINATION, trigger.category)
    ]
    if trigger.category in _FORWARD:
        end = sentence_len
        for t in cutters:
            if t.start >= trigger.end:
                end = min(end, t.start)
        return trigger.end, end
    start = 0
    for t in cutters:
        if t.end <= trigger.start:
            start = max(start, t.end)
    return start, trigger.start


def apply_context(
    sentence: str, mentions: list[Mention], triggers: TriggerLexicon
) -> list[Mention]:
    """Resolve negation/temporality/experiencer for mentions of one sentence."""
    found = find_triggers(sentence, triggers)
    resolved = []
    for mention in mentions:
        m = mention
        for trigger in found:
            if trigger.category in (TriggerCategory.PSEUDO_NEG, TriggerCategory.TERMINATION):
                continue
            lo, hi = _scope(trigger, found, len(sentence))
            if not (lo <= m.span[0] and m.span[1] <= hi):
                continue
            if trigger.category in (TriggerCategory.NEG_PRE, TriggerCategory.NEG_POST):
                m = replace(m, negated=True)
            elif trigger.category is TriggerCategory.HISTORICAL:
                m = replace(m, temporality=Temporality.HISTORICAL)
            elif trigger.category is TriggerCategory.FAMILY:
                m = replace(m, experiencer=Experiencer.FAMILY)
        resolved.append(m)
    return resolved


def classify_section(mention: Mention) -> str:
    """cmc/pmc/fmh routing; family experiencer outranks temporality."""
    if mention.experiencer is Experiencer.FAMILY:
        return "fmh"
    if mention.temporality is Temporality.HISTORICAL:
        return "pmc"
    return "cmc"


def swap_exclusion_polarity(mentions: list[Mention]) -> list[Mention]:
    """Flip the negation flag of every mention; exclusion criteria state what
    must NOT hold, so their entities enter the keyword set inverted."""
    return [replace(m, negated=not m.negated) for m in mentions]


def build_keyword_set(
    inclusion_mentions: list[Mention], exclusion_mentions: list[Mention]
) -> KeywordSet:
    lists: dict[str, list[str]] = {name: [] for name in KeywordSet.FIELD_ORDER}
    for m in list(inclusion_mentions) + swap_exclusion_polarity(list(exclusion_mentions)):
        name = f"{'n' if m.negated else 'a'}_{classify_section(m)}"
        phrase = m.phrase
        if phrase and phrase not in lists[name]:
            lists[name].append(phrase)
    return KeywordSet(**{name: tuple(v) for name, v in lists.items()})


def emit_enrichment_tokens(ks: KeywordSet) -> list[str]:
    """One synthetic token per keyword: {section}_{no_}?{words_joined_by_underscores}."""
    tokens = []
    for name in KeywordSet.FIELD_ORDER:
        polarity, section = name.split("_")
        prefix = section + "_" + ("no_" if polarity == "n" else "")
        for phrase in getattr(ks, name):
            tokens.append(prefix + phrase.replace(" ", "_"))
    return tokens


def annotate_sentences(
    sentences: list[str], gazetteer: Gazetteer, triggers: TriggerLexicon
) -> list[Mention]:
    mentions = []
    for sentence in sentences:
        found = extract_mentions(sentence, gazetteer)
        mentions.extend(apply_context(sentence, found, triggers))
    return mentions


def keywords_for_criteria(
    criteria: CriteriaLists,
    gazetteer: Gazetteer,
    triggers: TriggerLexicon,
    abbreviations: frozenset[str],
) -> KeywordSet:
    """Keyword set for a trial document: entities from its criteria lists,
    with the exclusion side polarity-swapped."""
    inc, exc = [], []
    for item in criteria.inclusion:
        inc.extend(annotate_sentences(split_sentences(item, abbreviations), gazetteer, triggers))
    for item in criteria.exclusion:
        exc.extend(annotate_sentences(split_sentences(item, abbreviations), gazetteer, triggers))
    return build_keyword_set(inc, exc)


def keywords_for_text(
    text: str,
    gazetteer: Gazetteer,
    triggers: TriggerLexicon,
    abbreviations: frozenset[str],
) -> KeywordSet:
    """Keyword set for free text (patient descriptions): no polarity swap."""
    mentions = annotate_sentences(split_sentences(text, abbreviations), gazetteer, triggers)
    return build_keyword_set(mentions, [])
