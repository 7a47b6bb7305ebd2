"""Clinical trial document parsing.

Trials arrive as ClinicalTrials.gov-style XML, either one document per file
(directory corpus) or many documents concatenated in a single file. Parsing
extracts the six text sections plus the demographic eligibility fields, and
the eligibility text is split heuristically into inclusion/exclusion
criterion lists.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError, TrialParseError


class Gender(Enum):
    ALL = "All"
    MALE = "Male"
    FEMALE = "Female"


@dataclass(frozen=True)
class ClinicalTrial:
    """One parsed trial document.

    Any text section may be empty; ages are in fractional years.
    """

    nct_id: str
    brief_title: str = ""
    official_title: str = ""
    summary: str = ""
    description: str = ""
    conditions: tuple[str, ...] = ()
    criteria_text: str = ""
    min_age: float | None = None
    max_age: float | None = None
    gender: Gender = Gender.ALL

    def __post_init__(self):
        if not self.nct_id:
            raise DataError("trial document has no nct_id")
        if self.min_age is not None and self.max_age is not None:
            if self.min_age > self.max_age:
                raise DataError(
                    f"{self.nct_id}: min_age {self.min_age} exceeds max_age {self.max_age}"
                )


@dataclass(frozen=True)
class CriteriaLists:
    """Eligibility text split into inclusion and exclusion criterion sentences."""

    inclusion: tuple[str, ...] = ()
    exclusion: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusFields:
    """XML element paths for each trial field.

    Each entry is a tuple of candidate paths tried in order; the first
    element present wins. Paths use ElementTree's limited XPath subset.
    """

    nct_id: tuple[str, ...] = ("id_info/nct_id", "nct_id")
    brief_title: tuple[str, ...] = ("brief_title",)
    official_title: tuple[str, ...] = ("official_title",)
    summary: tuple[str, ...] = ("brief_summary",)
    description: tuple[str, ...] = ("detailed_description",)
    conditions: tuple[str, ...] = ("condition",)
    criteria: tuple[str, ...] = ("eligibility/criteria/textblock", "eligibility/criteria")
    min_age: tuple[str, ...] = ("eligibility/minimum_age",)
    max_age: tuple[str, ...] = ("eligibility/maximum_age",)
    gender: tuple[str, ...] = ("eligibility/gender",)

    @classmethod
    def from_overrides(cls, overrides: dict | None) -> "CorpusFields":
        if not overrides:
            return cls()
        kwargs = {}
        for name, value in overrides.items():
            if name not in cls.__dataclass_fields__:
                raise DataError(f"unknown corpus field {name!r}")
            kwargs[name] = (value,) if isinstance(value, str) else tuple(value)
        return cls(**kwargs)


DEFAULT_FIELDS = CorpusFields()

# Units accepted in age strings, as fractions of a year.
_AGE_UNITS = {
    "year": 1.0,
    "month": 1.0 / 12.0,
    "week": 7.0 / 365.25,
    "day": 1.0 / 365.25,
}
_AGE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(year|month|week|day)s?\s*$", re.IGNORECASE)

_GENDERS = {"male": Gender.MALE, "female": Gender.FEMALE}


def parse_age(text: str | None) -> float | None:
    """Normalize an age string like '18 Years' or '6 Months' to fractional years.

    'N/A', empty, and unrecognized strings all map to None.
    """
    if not text:
        return None
    m = _AGE_RE.match(text)
    if not m:
        return None
    return float(m.group(1)) * _AGE_UNITS[m.group(2).lower()]


def parse_gender(text: str | None) -> Gender:
    if not text:
        return Gender.ALL
    return _GENDERS.get(text.strip().lower(), Gender.ALL)


def _element_text(root: ET.Element, paths: tuple[str, ...]) -> str:
    for path in paths:
        elem = root.find(path)
        if elem is not None:
            return "".join(elem.itertext()).strip()
    return ""


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def trial_from_element(root: ET.Element, fields: CorpusFields = DEFAULT_FIELDS) -> ClinicalTrial:
    """Build a ClinicalTrial from a parsed XML element. Missing sections become empty."""
    nct_id = _element_text(root, fields.nct_id)
    if not nct_id:
        raise DataError("trial document has no nct_id")
    conditions = []
    for path in fields.conditions:
        found = root.findall(path)
        if found:
            conditions = ["".join(e.itertext()).strip() for e in found]
            break
    return ClinicalTrial(
        nct_id=nct_id,
        brief_title=_element_text(root, fields.brief_title),
        official_title=_element_text(root, fields.official_title),
        summary=_element_text(root, fields.summary),
        description=_element_text(root, fields.description),
        conditions=tuple(c for c in conditions if c),
        criteria_text=_element_text(root, fields.criteria),
        min_age=parse_age(_element_text(root, fields.min_age) or None),
        max_age=parse_age(_element_text(root, fields.max_age) or None),
        gender=parse_gender(_element_text(root, fields.gender) or None),
    )


def parse_trial(
    data: bytes, fields: CorpusFields = DEFAULT_FIELDS, source: str = ""
) -> ClinicalTrial:
    """Parse a single XML trial document from raw bytes."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position
        raise TrialParseError(str(exc), source, _byte_offset(data, line, column)) from exc
    return trial_from_element(root, fields)


_XML_DECL_RE = re.compile(rb"<\?xml[^>]*\?>")
_WRAP_OPEN = b"<__corpus__>"


def _iter_document_elements(data: bytes, source: str) -> Iterator[ET.Element]:
    # A corpus file may hold one document or several concatenated ones.
    # Declarations are blanked (offset-preserving) and the remainder wrapped
    # in a synthetic root so both layouts parse the same way.
    blanked = _XML_DECL_RE.sub(lambda m: b" " * len(m.group(0)), data)
    wrapped = _WRAP_OPEN + blanked + b"</__corpus__>"
    try:
        root = ET.fromstring(wrapped)
    except ET.ParseError as exc:
        line, column = exc.position
        offset = _byte_offset(wrapped, line, column) - len(_WRAP_OPEN)
        raise TrialParseError(str(exc), source, max(offset, 0)) from exc
    yield from root


def iter_trials(
    path: str | Path, fields: CorpusFields = DEFAULT_FIELDS
) -> Iterator[ClinicalTrial]:
    """Yield trials from a corpus path: a directory of XML files or one file.

    Files inside a directory are visited in sorted name order so corpus
    traversal is deterministic.
    """
    path = Path(path)
    if path.is_dir():
        files: Iterable[Path] = sorted(p for p in path.iterdir() if p.suffix == ".xml")
    else:
        files = [path]
    for f in files:
        for elem in _iter_document_elements(f.read_bytes(), str(f)):
            try:
                yield trial_from_element(elem, fields)
            except DataError as exc:
                raise DataError(f"{f}: {exc}") from exc


def load_corpus(path: str | Path, fields: CorpusFields = DEFAULT_FIELDS) -> list[ClinicalTrial]:
    """Load a corpus, enforcing nct_id uniqueness."""
    trials = []
    seen: set[str] = set()
    for trial in iter_trials(path, fields):
        if trial.nct_id in seen:
            raise DataError(f"duplicate nct_id {trial.nct_id} in corpus {path}")
        seen.add(trial.nct_id)
        trials.append(trial)
    return trials


_INCLUSION_HEADER = re.compile(r"inclusion\s+criteria\s*:?", re.IGNORECASE)
_EXCLUSION_HEADER = re.compile(r"exclusion\s+criteria\s*:?", re.IGNORECASE)
_BULLET_SPLIT = re.compile(r"(?:^|\s+)[-*•·]\s+")
_LEADING_GLYPHS = re.compile(r"^[-*•·]+\s*")
_ENUMERATION = re.compile(r"^\(?(?:\d{1,3}|[A-Za-z])[.)]\s+")

_MIN_CRITERION_LEN = 3


def _strip_item_prefixes(piece: str) -> str:
    # Loop to a fixpoint so itemization is idempotent ("1. 2. foo" → "foo").
    while True:
        stripped = _ENUMERATION.sub("", _LEADING_GLYPHS.sub("", piece.strip())).strip()
        if stripped == piece:
            return piece
        piece = stripped


def _itemize(region: str) -> list[str]:
    items = []
    for line in region.splitlines():
        for piece in _BULLET_SPLIT.split(line):
            piece = _strip_item_prefixes(piece)
            if len(piece) >= _MIN_CRITERION_LEN:
                items.append(piece)
    return items


def split_criteria(text: str) -> CriteriaLists:
    """Split eligibility text into inclusion and exclusion criterion lists.

    The first inclusion/exclusion header of each kind bounds its region; the
    other header's start terminates it. Text without headers yields two empty
    lists. Header lines themselves are never emitted.
    """
    inc = _INCLUSION_HEADER.search(text)
    exc = _EXCLUSION_HEADER.search(text)
    inc_region = exc_region = ""
    if inc and exc:
        if inc.start() < exc.start():
            inc_region = text[inc.end() : exc.start()]
            exc_region = text[exc.end() :]
        else:
            exc_region = text[exc.end() : inc.start()]
            inc_region = text[inc.end() :]
    elif inc:
        inc_region = text[inc.end() :]
    elif exc:
        exc_region = text[exc.end() :]
    return CriteriaLists(tuple(_itemize(inc_region)), tuple(_itemize(exc_region)))
