"""The Safe-Harbor pattern library: named regex/keyword entries mapped to PHI
categories, plus JSON load/save of the same shape.

Every entry carries a conformance table in the test suite.  Deliberate design
points:

* the alphanumeric-identifier entry requires at least one digit and one
  letter, so plain uppercase words ("FEMALE") do not false-positive;
* the generic digit-run identifiers require >= 6 digits after separator
  stripping, keeping ages and dosages out;
* date matching is assembled from the per-layout expressions shared with the
  ingest module instead of a single opaque mega-expression, so each layout is
  testable on its own.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .ingest import DATETIME_LAYOUTS

__all__ = [
    "PatternEntry",
    "PatternLibrary",
    "builtin_library",
    "load_library",
    "library_from_dict",
    "library_to_dict",
    "BUILTIN_LIBRARY_VERSION",
]

BUILTIN_LIBRARY_VERSION = "builtin-1"

MATCH_MODES = ("full", "substring", "keyword-set")


@dataclass
class PatternEntry:
    """One screening rule: a regex (full or substring) or a keyword set."""

    id: str
    phi_category: str
    match_mode: str
    description: str
    expression: Optional[str] = None
    keywords: Optional[list] = None
    _compiled: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.match_mode not in MATCH_MODES:
            raise ValueError(f"unknown match mode {self.match_mode!r}")
        if self.match_mode == "keyword-set":
            if not self.keywords:
                raise ValueError(f"entry {self.id}: keyword-set needs keywords")
            self.keywords = [k.lower() for k in self.keywords]
            self._compiled = [
                re.compile(r"\b" + re.escape(k).replace(r"\ ", r"\s+") + r"\b", re.IGNORECASE)
                for k in self.keywords
            ]
        else:
            if not self.expression:
                raise ValueError(f"entry {self.id}: regex modes need an expression")
            self._compiled = re.compile(self.expression)

    def matches(self, value: str) -> bool:
        """Does a single non-null raw token satisfy this entry?"""
        if self.match_mode == "full":
            return self._compiled.fullmatch(value.strip()) is not None
        if self.match_mode == "substring":
            return self._compiled.search(value) is not None
        return any(rx.search(value) for rx in self._compiled)


@dataclass
class PatternLibrary:
    entries: list
    version: str

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("pattern ids must be unique")

    def entry(self, entry_id: str) -> PatternEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    def categories(self) -> set:
        return {e.phi_category for e in self.entries}


# Street/road designators used for whole-word address screening.
ADDRESS_KEYWORDS = [
    "street", "avenue", "road", "boulevard", "drive", "trail", "way", "lane",
    "ave", "blvd", "st", "rd", "dr", "trl", "wy", "ln", "court", "ct", "place",
    "plc", "terrace", "ter", "highway", "freeway", "expressway", "motorway",
    "byway", "alley", "bay", "gardens", "gate", "grove", "heights",
    "highlands", "mews", "pathway", "vale", "view", "walk", "close", "cove",
    "circle", "crescent", "square", "loop", "hill", "causeway", "canyon",
    "parkway", "pkwy", "esplanade", "approach", "parade", "park", "plaza",
    "promenade", "quay", "bypass", "city",
]

RACE_KEYWORDS = [
    "white", "caucasian", "american indian", "alaska native", "asian",
    "black", "african american", "native hawaiian", "pacific islander",
]

GENDER_KEYWORDS = ["male", "female"]

ETHNICITY_KEYWORDS = ["hispanic", "latino", "latina"]

# A single capitalized name word: O'Neil, A'Bsfs, Absssfs, A-Bsfsfs, ...
_NAME_WORD = r"[A-Z](?:'?[A-Za-z]+)?(?:-[A-Z]?'?[A-Za-z]+)*"

# The per-layout sources carry named groups for parsing; the screening
# alternation only needs the shapes.
_DATE_EXPRESSION = "(?i:" + "|".join(
    "(?:" + re.sub(r"\(\?P<\w+>", "(?:", src) + ")" for _, src in DATETIME_LAYOUTS
) + ")"

_IP_OCTET = r"(?:25[0-5]|2[0-4][0-9]|[01]?[0-9][0-9]?)"

_DOB_SEP = r"[-./ ]"

_BUILTIN = [
    {
        "id": "name-word",
        "category": "A",
        "mode": "full",
        "expression": rf"{_NAME_WORD}(?: {_NAME_WORD}){{0,3}}",
        "description": "capitalized personal-name words, with ' and - joiners",
    },
    {
        "id": "name-title",
        "category": "A",
        "mode": "full",
        "expression": rf"(?:Dr|Mr|Mrs|Ms|Miss|Sir|Madam)\.? {_NAME_WORD}(?: {_NAME_WORD}){{0,3}}",
        "description": "salutation followed by name words",
    },
    {
        "id": "name-middle-initial",
        "category": "A",
        "mode": "full",
        "expression": rf"{_NAME_WORD} [A-Z]\.? {_NAME_WORD}",
        "description": "first + middle initial + last",
    },
    {
        "id": "postal-code",
        "category": "B",
        "mode": "full",
        "expression": r"\d{5}(-\d{4})?",
        "description": "5-digit ZIP or ZIP+4",
    },
    {
        "id": "address-keywords",
        "category": "B",
        "mode": "keyword-set",
        "keywords": ADDRESS_KEYWORDS,
        "description": "street-address designator words",
    },
    {
        "id": "date-any",
        "category": "C",
        "mode": "full",
        "expression": _DATE_EXPRESSION,
        "description": "dates in the accepted layouts, incl. month-name forms",
    },
    {
        "id": "dob-numeric",
        "category": "C",
        "mode": "full",
        "expression": (
            rf"\d{{1,2}}{_DOB_SEP}\d{{1,2}}{_DOB_SEP}\d{{2}}(?:\d{{2}})?"
            rf"|\d{{4}}{_DOB_SEP}\d{{1,2}}{_DOB_SEP}\d{{1,2}}"
        ),
        "description": "loose numeric date triplets (date-of-birth shapes)",
    },
    {
        "id": "age-keywords",
        "category": "C",
        "mode": "substring",
        "expression": r"(?i)\b(?:age[sd]?|y(?:ea)?rs?\s?old|y\.?\s?o\.?)\b",
        "description": "age wording: 'age', 'years old', 'y.o.'",
    },
    {
        "id": "id-digit-run",
        "category": "D/E",
        "mode": "full",
        "expression": r"(?:[()/\- ]*\d){6,}[()/\- ]*",
        "description": "phone/fax/SSN/MRN/account digit runs (>=6 digits, ()-/ separators)",
    },
    {
        "id": "ssn",
        "category": "G",
        "mode": "full",
        "expression": r"\d{3}-\d{2}-\d{4}|\d{9}",
        "description": "social security number, dashed or plain",
    },
    {
        "id": "id-alnum",
        "category": "H/I/J",
        "mode": "full",
        "expression": r"(?=[A-Z0-9/\-]*\d)(?=[A-Z0-9/\-]*[A-Z])[A-Z0-9/\-]{5,}",
        "description": "alphanumeric MRN/beneficiary/account codes (letters + digits)",
    },
    {
        "id": "email",
        "category": "F",
        "mode": "full",
        "expression": r"[A-Za-z0-9_+.\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)+",
        "description": "email address",
    },
    {
        "id": "url",
        "category": "N",
        "mode": "full",
        "expression": r"(?i:(?:https?://)?(?:[A-Za-z0-9\-]+\.)+[A-Za-z]{2,}(?::\d+)?(?:/[^\s]*)?)",
        "description": "web URL or bare domain with alphabetic TLD",
    },
    {
        "id": "ip-address",
        "category": "O",
        "mode": "full",
        "expression": rf"(?:{_IP_OCTET}\.){{3}}{_IP_OCTET}",
        "description": "dotted-quad IPv4, octets 0-255",
    },
    {
        "id": "race-keywords",
        "category": "R",
        "mode": "keyword-set",
        "keywords": RACE_KEYWORDS,
        "description": "race designations",
    },
    {
        "id": "gender-keywords",
        "category": "R",
        "mode": "keyword-set",
        "keywords": GENDER_KEYWORDS,
        "description": "sex/gender words",
    },
    {
        "id": "ethnicity-keywords",
        "category": "R",
        "mode": "keyword-set",
        "keywords": ETHNICITY_KEYWORDS,
        "description": "ethnicity designations",
    },
]


def _entry_from_dict(d: dict) -> PatternEntry:
    return PatternEntry(
        id=d["id"],
        phi_category=d["category"],
        match_mode=d["mode"],
        description=d.get("description", ""),
        expression=d.get("expression"),
        keywords=list(d["keywords"]) if "keywords" in d else None,
    )


def library_from_dict(doc: dict) -> PatternLibrary:
    return PatternLibrary(
        entries=[_entry_from_dict(d) for d in doc["entries"]],
        version=doc.get("version", "unversioned"),
    )


def library_to_dict(library: PatternLibrary) -> dict:
    entries = []
    for e in library.entries:
        d = {"id": e.id, "category": e.phi_category, "mode": e.match_mode}
        if e.match_mode == "keyword-set":
            d["keywords"] = list(e.keywords)
        else:
            d["expression"] = e.expression
        d["description"] = e.description
        entries.append(d)
    return {"version": library.version, "entries": entries}


def builtin_library() -> PatternLibrary:
    """The embedded default library (same shape as the JSON document form)."""
    return library_from_dict({"version": BUILTIN_LIBRARY_VERSION, "entries": _BUILTIN})


def load_library(path) -> PatternLibrary:
    """Load a pattern library from a JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        return library_from_dict(json.load(fh))
