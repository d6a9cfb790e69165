import json

import pytest

from phi_sentinel.patterns import (
    BUILTIN_LIBRARY_VERSION,
    PatternEntry,
    PatternLibrary,
    builtin_library,
    library_from_dict,
    library_to_dict,
    load_library,
)
from phi_sentinel.screening import match_value

from pattern_cases import CONFORMANCE

REQUIRED_CATEGORIES = {"A", "B", "C", "D/E", "F", "G", "H/I/J", "N", "O", "R"}


@pytest.fixture(scope="module")
def lib():
    return builtin_library()


def test_builtin_version(lib):
    assert lib.version == BUILTIN_LIBRARY_VERSION


def test_ids_unique(lib):
    ids = [e.id for e in lib.entries]
    assert len(ids) == len(set(ids))


def test_required_categories_covered(lib):
    assert REQUIRED_CATEGORIES <= lib.categories()


def test_every_entry_has_conformance_table(lib):
    assert set(CONFORMANCE) == {e.id for e in lib.entries}
    for cases in CONFORMANCE.values():
        assert len(cases["positive"]) >= 5
        assert len(cases["negative"]) >= 5


@pytest.mark.parametrize("entry_id", sorted(CONFORMANCE))
def test_entry_conformance(lib, entry_id):
    entry = lib.entry(entry_id)
    for token in CONFORMANCE[entry_id]["positive"]:
        assert match_value(token, entry), f"{entry_id} should match {token!r}"
    for token in CONFORMANCE[entry_id]["negative"]:
        assert not match_value(token, entry), f"{entry_id} should not match {token!r}"


def test_keyword_entries_carry_lowercase_keywords(lib):
    for entry in lib.entries:
        if entry.match_mode == "keyword-set":
            assert entry.keywords
            assert all(k == k.lower() for k in entry.keywords)


def test_duplicate_ids_rejected():
    e = {"id": "x", "category": "A", "mode": "full", "expression": "a"}
    with pytest.raises(ValueError):
        library_from_dict({"version": "v", "entries": [e, dict(e)]})


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        PatternEntry(id="x", phi_category="A", match_mode="fuzzy",
                     description="", expression="a")


def test_keyword_entry_requires_keywords():
    with pytest.raises(ValueError):
        PatternEntry(id="x", phi_category="A", match_mode="keyword-set", description="")


def test_json_round_trip(lib, tmp_path):
    doc = library_to_dict(lib)
    clone = library_from_dict(doc)
    tokens = [t for cases in CONFORMANCE.values() for t in cases["positive"]]
    for entry, centry in zip(lib.entries, clone.entries):
        for token in tokens:
            assert match_value(token, entry) == match_value(token, centry)

    path = tmp_path / "library.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    loaded = load_library(path)
    assert loaded.version == lib.version
    assert [e.id for e in loaded.entries] == [e.id for e in lib.entries]


def test_match_modes():
    full = PatternEntry(id="f", phi_category="A", match_mode="full",
                        description="", expression=r"\d+")
    sub = PatternEntry(id="s", phi_category="A", match_mode="substring",
                       description="", expression=r"\d+")
    kw = PatternEntry(id="k", phi_category="A", match_mode="keyword-set",
                      description="", keywords=["red fox"])
    assert match_value("123", full) and not match_value("a123", full)
    assert match_value(" 42 ", full)  # full mode trims the token
    assert match_value("a123", sub)
    assert match_value("a Red  Fox ran", kw)
    assert not match_value("redfox", kw)
