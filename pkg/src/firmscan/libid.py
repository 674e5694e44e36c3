"""Reused-library identification by file name against a term dictionary."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import PurePosixPath

from .errors import DictionaryFormatError

__all__ = ["CATEGORIES", "TermEntry", "TermDictionary", "LibraryOccurrence",
           "load_term_dictionary", "default_dictionary", "name_candidates", "find_libraries"]

CATEGORIES = ("cmd", "builtin", "unix_tool", "open_source")

_shared_object = re.compile(r"^(lib(.+?))\.so(?:\.\d+)*$")


@dataclass(frozen=True)
class TermEntry:
    canonical: str
    category: str


class TermDictionary:
    """Alias index: lowercase alias -> (canonical name, category)."""

    def __init__(self, entries=None):
        self.entries = dict(entries or {})

    @classmethod
    def from_mapping(cls, doc: dict) -> "TermDictionary":
        if not isinstance(doc, dict):
            raise DictionaryFormatError("dictionary must be a JSON object of canonical -> {category, aliases}")
        index = {}
        for canonical, body in doc.items():
            if not isinstance(body, dict):
                raise DictionaryFormatError(f"{canonical!r}: entry must be an object")
            category = body.get("category")
            if category not in CATEGORIES:
                raise DictionaryFormatError(f"{canonical!r}: unknown category {category!r}")
            aliases = body.get("aliases", [])
            if not isinstance(aliases, list):
                raise DictionaryFormatError(f"{canonical!r}: aliases must be a list")
            entry = TermEntry(canonical, category)
            for alias in [canonical, *aliases]:
                key = str(alias).lower()
                owner = index.get(key)
                if owner is not None and owner.canonical != canonical:
                    raise DictionaryFormatError(
                        f"alias {key!r} claimed by both {owner.canonical!r} and {canonical!r}")
                index[key] = entry
        return cls(index)

    def lookup(self, alias: str):
        return self.entries.get(alias.lower())

    def __contains__(self, alias):
        return alias.lower() in self.entries

    def __len__(self):
        return len(self.entries)

    def canonicals(self) -> list:
        return sorted({e.canonical for e in self.entries.values()})


def load_term_dictionary(path) -> TermDictionary:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DictionaryFormatError(f"{path}: invalid JSON: {exc}") from exc
    return TermDictionary.from_mapping(doc)


def default_dictionary() -> TermDictionary:
    """The bundled seed dictionary."""
    text = resources.files("firmscan.data").joinpath("terms.json").read_text(encoding="utf-8")
    return TermDictionary.from_mapping(json.loads(text))


@dataclass(frozen=True)
class LibraryOccurrence:
    firmware_checksum: str
    canonical: str
    category: str
    file_path: str
    matched_alias: str

    def to_dict(self) -> dict:
        return {
            "firmware_checksum": self.firmware_checksum,
            "canonical": self.canonical,
            "category": self.category,
            "file_path": self.file_path,
            "matched_alias": self.matched_alias,
        }


def name_candidates(basename: str) -> list:
    """Normalised lookup keys for a file name, most specific first.

    ``libz.so.1`` yields ``libz.so.1``, ``libz``, ``z``; ``busybox.bak`` yields
    ``busybox.bak``, ``busybox``.
    """
    name = basename.lower()
    out = [name]
    m = _shared_object.match(name)
    if m:
        out += [m.group(1), m.group(2)]
    elif "." in name.strip("."):
        out.append(name.rsplit(".", 1)[0])
    seen = set()
    return [c for c in out if c and not (c in seen or seen.add(c))]


def find_libraries(tree, dictionary: TermDictionary, firmware_checksum: str) -> list:
    """One occurrence per file whose normalised name is a dictionary alias."""
    out = []
    for f in tree.files:
        basename = PurePosixPath(f.path).name
        for key in name_candidates(basename):
            entry = dictionary.lookup(key)
            if entry is not None:
                out.append(LibraryOccurrence(firmware_checksum, entry.canonical, entry.category, f.path, key))
                break
    return out
