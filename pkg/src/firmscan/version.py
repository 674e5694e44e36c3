"""Version strings: recognition in binary headers, ordering and range operators.

The grammar is the library-version regex used by the scanner: a major of up to
four digits, one or two dotted components of up to two digits, an optional
lowercase letter and an optional dash-separated prerelease::

    >>> parse_version("BusyBox v1.21.1 (2013-01-20)")
    Version('1.21.1')
    >>> parse_version("Copyright 2009") is None
    True
    >>> satisfies(Version.parse("1.4.5"), VersionConstraint.parse("~1.4.4"))
    True
"""
from __future__ import annotations

import enum
import functools
import os
import re
from dataclasses import dataclass, field
from typing import Optional, Union

__all__ = [
    "VERSION_REGEX",
    "Version",
    "Op",
    "VersionConstraint",
    "VersionEvidence",
    "parse_version",
    "compare",
    "satisfies",
    "extract_strings",
    "extract_library_version",
    "DEFAULT_REGION_LIMIT",
    "DEFAULT_MIN_LEN",
]

_IDENT = r"(?:0|[1-9]\d*|\d*[a-zA-Z-][0-9a-zA-Z-]*)"

# verbatim grammar; do not "improve" the bounds
VERSION_REGEX = (
    r"(0|[1-9]\d{0,3})(?:\.\d{1,2}){1,2}([a-z])?"
    r"(?:-((?:0|[1-9]\d*|\d*[a-zA-Z-][0-9a-zA-Z-]*)"
    r"(?:\.(?:0|[1-9]\d*|\d*[a-zA-Z-][0-9a-zA-Z-]*))*))?"
)

# the lookbehind keeps "12345.6" from matching as "2345.6"
_search_re = re.compile(r"(?<!\d)" + VERSION_REGEX)
_full_re = re.compile(r"[vV]?" + VERSION_REGEX)
_numeric_ident = re.compile(r"^(?:0|[1-9]\d*)$")

DEFAULT_REGION_LIMIT = 1 << 20
DEFAULT_MIN_LEN = 4

MAX_MAJOR = 9999
MAX_COMPONENT = 99


def _ident_key(ident: str):
    # numeric identifiers sort below alphanumeric ones
    if _numeric_ident.match(ident):
        return (0, int(ident), "")
    return (1, 0, ident)


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class Version:
    """A parsed library version.

    ``numeric`` holds two or three integer components. Equality and hashing
    follow the comparison order, so ``2.33`` equals ``2.33.0``.
    """

    numeric: tuple
    letter: Optional[str] = None
    prerelease: tuple = ()
    raw: str = field(default="", compare=False)

    def __post_init__(self):
        numeric = tuple(int(n) for n in self.numeric)
        object.__setattr__(self, "numeric", numeric)
        object.__setattr__(self, "prerelease", tuple(self.prerelease))
        if not 2 <= len(numeric) <= 3:
            raise ValueError(f"version needs 2 or 3 numeric components, got {numeric!r}")
        if not 0 <= numeric[0] <= MAX_MAJOR:
            raise ValueError(f"major component out of range: {numeric[0]}")
        if any(not 0 <= n <= MAX_COMPONENT for n in numeric[1:]):
            raise ValueError(f"minor/patch component out of range: {numeric!r}")
        if self.letter is not None and not re.fullmatch(r"[a-z]", self.letter):
            raise ValueError(f"letter suffix must be one lowercase letter: {self.letter!r}")
        for ident in self.prerelease:
            if not re.fullmatch(_IDENT, ident):
                raise ValueError(f"bad prerelease identifier: {ident!r}")
        if not self.raw:
            object.__setattr__(self, "raw", str(self))

    @classmethod
    def parse(cls, text: str) -> "Version":
        """Parse ``text`` that must consist of one version (an optional leading ``v`` is allowed)."""
        m = _full_re.fullmatch(text.strip())
        if m is None:
            raise ValueError(f"not a version: {text!r}")
        return _from_match(m)

    @property
    def major(self) -> int:
        return self.numeric[0]

    @property
    def minor(self) -> int:
        return self.numeric[1]

    @property
    def patch(self) -> int:
        return self.numeric[2] if len(self.numeric) > 2 else 0

    def sort_key(self):
        letter_rank = 0 if self.letter is None else ord(self.letter) - ord("a") + 1
        if self.prerelease:
            pre = (0, tuple(_ident_key(i) for i in self.prerelease))
        else:
            pre = (1, ())
        return (self.major, self.minor, self.patch, letter_rank, pre)

    def __eq__(self, other):
        if not isinstance(other, Version):
            return NotImplemented
        return self.sort_key() == other.sort_key()

    def __lt__(self, other):
        if not isinstance(other, Version):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __hash__(self):
        return hash(self.sort_key())

    def __str__(self):
        s = ".".join(str(n) for n in self.numeric)
        if self.letter:
            s += self.letter
        if self.prerelease:
            s += "-" + ".".join(self.prerelease)
        return s

    def __repr__(self):
        return f"Version({str(self)!r})"


def _from_match(m: re.Match) -> Version:
    text = m.group(0)
    base = m.start()
    if m.group(2) is not None:
        numeric_end = m.start(2)
    elif m.group(3) is not None:
        numeric_end = m.start(3) - 1
    else:
        numeric_end = m.end()
    numeric_text = m.string[m.start(1):numeric_end]
    prerelease = tuple(m.group(3).split(".")) if m.group(3) is not None else ()
    raw = text[m.start(1) - base:]
    return Version(
        numeric=tuple(int(p) for p in numeric_text.split(".")),
        letter=m.group(2),
        prerelease=prerelease,
        raw=raw,
    )


def parse_version(text: str) -> Optional[Version]:
    """Return the first version token found in ``text``, or None."""
    m = _search_re.search(text)
    if m is None:
        return None
    return _from_match(m)


def compare(a: Version, b: Version) -> int:
    """Three-way comparison: -1, 0 or 1."""
    ka, kb = a.sort_key(), b.sort_key()
    return (ka > kb) - (ka < kb)


class Op(str, enum.Enum):
    EQ = "eq"
    GE = "ge"
    LE = "le"
    TILDE = "tilde"
    CARET = "caret"


_OP_PREFIXES = [(">=", Op.GE), ("<=", Op.LE), ("==", Op.EQ), ("=", Op.EQ),
                ("~", Op.TILDE), ("^", Op.CARET)]


@dataclass(frozen=True)
class VersionConstraint:
    op: Op
    bound: Version

    @classmethod
    def parse(cls, text: str) -> "VersionConstraint":
        """Parse ``">=1.4.4"``, ``"~1.4.4"``, ``"^1.4"``, ``"=4.0"`` or a bare version."""
        text = text.strip()
        for prefix, op in _OP_PREFIXES:
            if text.startswith(prefix):
                return cls(op, Version.parse(text[len(prefix):]))
        return cls(Op.EQ, Version.parse(text))

    def __str__(self):
        sym = {Op.EQ: "=", Op.GE: ">=", Op.LE: "<=", Op.TILDE: "~", Op.CARET: "^"}[self.op]
        return f"{sym}{self.bound}"


def satisfies(v: Version, c: VersionConstraint) -> bool:
    key, bound = v.sort_key(), c.bound.sort_key()
    op = Op(c.op)
    if op is Op.EQ:
        return key == bound
    if op is Op.GE:
        return key >= bound
    if op is Op.LE:
        return key <= bound
    b = c.bound
    if op is Op.TILDE:
        # upper bounds are plain release keys, so they may exceed the grammar bounds
        upper = (b.major, b.minor + 1, 0, 0, (1, ()))
    else:
        upper = (b.major + 1, 0, 0, 0, (1, ()))
    return bound <= key < upper


@dataclass(frozen=True)
class VersionEvidence:
    """A version token found in a file, with the string that carried it."""

    version: Version
    source_string: str
    byte_offset: int
    occurrence: object = None


_PRINTABLE_CACHE = {}


def _printable_re(min_len: int):
    pat = _PRINTABLE_CACHE.get(min_len)
    if pat is None:
        pat = _PRINTABLE_CACHE[min_len] = re.compile(rb"[\x20-\x7e]{%d,}" % min_len)
    return pat


def extract_strings(data: bytes, region_limit: Optional[int] = None,
                    min_len: int = DEFAULT_MIN_LEN) -> list:
    """Maximal printable-ASCII runs of at least ``min_len`` bytes as ``(offset, text)``.

    Only the first ``region_limit`` bytes are examined (all of them when None).
    """
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    region = data if region_limit is None else data[:region_limit]
    return [(m.start(), m.group().decode("ascii"))
            for m in _printable_re(min_len).finditer(region)]


def _read_region(file: Union[bytes, bytearray, memoryview, str, os.PathLike],
                 region_limit: Optional[int]) -> bytes:
    if isinstance(file, (bytes, bytearray, memoryview)):
        data = bytes(file)
        return data if region_limit is None else data[:region_limit]
    with open(file, "rb") as fh:
        return fh.read() if region_limit is None else fh.read(region_limit)


def extract_library_version(file, term: str, region_limit: Optional[int] = DEFAULT_REGION_LIMIT,
                            min_len: int = DEFAULT_MIN_LEN) -> Optional[VersionEvidence]:
    """Find the version of library ``term`` in a binary's header region.

    A string mentioning ``term`` (case-insensitively) wins over one that only
    carries a version; within each class the lowest offset wins. ``file`` may be
    bytes or a path; pass ``region_limit=None`` to scan the whole file.
    """
    region = _read_region(file, region_limit)
    needle = term.lower()
    fallback = None
    for offset, text in extract_strings(region, None, min_len):
        v = parse_version(text)
        if v is None:
            continue
        if needle and needle in text.lower():
            return VersionEvidence(v, text, offset)
        if fallback is None:
            fallback = VersionEvidence(v, text, offset)
    return fallback
