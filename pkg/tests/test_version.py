import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firmscan.version import (
    Op,
    Version,
    VersionConstraint,
    compare,
    extract_library_version,
    extract_strings,
    parse_version,
    satisfies,
)

V = Version.parse


@pytest.mark.parametrize("text, numeric", [
    ("v1.36.0", (1, 36, 0)),
    ("dnsmasq-2.33", (2, 33)),
    ("BusyBox v1.13.4", (1, 13, 4)),
    ("2011.54", (2011, 54)),
    ("OpenSSL 1.0.2k-fips", (1, 0, 2)),
])
def test_parse_version_numeric(text, numeric):
    assert parse_version(text).numeric == numeric


def test_parse_version_components():
    v = parse_version("openssl 1.0.2k")
    assert v.letter == "k"
    v = parse_version("release 1.0.0-rc1.2")
    assert v.prerelease == ("rc1", "2")
    assert v.raw == "1.0.0-rc1.2"


@pytest.mark.parametrize("text", ["no digits here", "2009", "1.", "Copyright 2009", "", "12345.6"])
def test_parse_version_none(text):
    assert parse_version(text) is None


def test_component_bounds():
    with pytest.raises(ValueError):
        Version((10000, 1))
    with pytest.raises(ValueError):
        Version((1, 100))
    with pytest.raises(ValueError):
        Version((1,))
    with pytest.raises(ValueError):
        V("1.2.3.4")


@pytest.mark.parametrize("a, b, expected", [
    ("1.9.2", "1.36.0", -1),
    ("2.33", "2.33.0", 0),
    ("1.0.0-rc1", "1.0.0", -1),
    ("1.0.2", "1.0.2a", -1),
    ("1.0.2a", "1.0.2b", -1),
    ("1.0.0-alpha", "1.0.0-alpha.1", -1),
    ("1.0.0-2", "1.0.0-10", -1),
    ("1.0.0-10", "1.0.0-alpha", -1),
    ("4.0", "4.0", 0),
])
def test_compare(a, b, expected):
    assert compare(V(a), V(b)) == expected
    assert compare(V(b), V(a)) == -expected


@pytest.mark.parametrize("v, c, expected", [
    ("1.4.5", "~1.4.4", True),
    ("1.4.4", "~1.4.4", True),
    ("1.5.0", "~1.4.4", False),
    ("1.4.3", "~1.4.4", False),
    ("1.9.0", "^1.4.4", True),
    ("2.0.0", "^1.4.4", False),
    ("4.0", "=4.0", True),
    ("4.0.1", "=4.0", False),
    ("1.2", ">=1.2.0", True),
    ("1.1.99", ">=1.2.0", False),
    ("1.2.0", "<=1.2", True),
])
def test_satisfies(v, c, expected):
    assert satisfies(V(v), VersionConstraint.parse(c)) is expected


def test_constraint_parse():
    c = VersionConstraint.parse("^1.4.4")
    assert c.op is Op.CARET and c.bound == V("1.4.4")
    assert str(VersionConstraint.parse(">=2.0")) == ">=2.0"
    assert VersionConstraint.parse("1.2.3").op is Op.EQ


def test_extract_strings_examples():
    assert extract_strings(b"BusyBox v1.13.4\x00") == [(0, "BusyBox v1.13.4")]
    assert extract_strings(b"ab\x00cdef\x00", min_len=4) == [(3, "cdef")]
    assert extract_strings(bytes(range(0x80, 0x100)) * 8) == []


def test_extract_strings_region_limit():
    data = b"\x00" * 10 + b"first string\x00" + b"\x00" * 100 + b"second string\x00"
    assert extract_strings(data, region_limit=50) == [(10, "first string")]
    # a run cut by the region end still counts
    assert extract_strings(b"abcdefgh", region_limit=6) == [(0, "abcdef")]


def test_library_version_prefers_term():
    data = b"\x7fELF\x00\x01GLIBC_2.0\x00Copyright 2009\x00iptables 1.4.4\x00"
    ev = extract_library_version(data, "iptables")
    assert ev.version == V("1.4.4")
    assert ev.source_string == "iptables 1.4.4"
    assert ev.version.raw in ev.source_string


def test_library_version_fallback_and_none():
    data = b"\x00\x01some tool 3.2.1\x00"
    ev = extract_library_version(data, "busybox")
    assert ev.version == V("3.2.1") and ev.byte_offset == 2
    assert extract_library_version(b"\x7fELF" + bytes(range(0x80, 0x100)), "dropbear") is None


def test_library_version_from_busybox_banner():
    data = b"\x7fELF\x01\x01" + bytes(40) + b"BusyBox v1.21.1 (2013-07-08 10:20:34 CST)\x00"
    assert extract_library_version(data, "busybox").version.numeric == (1, 21, 1)


def test_library_version_region_limit(tmp_path):
    data = bytes(2000) + b"busybox 1.2.3\x00"
    assert extract_library_version(data, "busybox", region_limit=1000) is None
    assert extract_library_version(data, "busybox", region_limit=None).version == V("1.2.3")
    p = tmp_path / "bin"
    p.write_bytes(data)
    assert extract_library_version(p, "busybox", region_limit=None).version == V("1.2.3")


# --- properties ---

idents = st.one_of(
    st.integers(0, 50).map(str),
    st.from_regex(r"[a-z][a-z0-9]{0,3}", fullmatch=True),
)
versions = st.builds(
    lambda n, letter, pre: Version(tuple(n), letter, tuple(pre)),
    st.lists(st.integers(0, 99), min_size=1, max_size=2).flatmap(
        lambda rest: st.integers(0, 9999).map(lambda m: [m] + rest)),
    st.one_of(st.none(), st.sampled_from("abcz")),
    st.lists(idents, max_size=2),
)


@given(versions, versions)
def test_compare_antisymmetric(a, b):
    assert compare(a, b) == -compare(b, a)
    assert compare(a, a) == 0


@given(versions, versions, versions)
def test_compare_transitive(a, b, c):
    x, y, z = sorted([a, b, c])
    assert compare(x, y) <= 0 and compare(y, z) <= 0 and compare(x, z) <= 0


@given(versions)
def test_roundtrip(v):
    again = parse_version(str(v))
    assert again == v
    assert str(again) == str(v)
    assert parse_version(v.raw) == v


@given(versions)
def test_eq_self_satisfied(v):
    assert satisfies(v, VersionConstraint(Op.EQ, v))


plain = st.builds(lambda n: Version(tuple(n)),
                  st.tuples(st.integers(0, 30), st.integers(0, 12), st.integers(0, 12)))


@settings(max_examples=300)
@given(st.lists(plain, min_size=3, max_size=3), plain, st.sampled_from([Op.TILDE, Op.CARET]))
def test_interval_property(vs, bound, op):
    v1, v2, v3 = sorted(vs)
    c = VersionConstraint(op, bound)
    if satisfies(v1, c) and satisfies(v3, c):
        assert satisfies(v2, c)


@given(st.lists(plain, min_size=3, max_size=3), plain, plain)
def test_interval_property_ge_le(vs, lo, hi):
    v1, v2, v3 = sorted(vs)

    def inside(v):
        return satisfies(v, VersionConstraint(Op.GE, lo)) and satisfies(v, VersionConstraint(Op.LE, hi))

    if inside(v1) and inside(v3):
        assert inside(v2)


@given(st.binary(max_size=512), st.integers(1, 8))
def test_extract_strings_printable(data, min_len):
    for offset, text in extract_strings(data, min_len=min_len):
        assert len(text) >= min_len
        assert all(0x20 <= ord(ch) <= 0x7E for ch in text)
        assert data[offset:offset + len(text)] == text.encode()


def test_sort_matches_padded_tuple_oracle():
    rng = random.Random(7)
    vs = [Version(tuple([rng.randint(0, 9999)] + [rng.randint(0, 99) for _ in range(rng.randint(1, 2))]))
          for _ in range(300)]
    pad = lambda v: tuple(v.numeric) + (0,) * (3 - len(v.numeric))  # noqa: E731
    assert [pad(v) for v in sorted(vs)] == sorted(pad(v) for v in vs)
