"""
Reading versions out of binaries
================================

Version strings are pulled from printable runs in the first megabyte of a
binary, then ordered numerically.
"""
from firmscan import Version, VersionConstraint, extract_library_version, parse_version, satisfies

# strings as they sit in real headers
for banner in ["BusyBox v1.13.4 (2009-03-09) multi-call binary", "dnsmasq-2.33", "OpenSSL 1.0.2k-fips  26 Jan 2017",
               "Dropbear SSH multi-purpose v2011.54", "Copyright 2009"]:
    print(f"{banner!r:55} -> {parse_version(banner)}")

# numeric order, not string order
versions = sorted(Version.parse(s) for s in ["1.36.0", "1.9.2", "1.0.0-rc1", "1.0.0", "1.0.2k", "1.0.2"])
print([str(v) for v in versions])

# trailing zeros do not matter
print(Version.parse("2.33") == Version.parse("2.33.0"))

# tilde stays on the minor line, caret on the major line
for c in ["~1.4.4", "^1.4.4", ">=1.4.4"]:
    hits = [s for s in ["1.4.3", "1.4.9", "1.5.0", "2.0.0"] if satisfies(Version.parse(s), VersionConstraint.parse(c))]
    print(c, hits)

# a fake ELF whose copyright year must not win over the real version
blob = b"\x7fELF" + bytes(60) + b"Copyright 2009\x00iptables 1.4.4\x00"
ev = extract_library_version(blob, "iptables")
print(ev.version, "from", repr(ev.source_string), "at byte", ev.byte_offset)
