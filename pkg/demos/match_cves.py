"""
Matching libraries to CVEs
==========================

Feed entries name products with CPE strings and either a concrete version or
a version range. Vendors are ignored and product names compare case-blind.
"""
from firmscan import Version, load_feed_entries, match, parse_cpe

print(parse_cpe("cpe:/a:samba:samba:4.0"))
print(parse_cpe("cpe:2.3:a:busybox:busybox:1.21.1:*:*:*:*:*:*:*"))

feed = [
    {"cve_id": "CVE-2018-1000517", "published": "2018-06-26", "cvss_base": 9.8, "cwe_ids": ["CWE-119"],
     "applicability": [{"cpe": "cpe:2.3:a:busybox:busybox:*:*:*:*:*:*:*:*", "version_end_excluding": "1.29.0"}]},
    {"cve_id": "CVE-2017-14495", "published": "2017-10-03", "cvss_base": 7.5, "cwe_ids": ["CWE-400"],
     "applicability": [{"cpe": "cpe:2.3:a:thekelleys:dnsmasq:2.71:*:*:*:*:*:*:*"}]},
    # no version information at all
    {"cve_id": "CVE-2019-0001", "published": "2019-01-01", "cvss_base": 5.0, "cwe_ids": [],
     "applicability": [{"cpe": "cpe:/a:busybox:busybox"}]},
    # out of range score, skipped on load
    {"cve_id": "CVE-2019-0002", "published": "2019-01-01", "cvss_base": 11.0, "applicability": []},
]
db = load_feed_entries(feed)
print(len(db), "entries,", db.malformed, "malformed")

for lib, ver in [("busybox", "1.21.1"), ("busybox", "1.36.0"), ("dnsmasq", "2.71"), ("dnsmasq", "2.72")]:
    print(lib, ver, [m.cve_id for m in match(lib, Version.parse(ver), db)])

# version-less CVEs only with an explicit opt-in, and flagged
print([(m.cve_id, m.low_confidence) for m in match("busybox", Version.parse("1.21.1"), db, match_unversioned=True)])
