"""
How stale are the libraries?
============================

Outdated labels against a release list, update histories per device series,
and the gap between CVE disclosure and firmware release.
"""
import datetime as dt

from firmscan import FirmwareRecord, Version
from firmscan import analytics
from firmscan.vulndb import CveEntry, Finding

index = analytics.ReleaseIndex({"busybox": ["1.9.2", "1.13.4", "1.20.0", "1.21.1", "1.36.0"]})
for found in ["1.9.2", "1.21.1", "1.36.0", "1.10.0"]:
    print(analytics.label_outdated("busybox", Version.parse(found), index))

records = [
    FirmwareRecord("DAP-1665-1.10", "D-Link", "Router", "DAP-1665-1.10", "1.10", dt.date(2015, 1, 1), "file:///a", "1" * 32),
    FirmwareRecord("DAP-1665-1.11", "D-Link", "Router", "DAP-1665-1.11", "1.11", dt.date(2017, 1, 1), "file:///b", "2" * 32),
    FirmwareRecord("DAP-1665-1.20", "D-Link", "Router", "DAP-1665-1.20", "1.20", dt.date(2018, 6, 1), "file:///c", "3" * 32),
]
versions = {
    "1" * 32: {"busybox": Version.parse("1.9.2"), "dnsmasq": Version.parse("2.71")},
    "2" * 32: {"busybox": Version.parse("1.20.0"), "dnsmasq": Version.parse("2.71")},
    "3" * 32: {"busybox": Version.parse("1.20.0"), "dnsmasq": Version.parse("2.71")},
}
for key, members in analytics.group_series(records).items():
    stats = analytics.update_history(key, members, versions)
    for s in stats:
        print(key.normalized_product, s.library, s.update_count, s.update_delays, "never updated" if s.never_updated else "")
    print(analytics.update_summary(stats))

# positive: the firmware shipped after the CVE was public
f = Finding("3" * 32, "busybox", Version.parse("1.20.0"), "CVE-2018-1000517", 9.8, ("CWE-119",))
print(analytics.persistence_delay(f, records[2], CveEntry("CVE-2018-1000517", dt.date(2018, 6, 26), 9.8)).delay_days)

print(analytics.severity_distributions([f, f]))
print(analytics.exposure(Finding("", "dnsmasq", Version.parse("2.71"), "", 0.0, ()),
                         analytics.FixtureExposureProvider.default()))
