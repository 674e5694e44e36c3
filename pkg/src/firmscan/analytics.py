"""Corpus statistics: outdated versions, update histories, persistence delays, severity, exposure."""
from __future__ import annotations

import datetime as dt
import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .errors import IncompleteRecordError, NotIndexedError
from .version import Version

__all__ = [
    "ReleaseIndex",
    "load_release_index",
    "OutdatedLabel",
    "label_outdated",
    "SeriesKey",
    "series_key",
    "group_series",
    "UpdateStats",
    "update_history",
    "update_summary",
    "PersistenceRecord",
    "persistence_delay",
    "severity_distributions",
    "cvss_bin",
    "ExposureProvider",
    "FixtureExposureProvider",
    "exposure",
]


class ReleaseIndex:
    """Official releases per library, ascending."""

    def __init__(self, releases=None):
        self.releases = {}
        for lib, versions in (releases or {}).items():
            versions = [v if isinstance(v, Version) else Version.parse(v) for v in versions]
            for a, b in zip(versions, versions[1:]):
                if not a < b:
                    raise ValueError(f"{lib}: releases not strictly ascending at {a} -> {b}")
            if not versions:
                raise ValueError(f"{lib}: empty release list")
            self.releases[lib.lower()] = versions

    def __contains__(self, library):
        return library.lower() in self.releases

    def newest(self, library: str) -> Version:
        return self.releases[library.lower()][-1]

    def position(self, library: str, version: Version) -> Optional[int]:
        versions = self.releases[library.lower()]
        lo, hi = 0, len(versions)
        while lo < hi:
            mid = (lo + hi) // 2
            if versions[mid] < version:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(versions) and versions[lo] == version:
            return lo
        return None


def load_release_index(path) -> ReleaseIndex:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: release index must be a JSON object")
    return ReleaseIndex(doc)


@dataclass(frozen=True)
class OutdatedLabel:
    library: str
    found: Version
    newest: Version
    is_outdated: bool
    interval_distance: Optional[int] = None

    def to_dict(self) -> dict:
        return {"library": self.library, "found": str(self.found), "newest": str(self.newest),
                "is_outdated": self.is_outdated, "interval_distance": self.interval_distance}

    @classmethod
    def from_dict(cls, d):
        return cls(d["library"], Version.parse(d["found"]), Version.parse(d["newest"]),
                   d["is_outdated"], d.get("interval_distance"))


def label_outdated(library: str, found: Version, index: ReleaseIndex) -> OutdatedLabel:
    """Compare ``found`` with the newest release; the distance is an index delta when both are listed."""
    if library not in index:
        raise NotIndexedError(library)
    newest = index.newest(library)
    pos = index.position(library, found)
    distance = None
    if pos is not None:
        distance = len(index.releases[library.lower()]) - 1 - pos
    return OutdatedLabel(library, found, newest, found < newest, distance)


# a trailing token that looks like a revision: "v2", "1.10", "_v1.0b"
_revision_suffix = re.compile(r"[-_ ]?(?:[vV]\d[\w.]*|\d+\.[\w.]*)$")


@dataclass(frozen=True, order=True)
class SeriesKey:
    manufacturer: str
    normalized_product: str


def series_key(record) -> SeriesKey:
    product = _revision_suffix.sub("", record.product.strip()) or record.product.strip()
    return SeriesKey(record.manufacturer.strip().lower(), product.lower())


def group_series(records) -> dict:
    """Group firmware into device series; each series is ordered by publish date."""
    groups = defaultdict(list)
    for r in records:
        groups[series_key(r)].append(r)
    return {k: sorted(groups[k], key=lambda r: (r.publish_time, r.firmware_name, r.checksum))
            for k in sorted(groups)}


@dataclass(frozen=True)
class UpdateStats:
    series: SeriesKey
    library: str
    update_count: int
    update_delays: tuple
    never_updated: bool
    observations: int = 0
    regressions: int = 0

    def to_dict(self) -> dict:
        return {"manufacturer": self.series.manufacturer, "product": self.series.normalized_product,
                "library": self.library, "update_count": self.update_count,
                "update_delays": list(self.update_delays), "never_updated": self.never_updated,
                "observations": self.observations, "regressions": self.regressions}

    @classmethod
    def from_dict(cls, d):
        return cls(SeriesKey(d["manufacturer"], d["product"]), d["library"], d["update_count"],
                   tuple(d["update_delays"]), d["never_updated"], d["observations"], d["regressions"])


def update_history(series: SeriesKey, records, versions_by_firmware) -> list:
    """Count version bumps of each library between consecutive firmware of one series.

    ``versions_by_firmware`` maps a firmware checksum to ``{library: Version}``.
    Only firmware that carry the library take part in its sequence. A version
    drop counts as no update and is tallied in ``regressions``.
    """
    timeline = defaultdict(list)
    for r in sorted(records, key=lambda r: (r.publish_time, r.firmware_name, r.checksum)):
        for lib, v in sorted(versions_by_firmware.get(r.checksum, {}).items()):
            timeline[lib].append((r.publish_time, v))
    out = []
    for lib in sorted(timeline):
        seq = timeline[lib]
        delays, regressions = [], 0
        for (d0, v0), (d1, v1) in zip(seq, seq[1:]):
            if v1 > v0:
                delays.append((d1 - d0).days)
            elif v1 < v0:
                regressions += 1
        count = len(delays)
        out.append(UpdateStats(series, lib, count, tuple(delays), count == 0 and len(seq) >= 2,
                               len(seq), regressions))
    return out


def update_summary(stats) -> dict:
    """Share of (series, library) pairs ever updated, and the mean update delay in days and years."""
    eligible = [s for s in stats if s.observations >= 2]
    updated = sum(1 for s in eligible if s.update_count > 0)
    delays = [d for s in stats for d in s.update_delays]
    mean_days = sum(delays) / len(delays) if delays else None
    return {
        "eligible": len(eligible),
        "updated": updated,
        "updated_fraction": updated / len(eligible) if eligible else None,
        "never_updated_fraction": (len(eligible) - updated) / len(eligible) if eligible else None,
        "mean_update_delay_days": mean_days,
        "mean_update_delay_years": mean_days / 365.25 if mean_days is not None else None,
    }


@dataclass(frozen=True)
class PersistenceRecord:
    finding: object
    firmware_release: dt.date
    cve_published: dt.date
    delay_days: int

    @property
    def after_disclosure(self) -> bool:
        return self.delay_days > 0

    def to_dict(self) -> dict:
        f = self.finding
        return {"firmware_checksum": f.firmware_checksum, "library": f.library, "version": str(f.version),
                "cve_id": f.cve_id, "firmware_release": self.firmware_release.isoformat(),
                "cve_published": self.cve_published.isoformat(), "delay_days": self.delay_days}


def persistence_delay(finding, firmware_record, cve_entry) -> PersistenceRecord:
    """Signed days from CVE publication to firmware release; positive means shipped after disclosure."""
    released = getattr(firmware_record, "publish_time", None)
    published = getattr(cve_entry, "published", None)
    if released is None or published is None:
        raise IncompleteRecordError(f"{finding.cve_id}: missing firmware release or CVE publication date")
    return PersistenceRecord(finding, released, published, (released - published).days)


def cvss_bin(score: float) -> float:
    return round(round(score * 10) / 10, 1)


def severity_distributions(findings, db=None) -> tuple:
    """CVSS histogram (0.1-wide bins) and CWE counts over distinct (firmware, CVE) pairs.

    Scores and CWEs come from ``db`` when the CVE is present there, else from the finding.
    """
    seen = {}
    for f in findings:
        seen.setdefault((f.firmware_checksum, f.cve_id), f)
    cvss, cwe = Counter(), Counter()
    for (_, cve_id), f in sorted(seen.items()):
        entry = db.get(cve_id) if db is not None else None
        score = entry.cvss_base if entry is not None else f.cvss_base
        cwes = entry.cwe_ids if entry is not None else f.cwe_ids
        cvss[cvss_bin(score)] += 1
        for c in cwes:
            cwe[c] += 1
    return dict(sorted(cvss.items())), dict(sorted(cwe.items()))


class ExposureProvider:
    """Source of Internet-exposure counts for a (library, version) pair."""

    def count(self, library: str, version: Version) -> Optional[int]:
        raise NotImplementedError


@dataclass
class FixtureExposureProvider(ExposureProvider):
    """Static ``"library@version" -> count`` map."""

    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        normalized = {}
        for key, n in self.counts.items():
            lib, _, ver = key.rpartition("@")
            normalized[(lib.lower(), Version.parse(ver))] = int(n)
        self._index = normalized

    @classmethod
    def from_file(cls, path) -> "FixtureExposureProvider":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def default(cls) -> "FixtureExposureProvider":
        text = resources.files("firmscan.data").joinpath("exposure_fixture.json").read_text(encoding="utf-8")
        return cls(json.loads(text))

    def count(self, library, version):
        return self._index.get((library.lower(), version))


def exposure(finding, provider: ExposureProvider) -> Optional[int]:
    """Exposure count for the finding's (library, version); None means unavailable, never zero."""
    try:
        return provider.count(finding.library, finding.version)
    except Exception:
        return None
