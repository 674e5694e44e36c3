"""Vulnerability feed ingestion, CPE parsing and (library, version) matching."""
from __future__ import annotations

import datetime as dt
import json
import logging
import re
import urllib.parse
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .errors import CpeFormatError, FeedFormatError
from .version import Version

__all__ = [
    "WILDCARD",
    "CpeName",
    "Applicability",
    "CveEntry",
    "CveMatch",
    "Finding",
    "ScanResult",
    "VulnDatabase",
    "parse_cpe",
    "load_nvd",
    "load_feed_entries",
    "from_nvd_json",
    "match",
    "applicability_matches",
    "scan_firmware",
]

log = logging.getLogger(__name__)

WILDCARD = None

_cve_id_re = re.compile(r"^CVE-\d{4}-\d{4,}$")
_cwe_re = re.compile(r"^CWE-\d+$")
_unescaped_colon = re.compile(r"(?<!\\):")


@dataclass(frozen=True)
class CpeName:
    part: str
    vendor: str
    product: str
    version_text: Optional[str]
    raw: str = field(compare=False, default="")

    @property
    def is_wildcard(self) -> bool:
        return self.version_text is WILDCARD


def _cpe_value(text: str) -> Optional[str]:
    return WILDCARD if text in ("", "*", "-") else text


def _unescape_23(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text)


def parse_cpe(s: str) -> CpeName:
    """Parse a CPE 2.2 URI (``cpe:/a:samba:samba:4.0``) or 2.3 formatted string.

    A missing, ``*`` or ``-`` version is returned as ``WILDCARD``.
    """
    s = s.strip()
    if s.startswith("cpe:2.3:"):
        fields = [_unescape_23(p) for p in _unescaped_colon.split(s[len("cpe:2.3:"):])]
    elif s.startswith("cpe:/"):
        fields = [urllib.parse.unquote(p) for p in s[len("cpe:/"):].split(":")]
    else:
        raise CpeFormatError(f"not a CPE name: {s!r}")
    # "cpe" + part + vendor + product at minimum
    if len(fields) + 1 < 4:
        raise CpeFormatError(f"too few CPE components: {s!r}")
    part, vendor, product = fields[0], fields[1], fields[2]
    if part not in ("a", "o", "h"):
        raise CpeFormatError(f"CPE part must be a, o or h: {s!r}")
    if not product or product in ("*", "-"):
        raise CpeFormatError(f"CPE product missing: {s!r}")
    version_text = _cpe_value(fields[3]) if len(fields) > 3 else WILDCARD
    return CpeName(part, vendor, product, version_text, s)


def _opt_version(text) -> Optional[Version]:
    if text is None:
        return None
    return Version.parse(str(text))


@dataclass(frozen=True)
class Applicability:
    cpe: CpeName
    start_incl: Optional[Version] = None
    start_excl: Optional[Version] = None
    end_incl: Optional[Version] = None
    end_excl: Optional[Version] = None

    def __post_init__(self):
        if self.start_incl is not None and self.start_excl is not None:
            raise ValueError("both inclusive and exclusive start bounds set")
        if self.end_incl is not None and self.end_excl is not None:
            raise ValueError("both inclusive and exclusive end bounds set")
        if not self.cpe.is_wildcard and self.has_bounds:
            raise ValueError("range bounds given for a concrete CPE version")

    @property
    def has_bounds(self) -> bool:
        return any(b is not None for b in (self.start_incl, self.start_excl, self.end_incl, self.end_excl))

    @property
    def unversioned(self) -> bool:
        return self.cpe.is_wildcard and not self.has_bounds

    @classmethod
    def from_dict(cls, d: dict) -> "Applicability":
        return cls(
            parse_cpe(d["cpe"]),
            _opt_version(d.get("version_start_including")),
            _opt_version(d.get("version_start_excluding")),
            _opt_version(d.get("version_end_including")),
            _opt_version(d.get("version_end_excluding")),
        )

    def to_dict(self) -> dict:
        d = {"cpe": self.cpe.raw}
        for key, v in (("version_start_including", self.start_incl),
                       ("version_start_excluding", self.start_excl),
                       ("version_end_including", self.end_incl),
                       ("version_end_excluding", self.end_excl)):
            if v is not None:
                d[key] = str(v)
        return d


@dataclass(frozen=True)
class CveEntry:
    cve_id: str
    published: dt.date
    cvss_base: float
    cwe_ids: tuple = ()
    applicability: tuple = ()

    def __post_init__(self):
        if not _cve_id_re.match(self.cve_id):
            raise ValueError(f"bad CVE id {self.cve_id!r}")
        if not 0.0 <= self.cvss_base <= 10.0:
            raise ValueError(f"{self.cve_id}: cvss_base {self.cvss_base} outside [0, 10]")

    @classmethod
    def from_dict(cls, d: dict) -> "CveEntry":
        cvss = d["cvss_base"]
        if isinstance(cvss, bool) or not isinstance(cvss, (int, float)):
            raise ValueError(f"cvss_base must be a number, got {cvss!r}")
        cwes = tuple(d.get("cwe_ids") or ())
        for c in cwes:
            if not _cwe_re.match(str(c)):
                raise ValueError(f"bad CWE id {c!r}")
        applicability = []
        for a in d.get("applicability") or ():
            try:
                applicability.append(Applicability.from_dict(a))
            except ValueError as exc:
                # one odd range (e.g. a four-component bound) must not hide the rest of the CVE
                log.warning("%s: skipping applicability %r: %s", d.get("cve_id"), a, exc)
        return cls(
            cve_id=str(d["cve_id"]),
            published=dt.date.fromisoformat(str(d["published"])[:10]),
            cvss_base=float(cvss),
            cwe_ids=cwes,
            applicability=tuple(applicability),
        )

    def to_dict(self) -> dict:
        return {
            "cve_id": self.cve_id,
            "published": self.published.isoformat(),
            "cvss_base": self.cvss_base,
            "cwe_ids": list(self.cwe_ids),
            "applicability": [a.to_dict() for a in self.applicability],
        }


@dataclass(frozen=True)
class CveMatch:
    cve_id: str
    cvss_base: float
    cwe_ids: tuple
    low_confidence: bool = False


@dataclass(frozen=True)
class Finding:
    firmware_checksum: str
    library: str
    version: Version
    cve_id: str
    cvss_base: float
    cwe_ids: tuple
    low_confidence: bool = False

    def sort_key(self):
        return (self.firmware_checksum, self.library, self.version.sort_key(), self.cve_id)

    def to_dict(self) -> dict:
        return {
            "firmware_checksum": self.firmware_checksum,
            "library": self.library,
            "version": str(self.version),
            "cve_id": self.cve_id,
            "cvss_base": self.cvss_base,
            "cwe_ids": list(self.cwe_ids),
            "low_confidence": self.low_confidence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(d["firmware_checksum"], d["library"], Version.parse(d["version"]), d["cve_id"],
                   float(d["cvss_base"]), tuple(d.get("cwe_ids", ())), bool(d.get("low_confidence", False)))


class VulnDatabase:
    """CVE entries indexed by lowercase CPE product name."""

    def __init__(self, entries=(), malformed: int = 0):
        self.entries = tuple(entries)
        self.malformed = malformed
        self.by_id = {e.cve_id: e for e in self.entries}
        index = defaultdict(list)
        for e in self.entries:
            for product in sorted({a.cpe.product.lower() for a in e.applicability}):
                index[product].append(e)
        self.by_product = dict(index)

    def candidates(self, library: str) -> list:
        return self.by_product.get(library.lower(), [])

    def __len__(self):
        return len(self.entries)

    def __contains__(self, cve_id):
        return cve_id in self.by_id

    def get(self, cve_id: str) -> Optional[CveEntry]:
        return self.by_id.get(cve_id)


def load_feed_entries(doc) -> VulnDatabase:
    """Build a database from an already-parsed feed array, skipping malformed entries."""
    if not isinstance(doc, list):
        raise FeedFormatError("feed must be a JSON array of CVE objects")
    entries, malformed = [], 0
    for item in doc:
        try:
            entries.append(CveEntry.from_dict(item))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            malformed += 1
            log.warning("skipping malformed feed entry %r: %s",
                        item.get("cve_id") if isinstance(item, dict) else item, exc)
    return VulnDatabase(entries, malformed)


def load_nvd(path) -> VulnDatabase:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FeedFormatError(f"{path}: invalid JSON: {exc}") from exc
    except OSError as exc:
        raise FeedFormatError(f"{path}: unreadable: {exc}") from exc
    return load_feed_entries(doc)


def _nvd_cpe_matches(nodes):
    for node in nodes or ():
        for m in node.get("cpe_match", node.get("cpeMatch", ())):
            if m.get("vulnerable", True):
                yield m
        yield from _nvd_cpe_matches(node.get("children"))


def from_nvd_json(doc: dict) -> list:
    """Convert an NVD JSON 1.1 feed or 2.0 API response into the flat feed format."""
    out = []
    if "CVE_Items" in doc:
        for item in doc["CVE_Items"]:
            cve = item["cve"]
            impact = item.get("impact", {})
            score = (impact.get("baseMetricV3", {}).get("cvssV3", {}).get("baseScore")
                     or impact.get("baseMetricV2", {}).get("cvssV2", {}).get("baseScore") or 0.0)
            cwes = sorted({d["value"] for pt in cve.get("problemtype", {}).get("problemtype_data", ())
                           for d in pt.get("description", ()) if _cwe_re.match(d.get("value", ""))})
            cpes = _nvd_cpe_matches(item.get("configurations", {}).get("nodes"))
            out.append(_flat(cve["CVE_data_meta"]["ID"], item.get("publishedDate", ""), score, cwes, cpes, "cpe23Uri"))
    elif "vulnerabilities" in doc:
        for wrapper in doc["vulnerabilities"]:
            cve = wrapper["cve"]
            score = 0.0
            for key in ("cvssMetricV31", "cvssMetricV30", "cvssMetricV2"):
                metrics = cve.get("metrics", {}).get(key)
                if metrics:
                    score = metrics[0]["cvssData"]["baseScore"]
                    break
            cwes = sorted({d["value"] for w in cve.get("weaknesses", ()) for d in w.get("description", ())
                           if _cwe_re.match(d.get("value", ""))})
            nodes = [n for conf in cve.get("configurations", ()) for n in conf.get("nodes", ())]
            out.append(_flat(cve["id"], cve.get("published", ""), score, cwes, _nvd_cpe_matches(nodes), "criteria"))
    else:
        raise FeedFormatError("unrecognised NVD document: expected CVE_Items or vulnerabilities")
    return out


def _flat(cve_id, published, score, cwes, cpe_matches, cpe_key):
    applicability = []
    for m in cpe_matches:
        a = {"cpe": m[cpe_key]}
        for src, dst in (("versionStartIncluding", "version_start_including"),
                         ("versionStartExcluding", "version_start_excluding"),
                         ("versionEndIncluding", "version_end_including"),
                         ("versionEndExcluding", "version_end_excluding")):
            if m.get(src):
                a[dst] = m[src]
        applicability.append(a)
    return {"cve_id": cve_id, "published": published[:10], "cvss_base": score,
            "cwe_ids": cwes, "applicability": applicability}


def applicability_matches(app: Applicability, library: str, version: Version,
                          match_unversioned: bool = False) -> bool:
    if app.cpe.product.lower() != library.lower():
        return False
    if not app.cpe.is_wildcard:
        try:
            return Version.parse(app.cpe.version_text) == version
        except ValueError:
            return False
    if not app.has_bounds:
        return match_unversioned
    if app.start_incl is not None and version < app.start_incl:
        return False
    if app.start_excl is not None and version <= app.start_excl:
        return False
    if app.end_incl is not None and version > app.end_incl:
        return False
    if app.end_excl is not None and version >= app.end_excl:
        return False
    return True


def match(library: str, version: Version, db: VulnDatabase, match_unversioned: bool = False) -> list:
    """CVEs whose applicability covers ``(library, version)``, sorted by CVE id.

    Products are compared case-insensitively and vendors are ignored. CVEs that
    name the product without any version information only match when
    ``match_unversioned`` is set, and are then marked low-confidence.
    """
    hits = {}
    for entry in db.candidates(library):
        for app in entry.applicability:
            if not applicability_matches(app, library, version, match_unversioned):
                continue
            low = app.unversioned
            prev = hits.get(entry.cve_id)
            if prev is None or (prev.low_confidence and not low):
                hits[entry.cve_id] = CveMatch(entry.cve_id, entry.cvss_base, entry.cwe_ids, low)
    return [hits[k] for k in sorted(hits)]


@dataclass
class ScanResult:
    findings: list
    unversioned: list


def scan_firmware(firmware_checksum: str, items, db: VulnDatabase, match_unversioned: bool = False) -> ScanResult:
    """Match every versioned occurrence of one firmware against ``db``.

    ``items`` yields ``(occurrence, evidence)`` pairs; occurrences whose evidence
    is None are returned in ``unversioned``.
    """
    findings = {}
    unversioned = []
    for occurrence, evidence in items:
        if evidence is None:
            unversioned.append(occurrence)
            continue
        for m in match(occurrence.canonical, evidence.version, db, match_unversioned):
            f = Finding(firmware_checksum, occurrence.canonical, evidence.version, m.cve_id,
                        m.cvss_base, m.cwe_ids, m.low_confidence)
            key = f.sort_key()
            if key not in findings or (findings[key].low_confidence and not f.low_confidence):
                findings[key] = f
    return ScanResult([findings[k] for k in sorted(findings)], unversioned)
