"""End-to-end corpus scan and report emission."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import analytics, corpus, libid, unpack, version, vulndb
from .errors import ConfigError, FirmscanError

__all__ = ["PipelineConfig", "FirmwareReport", "Quarantine", "Report", "run_pipeline",
           "emit_report", "render_report", "CSV_COLUMNS"]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("firmware_checksum", "library", "version", "cve_id", "cvss", "delay_days")


@dataclass
class PipelineConfig:
    manifest_path: str
    cache_dir: str
    dict_path: str
    feed_path: str
    releases_path: str
    exposure_path: Optional[str] = None
    max_depth: int = unpack.DEFAULT_MAX_DEPTH
    region_limit: Optional[int] = version.DEFAULT_REGION_LIMIT
    output_path: Optional[str] = None
    output_format: str = "json"
    jobs: Optional[int] = None
    match_unversioned: bool = False

    def validate(self):
        for name in ("manifest_path", "cache_dir", "dict_path", "feed_path", "releases_path"):
            if not getattr(self, name):
                raise ConfigError(f"{name} is required")
        for name in ("manifest_path", "dict_path", "feed_path", "releases_path", "exposure_path"):
            p = getattr(self, name)
            if p is not None and not os.path.isfile(p):
                raise ConfigError(f"{name}: no such file {p}")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.output_format not in ("json", "csv"):
            raise ConfigError(f"unknown output format {self.output_format!r}")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass
class FirmwareReport:
    record: corpus.FirmwareRecord
    encryption: unpack.EncryptionVerdict
    traits: unpack.FirmwareTraits
    occurrences: list = field(default_factory=list)
    versions: dict = field(default_factory=dict)  # file_path -> VersionEvidence
    findings: list = field(default_factory=list)
    unversioned: list = field(default_factory=list)
    extraction_log: list = field(default_factory=list)
    max_depth_reached: bool = False

    def to_dict(self) -> dict:
        occ = []
        for o in self.occurrences:
            d = o.to_dict()
            ev = self.versions.get(o.file_path)
            d["version"] = str(ev.version) if ev else None
            d["version_source"] = ev.source_string if ev else None
            d["version_offset"] = ev.byte_offset if ev else None
            occ.append(d)
        rec = self.record.to_dict()
        rec.pop("local_path", None)
        return {
            "record": rec,
            "encryption": {
                "encrypted": self.encryption.encrypted,
                "mean_entropy": self.encryption.mean_entropy,
                "entropy_stddev": self.encryption.entropy_stddev,
                "windows_sampled": self.encryption.windows_sampled,
            },
            "traits": {
                "filesystem_type": self.traits.filesystem_type,
                "architecture": self.traits.architecture,
                "os_family": self.traits.os_family,
            },
            "occurrences": occ,
            "findings": [f.to_dict() for f in self.findings],
            "unversioned": [o.file_path for o in self.unversioned],
            "extraction_log": [list(e) for e in self.extraction_log],
            "max_depth_reached": self.max_depth_reached,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FirmwareReport":
        record = corpus.FirmwareRecord.from_dict(d["record"])
        occurrences, versions = [], {}
        for o in d["occurrences"]:
            occ = libid.LibraryOccurrence(o["firmware_checksum"], o["canonical"], o["category"],
                                          o["file_path"], o["matched_alias"])
            occurrences.append(occ)
            if o.get("version") is not None:
                versions[occ.file_path] = version.VersionEvidence(
                    version.Version.parse(o["version"]), o["version_source"], o["version_offset"], occ)
        by_path = {o.file_path: o for o in occurrences}
        e = d["encryption"]
        return cls(
            record=record,
            encryption=unpack.EncryptionVerdict(e["encrypted"], e["mean_entropy"], e["entropy_stddev"],
                                                e["windows_sampled"]),
            traits=unpack.FirmwareTraits(**d["traits"]),
            occurrences=occurrences,
            versions=versions,
            findings=[vulndb.Finding.from_dict(f) for f in d["findings"]],
            unversioned=[by_path[p] for p in d["unversioned"]],
            extraction_log=[unpack.LogEntry(*e) for e in d["extraction_log"]],
            max_depth_reached=d["max_depth_reached"],
        )


@dataclass(frozen=True)
class Quarantine:
    firmware_name: str
    checksum: str
    stage: str
    diagnostic: str

    def to_dict(self):
        return {"firmware_name": self.firmware_name, "checksum": self.checksum,
                "stage": self.stage, "diagnostic": self.diagnostic}


@dataclass
class Report:
    firmware: list = field(default_factory=list)
    quarantined: list = field(default_factory=list)
    rejected: list = field(default_factory=list)  # {"firmware_name", "reason", "detail"}
    outdated: list = field(default_factory=list)
    not_indexed: list = field(default_factory=list)
    update_stats: list = field(default_factory=list)
    update_summary: dict = field(default_factory=dict)
    persistence: list = field(default_factory=list)  # dicts, see PersistenceRecord.to_dict
    cvss_histogram: dict = field(default_factory=dict)
    cwe_counts: dict = field(default_factory=dict)
    exposure: list = field(default_factory=list)  # {"library", "version", "count"}

    def all_findings(self) -> list:
        return [f for fw in self.firmware for f in fw.findings]

    def totals(self) -> dict:
        findings = self.all_findings()
        return {
            "firmware_count": len(self.firmware),
            "library_count": sum(len(fw.occurrences) for fw in self.firmware),
            "finding_count": len(findings),
            "distinct_cve_count": len({f.cve_id for f in findings}),
        }

    def to_dict(self) -> dict:
        return {
            "firmware": [fw.to_dict() for fw in self.firmware],
            "quarantined": [q.to_dict() for q in self.quarantined],
            "rejected": list(self.rejected),
            "outdated": [o.to_dict() for o in self.outdated],
            "not_indexed": list(self.not_indexed),
            "update_stats": [s.to_dict() for s in self.update_stats],
            "update_summary": dict(self.update_summary),
            "persistence": list(self.persistence),
            "cvss_histogram": {f"{k:.1f}": v for k, v in self.cvss_histogram.items()},
            "cwe_counts": dict(self.cwe_counts),
            "exposure": list(self.exposure),
            "totals": self.totals(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        report = cls(
            firmware=[FirmwareReport.from_dict(fw) for fw in d["firmware"]],
            quarantined=[Quarantine(**q) for q in d["quarantined"]],
            rejected=list(d["rejected"]),
            outdated=[analytics.OutdatedLabel.from_dict(o) for o in d["outdated"]],
            not_indexed=list(d["not_indexed"]),
            update_stats=[analytics.UpdateStats.from_dict(s) for s in d["update_stats"]],
            update_summary=dict(d["update_summary"]),
            persistence=list(d["persistence"]),
            cvss_histogram={float(k): v for k, v in d["cvss_histogram"].items()},
            cwe_counts=dict(d["cwe_counts"]),
            exposure=list(d["exposure"]),
        )
        if "totals" in d and d["totals"] != report.totals():
            raise ValueError("report totals do not match its firmware sections")
        return report


class _Quarantined(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


def _versions_of(fw: FirmwareReport) -> dict:
    """Highest version seen per library in one firmware."""
    out = {}
    for ev in fw.versions.values():
        lib = ev.occurrence.canonical
        if lib not in out or ev.version > out[lib]:
            out[lib] = ev.version
    return out


class _Scanner:
    def __init__(self, config: PipelineConfig, dictionary, db):
        self.config = config
        self.dictionary = dictionary
        self.db = db

    def __call__(self, record: corpus.FirmwareRecord):
        stage = "fetch"
        try:
            record = corpus.fetch(record, self.config.cache_dir)
            stage = "read"
            blob = Path(record.local_path).read_bytes()
            if not blob:
                raise FirmscanError("empty image")
            stage = "entropy"
            verdict = unpack.classify_encryption(blob)
            # rounded so the report survives a JSON round trip unchanged
            verdict = replace(verdict, mean_entropy=round(verdict.mean_entropy, 6),
                              entropy_stddev=round(verdict.entropy_stddev, 6))
            stage = "extract"
            with tempfile.TemporaryDirectory(prefix=f"firmscan-{record.checksum[:8]}-") as tmp:
                if verdict.encrypted:
                    tree = unpack.FilesystemTree(Path(tmp), [], [unpack.LogEntry("skip", "<image>@0x0", "encrypted")])
                else:
                    tree = unpack.extract(blob, tmp, self.config.max_depth)
                stage = "traits"
                traits = unpack.detect_traits(blob, tree)
                stage = "libid"
                occurrences = libid.find_libraries(tree, self.dictionary, record.checksum)
                stage = "version"
                evidence = {}
                for occ in occurrences:
                    ev = version.extract_library_version(Path(tree.root) / occ.file_path, occ.canonical,
                                                         self.config.region_limit)
                    if ev is not None:
                        evidence[occ.file_path] = replace(ev, occurrence=occ)
            stage = "match"
            result = vulndb.scan_firmware(record.checksum,
                                          [(o, evidence.get(o.file_path)) for o in occurrences],
                                          self.db, self.config.match_unversioned)
            return FirmwareReport(replace(record, local_path=None), verdict, traits, occurrences, evidence, result.findings,
                                  result.unversioned, tree.extraction_log, tree.max_depth_reached)
        except (FirmscanError, OSError, ValueError) as exc:
            raise _Quarantined(stage, exc) from exc


def run_pipeline(config: PipelineConfig) -> Report:
    """Scan every curated firmware of the manifest and assemble a corpus report.

    Per-image failures are quarantined with a diagnostic; the run continues.
    Results are merged in manifest order whatever the worker scheduling.
    """
    config.validate()
    try:
        records, rejected = corpus.read_manifest(config.manifest_path)
        dictionary = libid.load_term_dictionary(config.dict_path)
        db = vulndb.load_nvd(config.feed_path)
        releases = analytics.load_release_index(config.releases_path)
        provider = (analytics.FixtureExposureProvider.from_file(config.exposure_path)
                    if config.exposure_path else None)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    report = Report()
    report.rejected = [{"firmware_name": d.record.get("firmware_name") if isinstance(d.record, dict) else None,
                        "reason": d.reason, "detail": d.detail} for d in rejected]
    kept = []
    for d in corpus.curate(records):
        if d.kept:
            kept.append(d.record)
        else:
            report.rejected.append({"firmware_name": d.record.firmware_name, "reason": d.reason, "detail": d.detail})

    scanner = _Scanner(config, dictionary, db)

    def safe(record):
        try:
            return scanner(record)
        except _Quarantined as q:
            log.warning("quarantined %s at %s: %s", record.firmware_name, q.stage, q.exc)
            return Quarantine(record.firmware_name, record.checksum, q.stage, f"{type(q.exc).__name__}: {q.exc}")

    workers = config.jobs or os.cpu_count() or 1
    if workers == 1 or len(kept) <= 1:
        results = [safe(r) for r in kept]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(safe, kept))

    for res in results:
        if isinstance(res, Quarantine):
            report.quarantined.append(res)
        else:
            report.firmware.append(res)

    _corpus_analytics(report, db, releases, provider)
    return report


def _corpus_analytics(report: Report, db, releases, provider):
    seen_labels = set()
    for fw in report.firmware:
        for lib, v in sorted(_versions_of(fw).items()):
            if (lib, v) in seen_labels:
                continue
            seen_labels.add((lib, v))
            if lib in releases:
                report.outdated.append(analytics.label_outdated(lib, v, releases))
            else:
                report.not_indexed.append({"library": lib, "version": str(v)})
    report.outdated.sort(key=lambda o: (o.library, o.found.sort_key()))
    report.not_indexed.sort(key=lambda d: (d["library"], d["version"]))

    records = [fw.record for fw in report.firmware]
    versions = {fw.record.checksum: _versions_of(fw) for fw in report.firmware}
    for key, members in analytics.group_series(records).items():
        report.update_stats.extend(analytics.update_history(key, members, versions))
    report.update_summary = analytics.update_summary(report.update_stats)

    by_checksum = {fw.record.checksum: fw.record for fw in report.firmware}
    findings = report.all_findings()
    for f in findings:
        entry = db.get(f.cve_id)
        if entry is None:
            continue
        rec = analytics.persistence_delay(f, by_checksum[f.firmware_checksum], entry)
        report.persistence.append(rec.to_dict())

    report.cvss_histogram, report.cwe_counts = analytics.severity_distributions(findings, db)

    if provider is not None:
        pairs = sorted({(f.library, f.version) for f in findings}, key=lambda p: (p[0], p[1].sort_key()))
        for lib, v in pairs:
            probe = vulndb.Finding("", lib, v, "", 0.0, ())
            report.exposure.append({"library": lib, "version": str(v),
                                    "count": analytics.exposure(probe, provider)})


def render_report(report: Report, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        delays = {(p["firmware_checksum"], p["cve_id"]): p["delay_days"] for p in report.persistence}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for f in report.all_findings():
            w.writerow([f.firmware_checksum, f.library, str(f.version), f.cve_id, f"{f.cvss_base:.1f}",
                        delays.get((f.firmware_checksum, f.cve_id), "")])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(report: Report, path, fmt: str = "json") -> Path:
    path = Path(path)
    text = render_report(report, fmt)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
