"""Command-line entry point: ``firmscan <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import analytics, corpus, libid, pipeline, unpack, version, vulndb
from .errors import ConfigError, FirmscanError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _dump(obj):
    json.dump(obj, sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")


def cmd_corpus(args) -> int:
    records, rejected = corpus.read_manifest(args.manifest)
    decisions = corpus.curate(records)
    out = {"fetched": [], "failed": [], "rejected": []}
    for d in rejected:
        out["rejected"].append({"entry": d.record, "reason": d.reason, "detail": d.detail})
    for d in decisions:
        if not d.kept:
            out["rejected"].append({"entry": d.record.firmware_name, "reason": d.reason, "detail": d.detail})
            continue
        try:
            rec = corpus.fetch(d.record, args.cache)
            out["fetched"].append({"firmware_name": rec.firmware_name, "checksum": rec.checksum,
                                   "local_path": rec.local_path})
        except FirmscanError as exc:
            out["failed"].append({"firmware_name": d.record.firmware_name, "error": str(exc)})
    if not args.list_rejected:
        out["rejected"] = len(out["rejected"])
    _dump(out)
    return EXIT_PARTIAL if out["failed"] else EXIT_OK


def cmd_unpack(args) -> int:
    blob = Path(args.image).read_bytes()
    tree = unpack.extract(blob, args.out, args.max_depth)
    out = {
        "root": str(tree.root),
        "files": [list(f) for f in tree.files],
        "extraction_log": [list(e) for e in tree.extraction_log],
        "max_depth_reached": tree.max_depth_reached,
        "traits": vars(unpack.detect_traits(blob, tree)),
    }
    if args.entropy_report:
        verdict = unpack.classify_encryption(blob)
        out["entropy"] = {
            "encrypted": verdict.encrypted,
            "mean_entropy": verdict.mean_entropy,
            "entropy_stddev": verdict.entropy_stddev,
            "windows_sampled": verdict.windows_sampled,
            "windows": [round(float(h), 6) for h in unpack.window_entropies(blob)],
        }
    _dump(out)
    return EXIT_OK


def cmd_libs(args) -> int:
    dictionary = libid.load_term_dictionary(args.dict) if args.dict else libid.default_dictionary()
    tree = unpack.FilesystemTree.from_directory(args.tree)
    occs = libid.find_libraries(tree, dictionary, args.checksum)
    rows = []
    for o in occs:
        d = o.to_dict()
        if args.versions:
            ev = version.extract_library_version(Path(args.tree) / o.file_path, o.canonical)
            d["version"] = str(ev.version) if ev else None
        rows.append(d)
    _dump(rows)
    return EXIT_OK


def cmd_version(args) -> int:
    limit = None if args.full_file else args.region_limit
    ev = version.extract_library_version(args.file, args.term or "", limit, args.min_len)
    if ev is None:
        _dump(None)
        return EXIT_OK
    _dump({"version": str(ev.version), "source_string": ev.source_string, "byte_offset": ev.byte_offset})
    return EXIT_OK


def cmd_vuln(args) -> int:
    db = vulndb.load_nvd(args.feed)
    v = version.Version.parse(args.version)
    hits = vulndb.match(args.lib, v, db, args.match_unversioned)
    _dump([{"cve_id": h.cve_id, "cvss_base": h.cvss_base, "cwe_ids": list(h.cwe_ids),
            "low_confidence": h.low_confidence} for h in hits])
    return EXIT_OK


def _load_findings(path) -> list:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "firmware" in doc:
        items = [f for fw in doc["firmware"] for f in fw["findings"]]
    elif isinstance(doc, list):
        items = doc
    else:
        raise ConfigError(f"{path}: expected a report or a findings array")
    return [vulndb.Finding.from_dict(f) for f in items]


def cmd_analyze(args) -> int:
    findings = _load_findings(args.findings)
    index = analytics.load_release_index(args.releases)
    provider = (analytics.FixtureExposureProvider.from_file(args.exposure) if args.exposure
                else analytics.FixtureExposureProvider.default())
    pairs = sorted({(f.library, f.version) for f in findings}, key=lambda p: (p[0], p[1].sort_key()))
    outdated, not_indexed, exposure = [], [], []
    for lib, v in pairs:
        if lib in index:
            outdated.append(analytics.label_outdated(lib, v, index).to_dict())
        else:
            not_indexed.append({"library": lib, "version": str(v)})
        probe = vulndb.Finding("", lib, v, "", 0.0, ())
        exposure.append({"library": lib, "version": str(v), "count": analytics.exposure(probe, provider)})
    cvss, cwe = analytics.severity_distributions(findings)
    _dump({"outdated": outdated, "not_indexed": not_indexed, "exposure": exposure,
           "cvss_histogram": {f"{k:.1f}": n for k, n in cvss.items()}, "cwe_counts": cwe})
    return EXIT_OK


def cmd_run(args) -> int:
    config = pipeline.PipelineConfig(
        manifest_path=args.manifest,
        cache_dir=os.environ.get("FIRMSCAN_CACHE") or args.cache,
        dict_path=args.dict,
        feed_path=args.feed,
        releases_path=args.releases,
        exposure_path=args.exposure,
        max_depth=args.max_depth,
        region_limit=args.region_limit,
        output_path=args.out,
        output_format=args.format,
        jobs=args.jobs,
        match_unversioned=args.match_unversioned,
    )
    report = pipeline.run_pipeline(config)
    if args.out:
        pipeline.emit_report(report, args.out, args.format)
    else:
        sys.stdout.write(pipeline.render_report(report, args.format))
    return EXIT_PARTIAL if report.quarantined else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="firmscan", description="Reused-library and CVE scanner for firmware images.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("corpus", help="validate, dedup, filter and fetch a manifest")
    c.add_argument("--manifest", required=True)
    c.add_argument("--cache", required=True)
    c.add_argument("--list-rejected", action="store_true")
    c.set_defaults(func=cmd_corpus)

    c = sub.add_parser("unpack", help="extract one firmware image")
    c.add_argument("image")
    c.add_argument("--out", required=True)
    c.add_argument("--max-depth", type=int, default=unpack.DEFAULT_MAX_DEPTH)
    c.add_argument("--entropy-report", action="store_true")
    c.set_defaults(func=cmd_unpack)

    c = sub.add_parser("libs", help="identify reused libraries in an extracted tree")
    c.add_argument("tree")
    c.add_argument("--dict", help="term dictionary (default: bundled seed dictionary)")
    c.add_argument("--checksum", default="0" * 32, help="firmware checksum to tag occurrences with")
    c.add_argument("--versions", action="store_true", help="also extract versions")
    c.set_defaults(func=cmd_libs)

    c = sub.add_parser("version", help="extract a library version from a binary")
    c.add_argument("file")
    c.add_argument("--term")
    c.add_argument("--full-file", action="store_true")
    c.add_argument("--region-limit", type=int, default=version.DEFAULT_REGION_LIMIT)
    c.add_argument("--min-len", type=int, default=version.DEFAULT_MIN_LEN)
    c.set_defaults(func=cmd_version)

    c = sub.add_parser("vuln", help="match one (library, version) against a feed")
    c.add_argument("--feed", required=True)
    c.add_argument("--lib", required=True)
    c.add_argument("--version", required=True)
    c.add_argument("--match-unversioned", action="store_true")
    c.set_defaults(func=cmd_vuln)

    c = sub.add_parser("analyze", help="outdated labels, severity and exposure for findings")
    c.add_argument("--findings", required=True)
    c.add_argument("--releases", required=True)
    c.add_argument("--exposure")
    c.set_defaults(func=cmd_analyze)

    c = sub.add_parser("run", help="full pipeline over a manifest")
    c.add_argument("--manifest", required=True)
    c.add_argument("--cache", default=None)
    c.add_argument("--dict", required=True)
    c.add_argument("--feed", required=True)
    c.add_argument("--releases", required=True)
    c.add_argument("--exposure")
    c.add_argument("--jobs", type=int)
    c.add_argument("--max-depth", type=int, default=unpack.DEFAULT_MAX_DEPTH)
    c.add_argument("--region-limit", type=int, default=version.DEFAULT_REGION_LIMIT)
    c.add_argument("--out")
    c.add_argument("--format", choices=("json", "csv"), default="json")
    c.add_argument("--match-unversioned", action="store_true")
    c.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"firmscan: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FirmscanError, OSError, ValueError) as exc:
        print(f"firmscan: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
