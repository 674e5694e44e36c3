"""firmscan: find reused libraries and their known vulnerabilities inside firmware images."""
from .corpus import FirmwareRecord, curate, dedup, fetch, filter_unqualified, load_manifest
from .libid import LibraryOccurrence, TermDictionary, default_dictionary, find_libraries, load_term_dictionary
from .pipeline import PipelineConfig, Report, emit_report, render_report, run_pipeline
from .unpack import (FilesystemTree, classify_encryption, detect_traits, extract, scan_signatures, shannon_entropy,
                     window_entropies)
from .version import Version, VersionConstraint, compare, extract_library_version, parse_version, satisfies
from .vulndb import Finding, VulnDatabase, load_feed_entries, load_nvd, match, parse_cpe, scan_firmware

__version__ = "0.1.0"

__all__ = [
    "FirmwareRecord", "curate", "dedup", "fetch", "filter_unqualified", "load_manifest",
    "LibraryOccurrence", "TermDictionary", "default_dictionary", "find_libraries", "load_term_dictionary",
    "PipelineConfig", "Report", "emit_report", "render_report", "run_pipeline",
    "FilesystemTree", "classify_encryption", "detect_traits", "extract", "scan_signatures", "shannon_entropy",
    "window_entropies",
    "Version", "VersionConstraint", "compare", "extract_library_version", "parse_version", "satisfies",
    "Finding", "VulnDatabase", "load_feed_entries", "load_nvd", "match", "parse_cpe", "scan_firmware",
]
