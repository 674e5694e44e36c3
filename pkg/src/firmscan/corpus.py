"""Firmware corpus: manifest loading, deduplication, suffix filtering and fetching."""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

from .errors import FetchError, IntegrityError, ManifestFormatError, UnsupportedSchemeError

__all__ = [
    "FirmwareRecord",
    "CorpusFilterDecision",
    "MANDATORY_FIELDS",
    "load_manifest",
    "read_manifest",
    "dedup",
    "filter_unqualified",
    "curate",
    "fetch",
    "md5_hex",
]

log = logging.getLogger(__name__)

MANDATORY_FIELDS = ("firmware_name", "manufacturer", "device_type", "product", "version",
                    "publish_time", "url", "checksum")

_checksum_re = re.compile(r"^[0-9a-f]{32}$")

# decision reasons
OK = "ok"
SUFFIX_TOO_LONG = "suffix_too_long"
SUFFIX_NUMERIC = "suffix_numeric"
DUPLICATE_CHECKSUM = "duplicate_checksum"
MISSING_METADATA = "missing_metadata"


@dataclass(frozen=True)
class FirmwareRecord:
    firmware_name: str
    manufacturer: str
    device_type: str
    product: str
    version: str
    publish_time: dt.date
    url: str
    checksum: str
    local_path: Optional[str] = None

    def __post_init__(self):
        if not self.firmware_name or not self.manufacturer:
            raise ValueError("firmware_name and manufacturer must be non-empty")
        if not _checksum_re.match(self.checksum):
            raise ValueError(f"checksum must be 32 lowercase hex digits: {self.checksum!r}")
        if not isinstance(self.publish_time, dt.date):
            raise TypeError("publish_time must be a date")

    @classmethod
    def from_dict(cls, entry: dict) -> "FirmwareRecord":
        missing = [k for k in MANDATORY_FIELDS if not str(entry.get(k) or "").strip()]
        if missing:
            raise ValueError(f"missing metadata: {', '.join(missing)}")
        try:
            published = dt.date.fromisoformat(str(entry["publish_time"]).strip())
        except ValueError as exc:
            raise ValueError(f"publish_time is not an ISO date: {entry['publish_time']!r}") from exc
        return cls(
            firmware_name=str(entry["firmware_name"]),
            manufacturer=str(entry["manufacturer"]),
            device_type=str(entry["device_type"]),
            product=str(entry["product"]),
            version=str(entry["version"]),
            publish_time=published,
            url=str(entry["url"]),
            checksum=str(entry["checksum"]).strip().lower(),
            local_path=entry.get("local_path"),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["publish_time"] = self.publish_time.isoformat()
        return d

    @property
    def filename(self) -> str:
        return Path(urllib.parse.urlparse(self.url).path).name


@dataclass(frozen=True)
class CorpusFilterDecision:
    # a FirmwareRecord, or the raw manifest entry when it could not be built
    record: object
    kept: bool
    reason: str
    detail: str = ""

    def __post_init__(self):
        if self.kept != (self.reason == OK):
            raise ValueError("kept must be true exactly when reason is 'ok'")


def read_manifest(path) -> tuple:
    """Parse a manifest into ``(records, rejected)``; rejected are missing-metadata decisions."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ManifestFormatError(f"{path}: top level must be a JSON array")
    records, rejected = [], []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            rejected.append(CorpusFilterDecision(entry, False, MISSING_METADATA, f"entry {i} is not an object"))
            continue
        try:
            records.append(FirmwareRecord.from_dict(entry))
        except (ValueError, TypeError) as exc:
            rejected.append(CorpusFilterDecision(entry, False, MISSING_METADATA, f"entry {i}: {exc}"))
    return records, rejected


def load_manifest(path) -> list:
    records, rejected = read_manifest(path)
    for d in rejected:
        log.warning("dropping manifest entry: %s", d.detail)
    return records


def dedup(records) -> list:
    """Keep the first record for each checksum, preserving input order."""
    seen = set()
    out = []
    for r in records:
        if r.checksum in seen:
            continue
        seen.add(r.checksum)
        out.append(r)
    return out


def _suffix_decision(filename: str):
    if not filename:
        return MISSING_METADATA
    if "." not in filename:
        return OK
    suffix = filename.rsplit(".", 1)[1]
    if len(suffix) > 5:
        return SUFFIX_TOO_LONG
    if sum(c.isdigit() for c in suffix) >= 2:
        return SUFFIX_NUMERIC
    return OK


def filter_unqualified(records) -> list:
    """Apply the two filename-suffix rules: length above 5, or two or more digits."""
    out = []
    for r in records:
        reason = _suffix_decision(r.filename)
        out.append(CorpusFilterDecision(r, reason == OK, reason, r.filename))
    return out


def curate(records) -> list:
    """Dedup then suffix-filter, returning one decision per input record in input order."""
    seen = set()
    out = []
    for r in records:
        if r.checksum in seen:
            out.append(CorpusFilterDecision(r, False, DUPLICATE_CHECKSUM, r.checksum))
            continue
        seen.add(r.checksum)
        out.extend(filter_unqualified([r]))
    return out


def md5_hex(data: bytes) -> str:
    return hashlib.md5(data).hexdigest()


def _md5_file(path: Path) -> str:
    h = hashlib.md5()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_locks_guard = threading.Lock()
_locks: dict = {}


def _lock_for(key: str) -> threading.Lock:
    with _locks_guard:
        return _locks.setdefault(key, threading.Lock())


def _download(url: str, timeout: float) -> bytes:
    parsed = urllib.parse.urlparse(url)
    if parsed.scheme == "file":
        path = urllib.request.url2pathname(parsed.path)
        try:
            with open(path, "rb") as fh:
                return fh.read()
        except OSError as exc:
            raise FetchError(f"cannot read {url}: {exc}") from exc
    if parsed.scheme in ("http", "https"):
        try:
            with urllib.request.urlopen(url, timeout=timeout) as resp:
                return resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise FetchError(f"cannot fetch {url}: {exc}") from exc
    raise UnsupportedSchemeError(f"unsupported url scheme {parsed.scheme!r}: {url}")


def fetch(record: FirmwareRecord, cache_dir, timeout: float = 60.0) -> FirmwareRecord:
    """Store the image under ``cache_dir/<checksum>.bin`` and return the record with ``local_path`` set.

    A cached file whose MD5 still matches is reused without any transfer.
    Downloads go to a temporary file that is renamed into place only after the
    checksum has been verified.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    dest = cache_dir / f"{record.checksum}.bin"
    with _lock_for(str(dest.resolve())):
        if dest.exists() and _md5_file(dest) == record.checksum:
            return replace(record, local_path=str(dest))
        data = _download(record.url, timeout)
        digest = md5_hex(data)
        if digest != record.checksum:
            raise IntegrityError(f"{record.firmware_name}: md5 {digest} != manifest checksum {record.checksum}")
        fd, tmp = tempfile.mkstemp(dir=cache_dir, prefix=f".{record.checksum}.", suffix=".part")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, dest)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return replace(record, local_path=str(dest))
