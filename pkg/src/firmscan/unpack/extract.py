"""Recursive container extraction into a working directory.

Supported containers are gzip, zip, tar, xz and lzma. Filesystem images
(squashfs, jffs2, ...) are recognised but left packed. Output layout follows
the binwalk convention: members of the image land directly in ``workdir``;
anything unpacked from an extracted file ``F`` lands in ``_F.extracted/``
next to it.
"""
from __future__ import annotations

import io
import logging
import lzma
import os
import struct
import tarfile
import zipfile
import zlib
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import NamedTuple

from .signatures import CONTAINER_FORMATS, FILESYSTEM_FORMATS, scan_signatures

__all__ = ["TreeFile", "LogEntry", "FilesystemTree", "extract", "safe_member_path",
           "DEFAULT_MAX_DEPTH"]

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 8


class TreeFile(NamedTuple):
    path: str
    size: int
    depth: int


class LogEntry(NamedTuple):
    action: str
    location: str
    outcome: str


@dataclass
class FilesystemTree:
    root: Path
    files: list = field(default_factory=list)
    extraction_log: list = field(default_factory=list)
    max_depth_reached: bool = False

    def paths(self) -> list:
        return [f.path for f in self.files]

    @classmethod
    def from_directory(cls, root) -> "FilesystemTree":
        """Wrap an already-extracted directory; every regular file gets depth 0."""
        root = Path(root)
        files = []
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames.sort()
            for name in sorted(filenames):
                p = Path(dirpath) / name
                if p.is_symlink() or not p.is_file():
                    continue
                files.append(TreeFile(p.relative_to(root).as_posix(), p.stat().st_size, 0))
        files.sort()
        return cls(root, files)


class ContainerError(Exception):
    pass


def safe_member_path(name: str):
    """Normalise an archive member name, or return None if it would escape the root."""
    name = name.replace("\\", "/")
    if not name or name.startswith("/") or (len(name) > 1 and name[1] == ":"):
        return None
    parts = [p for p in PurePosixPath(name).parts if p not in ("", ".")]
    if not parts or ".." in parts:
        return None
    return PurePosixPath(*parts)


def _stream(decomp, data: bytes, off: int, fmt: str):
    try:
        out = decomp.decompress(data[off:])
    except (zlib.error, lzma.LZMAError, EOFError) as exc:
        raise ContainerError(str(exc)) from exc
    if not decomp.eof:
        raise ContainerError(f"truncated {fmt} stream")
    return out, len(data) - off - len(decomp.unused_data)


def _gzip_name(data: bytes, off: int):
    flags = data[off + 3]
    pos = off + 10
    if flags & 0x04:
        if pos + 2 > len(data):
            return None
        (xlen,) = struct.unpack_from("<H", data, pos)
        pos += 2 + xlen
    if flags & 0x08:
        end = data.find(b"\x00", pos)
        if end != -1:
            name = data[pos:end].decode("latin-1")
            base = PurePosixPath(name.replace("\\", "/")).name
            if base not in ("", ".", ".."):
                return base
    return None


def _unpack_gzip(data, off):
    out, used = _stream(zlib.decompressobj(31), data, off, "gzip")
    return [(_gzip_name(data, off), out)], used


def _unpack_xz(data, off):
    out, used = _stream(lzma.LZMADecompressor(lzma.FORMAT_XZ), data, off, "xz")
    return [(None, out)], used


def _unpack_lzma(data, off):
    out, used = _stream(lzma.LZMADecompressor(lzma.FORMAT_ALONE), data, off, "lzma")
    return [(None, out)], used


def _unpack_zip(data, off):
    eocd = data.find(b"PK\x05\x06", off)
    if eocd == -1 or eocd + 22 > len(data):
        raise ContainerError("zip end-of-central-directory record not found")
    (comment_len,) = struct.unpack_from("<H", data, eocd + 20)
    end = min(len(data), eocd + 22 + comment_len)
    try:
        zf = zipfile.ZipFile(io.BytesIO(data[off:end]))
    except zipfile.BadZipFile as exc:
        raise ContainerError(str(exc)) from exc
    members = []
    for info in zf.infolist():
        if info.is_dir():
            continue
        try:
            members.append((info.filename, zf.read(info)))
        except Exception as exc:  # bad CRC, encryption, unsupported method
            members.append((info.filename, ContainerError(str(exc))))
    return members, end - off


def _unpack_tar(data, off):
    try:
        tf = tarfile.open(fileobj=io.BytesIO(data[off:]), mode="r:")
    except tarfile.TarError as exc:
        raise ContainerError(str(exc)) from exc
    members = []
    with tf:
        try:
            for m in tf:
                if m.isdir():
                    continue
                if not m.isreg():
                    members.append((m.name, ContainerError("not a regular file")))
                    continue
                fh = tf.extractfile(m)
                members.append((m.name, fh.read()))
        except tarfile.TarError as exc:
            members.append(("<tar stream>", ContainerError(str(exc))))
        used = tf.offset
    if data[off + used:off + used + 1024] == bytes(1024):
        used += 1024
    return members, min(used, len(data) - off)


_HANDLERS = {
    "gzip": _unpack_gzip,
    "xz": _unpack_xz,
    "lzma": _unpack_lzma,
    "zip": _unpack_zip,
    "tar": _unpack_tar,
}
_SINGLE_STREAM = {"gzip", "xz", "lzma"}


class _Extractor:
    def __init__(self, root: Path, max_depth: int):
        self.root = root
        self.real_root = os.path.realpath(root)
        self.max_depth = max_depth
        self.files = []
        self.log = []
        self.max_depth_reached = False

    def note(self, action, location, outcome):
        self.log.append(LogEntry(action, location, outcome))

    def rel(self, path: Path) -> str:
        return path.relative_to(self.root).as_posix()

    def write(self, target_dir: Path, name: str, payload: bytes, depth: int, where: str):
        rel = safe_member_path(name)
        if rel is None:
            self.note("reject", f"{where}:{name}", "unsafe member path")
            return None
        dest = target_dir / rel
        real = os.path.realpath(dest)
        if os.path.commonpath([real, self.real_root]) != self.real_root:
            self.note("reject", f"{where}:{name}", "unsafe member path")
            return None
        if dest.exists():
            self.note("collision", self.rel(dest), "already exists, member skipped")
            return None
        try:
            dest.parent.mkdir(parents=True, exist_ok=True)
            with open(dest, "wb") as fh:
                fh.write(payload)
        except OSError as exc:
            self.note("write", f"{where}:{name}", f"failed: {exc}")
            return None
        self.files.append(TreeFile(self.rel(dest), len(payload), depth))
        return dest

    def unpack(self, data: bytes, outdir: Path, depth: int, label: str) -> list:
        """Extract every container found in ``data``; produced files get ``depth``."""
        produced = []
        extents = []
        consumed_end = 0
        for hit in scan_signatures(data):
            where = f"{label}@0x{hit.offset:x}"
            if hit.offset < consumed_end:
                continue
            if hit.format in FILESYSTEM_FORMATS:
                self.note("detect", where, f"{hit.format} image, not unpacked")
                continue
            if hit.format not in CONTAINER_FORMATS:
                continue
            try:
                members, used = _HANDLERS[hit.format](data, hit.offset)
            except ContainerError as exc:
                self.note("extract", where, f"failed: {hit.format}: {exc}")
                continue
            target = outdir if hit.offset == 0 or hit.format in _SINGLE_STREAM else outdir / f"{hit.offset:x}"
            ok = 0
            for name, payload in members:
                if isinstance(payload, Exception):
                    self.note("extract", f"{where}:{name}", f"failed: {payload}")
                    continue
                if name is None:
                    name = f"{hit.offset:x}"
                dest = self.write(target, name, payload, depth, where)
                if dest is not None:
                    produced.append(dest)
                    ok += 1
            self.note("extract", where, f"ok: {hit.format}, {ok} member(s)")
            extents.append((hit.offset, hit.offset + used))
            consumed_end = hit.offset + used
        if extents:
            cursor = 0
            for start, end in extents + [(len(data), len(data))]:
                if start > cursor:
                    self.note("skip", f"{label}@0x{cursor:x}", f"unknown data, {start - cursor} bytes")
                cursor = max(cursor, end)
        elif depth == 1:
            self.note("skip", f"{label}@0x0", f"no extractable container, {len(data)} bytes")
        return produced

    def run(self, blob: bytes):
        queue = deque((p, 1) for p in self.unpack(blob, self.root, 1, "<image>"))
        while queue:
            path, depth = queue.popleft()
            data = path.read_bytes()
            if depth >= self.max_depth:
                if any(h.format in CONTAINER_FORMATS for h in scan_signatures(data)):
                    self.max_depth_reached = True
                    self.note("depth-limit", self.rel(path), f"not descended, depth {depth}")
                continue
            outdir = path.parent / f"_{path.name}.extracted"
            for child in self.unpack(data, outdir, depth + 1, self.rel(path)):
                queue.append((child, depth + 1))


def extract(blob: bytes, workdir, max_depth: int = DEFAULT_MAX_DEPTH) -> FilesystemTree:
    """Unpack ``blob`` into the empty directory ``workdir``, recursing up to ``max_depth`` levels.

    Corrupt containers and unsafe member names are logged and skipped; they do
    not abort extraction.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    root = Path(workdir)
    root.mkdir(parents=True, exist_ok=True)
    if any(root.iterdir()):
        raise ValueError(f"workdir {root} is not empty")
    if not os.access(root, os.W_OK):
        raise PermissionError(f"workdir {root} is not writable")
    ex = _Extractor(root, max_depth)
    ex.run(bytes(blob))
    log.debug("extracted %d files into %s", len(ex.files), root)
    return FilesystemTree(root, sorted(ex.files), ex.log, ex.max_depth_reached)
