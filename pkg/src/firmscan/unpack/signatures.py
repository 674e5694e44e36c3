"""Magic-signature scanning over raw firmware bytes.

Short magics (two or three bytes) occur by chance in compressed or random data
roughly once per 64 KiB, so every candidate is sanity-checked against the
header fields that follow the magic before it is reported.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Optional

__all__ = ["SignatureHit", "Magic", "MAGIC_TABLE", "CONTAINER_FORMATS",
           "FILESYSTEM_FORMATS", "scan_signatures"]


@dataclass(frozen=True)
class SignatureHit:
    offset: int
    format: str
    magic_len: int


@dataclass(frozen=True)
class Magic:
    format: str
    magic: bytes
    # position of the magic bytes relative to the start of the structure
    rel_offset: int = 0
    check: Optional[Callable[[bytes, int], bool]] = None

    @property
    def span(self) -> int:
        return self.rel_offset + len(self.magic)


def _gzip_ok(blob: bytes, off: int) -> bool:
    # deflate method, reserved flag bits clear
    return len(blob) >= off + 10 and blob[off + 2] == 8 and blob[off + 3] & 0xE0 == 0


def _lzma_ok(blob: bytes, off: int) -> bool:
    if len(blob) < off + 13:
        return False
    (size,) = struct.unpack_from("<Q", blob, off + 5)
    return size == 0xFFFFFFFFFFFFFFFF or size < (1 << 32)


def _tar_ok(blob: bytes, off: int) -> bool:
    # "ustar\0" (POSIX) or "ustar " (GNU); name field must not start with NUL
    return blob[off + 262:off + 263] in (b"\x00", b" ") and blob[off] != 0


_JFFS2_NODETYPES = {0xE001, 0xE002, 0x2003, 0x2004, 0x2006, 0xE008, 0xE009}


def _jffs2_ok(blob: bytes, off: int) -> bool:
    if len(blob) < off + 12:
        return False
    (nodetype,) = struct.unpack_from("<H", blob, off + 2)
    return nodetype in _JFFS2_NODETYPES


def _ext2_ok(blob: bytes, off: int) -> bool:
    sb = off + 1024
    if len(blob) < sb + 80:
        return False
    (log_block,) = struct.unpack_from("<I", blob, sb + 24)
    (state,) = struct.unpack_from("<H", blob, sb + 58)
    (rev,) = struct.unpack_from("<I", blob, sb + 76)
    return log_block <= 6 and state in (1, 2) and rev <= 1


def _yaffs2_ok(blob: bytes, off: int) -> bool:
    # unused tail of the 256-byte name field: erased (0xFF) or zero padding only
    tail = blob[off + 10 + 200:off + 10 + 256]
    return len(tail) == 56 and tail.count(0xFF) + tail.count(0) == len(tail)


def _squashfs_ok(blob: bytes, off: int) -> bool:
    if len(blob) < off + 30:
        return False
    major = struct.unpack_from("<H" if blob[off:off + 4] == b"hsqs" else ">H", blob, off + 28)[0]
    return 1 <= major <= 4


MAGIC_TABLE = (
    Magic("gzip", b"\x1f\x8b", check=_gzip_ok),
    Magic("zip", b"PK\x03\x04"),
    Magic("tar", b"ustar", rel_offset=257, check=_tar_ok),
    Magic("xz", b"\xfd7zXZ\x00"),
    Magic("lzma", b"\x5d\x00\x00", check=_lzma_ok),
    Magic("squashfs", b"hsqs", check=_squashfs_ok),
    Magic("squashfs", b"sqsh", check=_squashfs_ok),
    Magic("jffs2", b"\x85\x19", check=_jffs2_ok),
    Magic("ext2", b"\x53\xef", rel_offset=1080, check=_ext2_ok),
    # object header: type file (1) or directory (3), parent = root (1), unused checksum 0xFFFF
    Magic("yaffs2", b"\x03\x00\x00\x00\x01\x00\x00\x00\xff\xff", check=_yaffs2_ok),
    Magic("yaffs2", b"\x01\x00\x00\x00\x01\x00\x00\x00\xff\xff", check=_yaffs2_ok),
    Magic("cramfs", b"\x45\x3d\xcd\x28"),
    Magic("elf", b"\x7fELF"),
)

CONTAINER_FORMATS = frozenset({"gzip", "zip", "tar", "xz", "lzma"})
FILESYSTEM_FORMATS = ("squashfs", "jffs2", "yaffs2", "ext2", "cramfs")


def _candidates(blob: bytes):
    for entry in MAGIC_TABLE:
        pos = blob.find(entry.magic)
        while pos != -1:
            start = pos - entry.rel_offset
            if start >= 0 and (entry.check is None or entry.check(blob, start)):
                yield SignatureHit(start, entry.format, entry.span)
            pos = blob.find(entry.magic, pos + 1)


def scan_signatures(blob: bytes) -> list:
    """All non-overlapping signature hits in ascending offset order.

    ``magic_len`` spans from the structure start through the end of its magic,
    so a tar hit covers 262 bytes and an ext2 hit 1082. When candidates
    overlap, the earliest one (then the longest) is kept.
    """
    blob = bytes(blob)
    hits = sorted(_candidates(blob), key=lambda h: (h.offset, -h.magic_len, h.format))
    out = []
    end = 0
    for h in hits:
        if h.offset < end:
            continue
        out.append(h)
        end = h.offset + h.magic_len
    return out
