"""Firmware traits: filesystem type, CPU architecture, OS family."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .signatures import FILESYSTEM_FORMATS, scan_signatures

__all__ = ["FirmwareTraits", "detect_traits", "elf_architecture", "ELF_MACHINES", "OS_MARKERS"]

ELF_MACHINES = {
    0x08: "mips",
    0x28: "arm",
    0x03: "x86",
    0x3E: "x86_64",
    0x14: "powerpc",
}

OS_MARKERS = (
    (b"Linux version", "linux"),
    (b"VxWorks", "vxworks"),
    (b"Cisco IOS", "cisco_os"),
    (b"Windows CE", "windows_ce"),
    (b"Minix", "minix"),
    (b"MINIX", "minix"),
)


@dataclass(frozen=True)
class FirmwareTraits:
    filesystem_type: str = "unknown"
    architecture: str = "unknown"
    os_family: str = "unknown"


def elf_architecture(header: bytes):
    """Map an ELF header to an architecture name; None if not an ELF executable or shared object."""
    if len(header) < 20 or header[:4] != b"\x7fELF":
        return None
    if header[5] == 1:
        endian = "<"
    elif header[5] == 2:
        endian = ">"
    else:
        return None
    e_type, e_machine = struct.unpack_from(endian + "HH", header, 16)
    if e_type not in (2, 3):
        return None
    return ELF_MACHINES.get(e_machine, "unknown")


def _first_filesystem(data: bytes):
    for hit in scan_signatures(data):
        if hit.format in FILESYSTEM_FORMATS:
            return hit.format
    return None


def _os_marker(data: bytes):
    found = [(data.find(marker), name) for marker, name in OS_MARKERS if marker in data]
    return min(found)[1] if found else None


def detect_traits(blob: bytes, tree=None) -> FirmwareTraits:
    blob = bytes(blob)
    files = sorted(tree.files, key=lambda f: (f.depth, f.path)) if tree is not None else []
    root = Path(tree.root) if tree is not None else None

    fs = _first_filesystem(blob)
    if fs is None:
        for f in files:
            fs = _first_filesystem((root / f.path).read_bytes())
            if fs:
                break

    arch = None
    for f in files:
        with open(root / f.path, "rb") as fh:
            arch = elf_architecture(fh.read(20))
        if arch is not None:
            break

    # the raw image first, then extracted files shallowest first
    os_family = _os_marker(blob)
    for f in files:
        if os_family is not None:
            break
        os_family = _os_marker((root / f.path).read_bytes())
    if os_family is None and arch is not None and fs in ("squashfs", "jffs2"):
        os_family = "linux"

    return FirmwareTraits(fs or "unknown", arch or "unknown", os_family or "unknown")
