"""
Unpacking a firmware image
==========================

Build a toy image (vendor header, then gzip, then tar) and let the extractor
find and recurse through the containers.
"""
import gzip
import io
import struct
import tarfile
import tempfile
from pathlib import Path

from firmscan import detect_traits, extract

# a big-endian MIPS ELF header is enough for architecture detection
elf = b"\x7fELF\x01\x02\x01" + bytes(9) + struct.pack(">HHI", 2, 8, 1) + bytes(28) + b"BusyBox v1.21.1\x00"

buf = io.BytesIO()
with tarfile.open(fileobj=buf, mode="w", format=tarfile.USTAR_FORMAT) as tf:
    for name, data in {"bin/busybox": elf, "etc/banner": b"Linux version 2.6.36\n"}.items():
        info = tarfile.TarInfo(name)
        info.size = len(data)
        tf.addfile(info, io.BytesIO(data))
image = b"HDR0" + bytes(60) + gzip.compress(buf.getvalue(), mtime=0)

with tempfile.TemporaryDirectory() as tmp:
    tree = extract(image, Path(tmp) / "out", max_depth=8)
    for f in tree.files:
        print(f"depth {f.depth}  {f.size:6}  {f.path}")
    for entry in tree.extraction_log:
        print("  log:", *entry)
    print(detect_traits(image, tree))

    # hostile archive members never leave the output directory
    zbuf = io.BytesIO()
    import zipfile
    with zipfile.ZipFile(zbuf, "w") as zf:
        zf.writestr("../evil", b"x")
    tree = extract(zbuf.getvalue(), Path(tmp) / "slip")
    print(tree.files, [e for e in tree.extraction_log if e.action == "reject"])
