"""
Finding reused libraries
========================

File names are matched against the bundled term dictionary. Shared objects
are also tried without their ``lib`` prefix and ``.so`` suffix.
"""
import tempfile
from pathlib import Path

from firmscan import FilesystemTree, default_dictionary, extract_library_version, find_libraries

files = {
    "bin/busybox": b"\x7fELF....BusyBox v1.21.1 (2013-07-08) multi-call binary\x00",
    "usr/sbin/dnsmasq": b"\x7fELF....dnsmasq-2.71\x00",
    "usr/lib/libiptables.so.4": b"\x7fELF....iptables 1.4.4\x00",
    "usr/sbin/dropbear": b"\x7fELF....no banner\x00",
    "etc/passwd": b"root:x:0:0::/root:/bin/sh\n",
}

dictionary = default_dictionary()
print(len(dictionary.canonicals()), "libraries in the seed dictionary")

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    for rel, data in files.items():
        (root / rel).parent.mkdir(parents=True, exist_ok=True)
        (root / rel).write_bytes(data)
    tree = FilesystemTree.from_directory(root)
    for occ in find_libraries(tree, dictionary, "0" * 32):
        ev = extract_library_version(root / occ.file_path, occ.canonical)
        print(f"{occ.file_path:28} {occ.canonical:10} {occ.category:12} {ev.version if ev else 'unversioned'}")
