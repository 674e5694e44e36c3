import collections
import lzma
import math
import os
import random
import struct
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _builders import gz, make_elf, tar_bytes, zip_bytes
from firmscan.unpack import (
    MAGIC_TABLE,
    FilesystemTree,
    classify_encryption,
    detect_traits,
    extract,
    safe_member_path,
    scan_signatures,
    shannon_entropy,
)

ENGLISH = (
    b"The bootloader initialises the hardware and hands control to the kernel, which "
    b"mounts the root filesystem and starts the network services that make the device "
    b"useful. Vendors rarely rebuild those services from fresh upstream sources. "
)


def reference_entropy(window: bytes) -> float:
    counts = collections.Counter(window)
    n = len(window)
    return -sum(c / n * math.log2(c / n) for c in counts.values())


def english_window():
    return (ENGLISH * (4096 // len(ENGLISH) + 1))[:4096]


# --- signatures ---

def test_scan_squashfs_at_64():
    blob = bytearray(512)
    blob[64:68] = b"hsqs"
    struct.pack_into("<H", blob, 64 + 28, 4)
    assert [(h.offset, h.format) for h in scan_signatures(bytes(blob))] == [(64, "squashfs")]


def test_scan_gzip_at_zero():
    hits = scan_signatures(gz(b"hello world"))
    assert hits[0].offset == 0 and hits[0].format == "gzip"


def test_scan_empty():
    assert scan_signatures(b"") == []


def test_scan_finds_tar_zip_xz_elf_cramfs():
    blob = (tar_bytes({"a": b"x" * 10}) + zip_bytes({"b": b"y"}) + lzma.compress(b"z")
            + make_elf() + b"\x45\x3d\xcd\x28" + bytes(16))
    formats = [h.format for h in scan_signatures(blob)]
    for fmt in ("tar", "zip", "xz", "elf", "cramfs"):
        assert fmt in formats


def test_scan_lzma_alone():
    blob = bytes(8) + lzma.compress(b"payload" * 20, format=lzma.FORMAT_ALONE)
    assert [(h.offset, h.format) for h in scan_signatures(blob)][0] == (8, "lzma")


def test_scan_jffs2_and_ext2():
    jffs2 = b"\x85\x19" + struct.pack("<H", 0xE001) + bytes(12)
    assert scan_signatures(jffs2)[0].format == "jffs2"
    ext2 = bytearray(2048)
    ext2[1080:1082] = b"\x53\xef"
    struct.pack_into("<H", ext2, 1024 + 58, 1)
    hits = scan_signatures(bytes(ext2))
    assert (hits[0].offset, hits[0].format) == (0, "ext2")


def test_scan_yaffs2():
    blob = b"\x03\x00\x00\x00\x01\x00\x00\x00\xff\xff" + b"dir\x00" + bytes(252) + b"\xff" * 64
    assert scan_signatures(blob)[0].format == "yaffs2"


def test_bare_two_byte_magic_is_not_reported():
    # 1f 8b followed by a non-deflate method byte, 85 19 with a bogus node type
    assert scan_signatures(b"\x00\x1f\x8b\x00" + bytes(20) + b"\x85\x19\xaa\xaa" + bytes(20)) == []


@settings(max_examples=200)
@given(st.binary(max_size=4096), st.lists(st.sampled_from([m.magic for m in MAGIC_TABLE if m.rel_offset == 0]),
                                           max_size=4))
def test_scan_offsets_increase_and_magic_matches(noise, magics):
    blob = noise
    for m in magics:
        blob += m + bytes(40)
    hits = scan_signatures(blob)
    offsets = [h.offset for h in hits]
    assert offsets == sorted(set(offsets))
    table = collections.defaultdict(list)
    for m in MAGIC_TABLE:
        table[m.format].append(m)
    for h in hits:
        assert h.offset + h.magic_len <= len(blob)
        assert any(blob[h.offset + m.rel_offset:h.offset + m.span] == m.magic for m in table[h.format])
    for a, b in zip(hits, hits[1:]):
        assert a.offset + a.magic_len <= b.offset


# --- entropy ---

def test_entropy_zero():
    assert shannon_entropy(bytes(4096)) == 0.0


def test_entropy_uniform():
    assert abs(shannon_entropy(bytes(range(256)) * 16) - 8.0) < 1e-9


def test_entropy_english_matches_reference():
    w = english_window()
    ref = reference_entropy(w)
    assert 3.5 <= ref <= 5.5
    assert shannon_entropy(w) == pytest.approx(ref, abs=1e-12)


def test_entropy_empty():
    with pytest.raises(ValueError):
        shannon_entropy(b"")


@given(st.binary(min_size=1, max_size=2048), st.randoms(use_true_random=False))
def test_entropy_bounded_and_permutation_invariant(data, rnd):
    h = shannon_entropy(data)
    assert 0.0 <= h <= 8.0
    shuffled = bytearray(data)
    rnd.shuffle(shuffled)
    assert shannon_entropy(bytes(shuffled)) == pytest.approx(h, abs=1e-12)
    assert h == pytest.approx(reference_entropy(data), abs=1e-9)


def test_prng_blob_is_encrypted():
    blob = random.Random(1234).randbytes(65536)
    # thresholds checked with the independent reference before trusting the verdict
    hs = [reference_entropy(blob[i:i + 4096]) for i in range(0, 65536, 4096)]
    mean = sum(hs) / len(hs)
    std = (sum((h - mean) ** 2 for h in hs) / len(hs)) ** 0.5
    assert mean > 7.5 and std < 0.3
    v = classify_encryption(blob)
    assert v.encrypted
    assert v.windows_sampled == 16
    assert v.mean_entropy == pytest.approx(mean, abs=1e-9)
    assert v.entropy_stddev == pytest.approx(std, abs=1e-9)


def test_gzip_not_encrypted():
    blob = gz(random.Random(5).randbytes(65536))
    v = classify_encryption(blob)
    assert v.mean_entropy > 7.5
    assert not v.encrypted


def test_text_not_encrypted():
    blob = (ENGLISH * (65536 // len(ENGLISH) + 1))[:65536]
    v = classify_encryption(blob)
    assert v.mean_entropy < 7.5 and not v.encrypted


def test_short_blob_single_window():
    v = classify_encryption(random.Random(3).randbytes(1000))
    assert v.windows_sampled == 1


def test_classify_deterministic():
    blob = random.Random(9).randbytes(20000)
    assert classify_encryption(blob) == classify_encryption(blob)


# --- extraction ---

def _by_suffix(tree, suffix):
    return [f for f in tree.files if f.path.endswith(suffix)]


def test_zip_tar_file_depth_two(tmp_path):
    busybox = make_elf(["BusyBox v1.21.1"])
    blob = zip_bytes({"fw.tar": tar_bytes({"bin/busybox": busybox})})
    tree = extract(blob, tmp_path / "out", 8)
    hits = _by_suffix(tree, "bin/busybox")
    assert len(hits) == 1 and hits[0].depth == 2
    assert (tree.root / hits[0].path).read_bytes() == busybox
    for f in tree.files:
        assert (tree.root / f.path).is_file()


def test_unknown_region_between_tars_is_skipped(tmp_path):
    t1 = tar_bytes({"a/one": b"1" * 100})
    t2 = tar_bytes({"b/two": b"2" * 100})
    junk = random.Random(11).randbytes(3000)
    assert scan_signatures(junk) == []
    tree = extract(t1 + junk + t2, tmp_path / "out")
    assert _by_suffix(tree, "a/one") and _by_suffix(tree, "b/two")
    skips = [e for e in tree.extraction_log if e.action == "skip"]
    # the skipped span may start inside t1's zero padding but must cover the junk
    spans = [(int(e.location.rsplit("@0x", 1)[1], 16), int(e.outcome.split(", ")[1].split()[0]))
             for e in skips]
    assert any(s <= len(t1) and s + n >= len(t1) + len(junk) for s, n in spans)


def test_nesting_bounded(tmp_path):
    blob = b"innermost payload"
    for _ in range(10):
        blob = gz(blob)
    tree = extract(blob, tmp_path / "out", 8)
    assert tree.max_depth_reached
    assert max(f.depth for f in tree.files) == 8


def test_nesting_within_bound(tmp_path):
    blob = b"innermost payload"
    for _ in range(3):
        blob = gz(blob)
    tree = extract(blob, tmp_path / "out", 8)
    assert not tree.max_depth_reached
    deepest = max(tree.files, key=lambda f: f.depth)
    assert deepest.depth == 3
    assert (tree.root / deepest.path).read_bytes() == b"innermost payload"


def test_zip_slip_rejected(tmp_path):
    blob = zip_bytes({"../evil": b"pwned", "ok/file": b"fine"})
    out = tmp_path / "out"
    tree = extract(blob, out)
    assert not (tmp_path / "evil").exists()
    assert tree.paths() == ["ok/file"]
    assert any(e.action == "reject" and "../evil" in e.location for e in tree.extraction_log)


def test_tar_absolute_and_symlink_skipped(tmp_path):
    import io
    import tarfile
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.USTAR_FORMAT) as tf:
        info = tarfile.TarInfo("/etc/passwd")
        info.size = 4
        tf.addfile(info, io.BytesIO(b"root"))
        link = tarfile.TarInfo("bin/sh")
        link.type = tarfile.SYMTYPE
        link.linkname = "/bin/busybox"
        tf.addfile(link)
    tree = extract(buf.getvalue(), tmp_path / "out")
    assert tree.files == []
    assert not Path("/etc/passwd").read_bytes() == b"root"


@pytest.mark.parametrize("name, ok", [
    ("../evil", False), ("/abs", False), ("a/../../x", False), ("..\\evil", False),
    ("C:/x", False), ("a/b", True), ("./a", True), ("", False),
])
def test_safe_member_path(name, ok):
    assert (safe_member_path(name) is not None) is ok


def test_corrupt_container_logged(tmp_path):
    good = tar_bytes({"etc/ok": b"fine"})
    broken = gz(random.Random(4).randbytes(5000))[:300]
    tree = extract(broken + bytes(100) + good, tmp_path / "out")
    assert _by_suffix(tree, "etc/ok")
    assert any(e.outcome.startswith("failed") for e in tree.extraction_log)


def test_xz_and_lzma(tmp_path):
    inner = tar_bytes({"usr/sbin/dnsmasq": make_elf(["dnsmasq-2.71"])})
    tree = extract(lzma.compress(inner), tmp_path / "a")
    assert _by_suffix(tree, "usr/sbin/dnsmasq")[0].depth == 2
    tree = extract(lzma.compress(inner, format=lzma.FORMAT_ALONE), tmp_path / "b")
    assert _by_suffix(tree, "usr/sbin/dnsmasq")


def test_gzip_original_name_used(tmp_path):
    import gzip
    import io
    buf = io.BytesIO()
    with gzip.GzipFile(filename="rootfs.tar", mode="wb", fileobj=buf, mtime=0) as fh:
        fh.write(tar_bytes({"bin/busybox": b"x"}))
    tree = extract(buf.getvalue(), tmp_path / "out")
    assert "rootfs.tar" in tree.paths()


def test_workdir_must_be_empty(tmp_path):
    (tmp_path / "junk").write_text("x")
    with pytest.raises(ValueError):
        extract(gz(b"x"), tmp_path)


def test_max_depth_validated(tmp_path):
    with pytest.raises(ValueError):
        extract(b"", tmp_path / "o", 0)


@settings(max_examples=40, deadline=None)
@given(st.binary(max_size=3000))
def test_extract_terminates_inside_workdir(tmp_path_factory, data):
    out = tmp_path_factory.mktemp("x")
    tree = extract(data, out / "w", 3)
    real = os.path.realpath(out / "w")
    for f in tree.files:
        assert os.path.realpath(tree.root / f.path).startswith(real)
        assert f.depth <= 3


def test_from_directory(tmp_path):
    (tmp_path / "bin").mkdir()
    (tmp_path / "bin" / "busybox").write_bytes(b"x")
    tree = FilesystemTree.from_directory(tmp_path)
    assert tree.paths() == ["bin/busybox"]


# --- traits ---

def test_traits_mips(tmp_path):
    tree = extract(tar_bytes({"bin/busybox": make_elf(machine=0x08)}), tmp_path / "o")
    assert detect_traits(b"", tree).architecture == "mips"


@pytest.mark.parametrize("machine, arch, big", [(0x28, "arm", False), (0x03, "x86", False),
                                                (0x3E, "x86_64", False), (0x14, "powerpc", True),
                                                (0x08, "mips", True), (0xB7, "unknown", False)])
def test_traits_architectures(tmp_path, machine, arch, big):
    tree = extract(tar_bytes({"bin/x": make_elf(machine=machine, big_endian=big)}), tmp_path / "o")
    assert detect_traits(b"", tree).architecture == arch


def test_traits_squashfs_linux_default(tmp_path):
    blob = bytearray(1024)
    blob[0:4] = b"hsqs"
    struct.pack_into("<H", blob, 28, 4)
    tree = extract(tar_bytes({"bin/busybox": make_elf()}), tmp_path / "o")
    t = detect_traits(bytes(blob), tree)
    assert t.filesystem_type == "squashfs"
    assert t.os_family == "linux"


def test_traits_os_markers():
    assert detect_traits(b"xx VxWorks 5.5 yy").os_family == "vxworks"
    assert detect_traits(b"Linux version 2.6.36 (gcc)").os_family == "linux"
    assert detect_traits(b"Microsoft Windows CE").os_family == "windows_ce"


def test_traits_unknown(tmp_path):
    tree = extract(b"", tmp_path / "o")
    t = detect_traits(random.Random(2).randbytes(4096), tree)
    assert (t.filesystem_type, t.architecture, t.os_family) == ("unknown", "unknown", "unknown")


def test_traits_marker_inside_extracted_file(tmp_path):
    blob = gz(tar_bytes({"etc/banner": b"Linux version 2.6.36 (gcc)\n"}))
    tree = extract(blob, tmp_path / "o")
    assert b"Linux version" not in blob
    assert detect_traits(blob, tree).os_family == "linux"


def test_entropy_zero_is_positive_zero():
    assert math.copysign(1.0, shannon_entropy(bytes(64))) == 1.0
