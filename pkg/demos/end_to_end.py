"""
A whole corpus scan
===================

Three toy firmware images, a manifest, a dictionary, a two-entry feed and a
release list, run through the pipeline. The same run is available as
``firmscan run``.
"""
import gzip
import hashlib
import io
import json
import tarfile
import tempfile
from pathlib import Path

from firmscan import PipelineConfig, render_report, run_pipeline


def image(files):
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.USTAR_FORMAT) as tf:
        for name, data in files.items():
            info = tarfile.TarInfo(name)
            info.size = len(data)
            tf.addfile(info, io.BytesIO(data))
    return b"HDR0" + bytes(60) + gzip.compress(buf.getvalue(), mtime=0)


elf = b"\x7fELF\x01\x01\x01" + bytes(9) + b"\x02\x00\x08\x00" + bytes(32)
images = {
    "DAP-1665-1.10": (image({"bin/busybox": elf + b"BusyBox v1.20.0\x00"}), "2015-01-01"),
    "DAP-1665-1.11": (image({"bin/busybox": elf + b"BusyBox v1.21.1\x00",
                             "usr/sbin/dnsmasq": elf + b"dnsmasq-2.71\x00"}), "2017-01-01"),
    "DIR-600-2.01": (b"corrupted on the way", "2020-07-09"),
}

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    manifest = []
    for name, (blob, date) in images.items():
        (tmp / f"{name}.bin").write_bytes(blob)
        manifest.append({"firmware_name": name, "manufacturer": "D-Link", "device_type": "Router",
                         "product": name, "version": name.rsplit("-", 1)[1], "publish_time": date,
                         "url": (tmp / f"{name}.bin").as_uri(),
                         # the last checksum will not match what is on disk
                         "checksum": hashlib.md5(blob if name != "DIR-600-2.01" else b"original").hexdigest()})
    feed = [
        {"cve_id": "CVE-2018-1000517", "published": "2018-06-26", "cvss_base": 9.8, "cwe_ids": ["CWE-119"],
         "applicability": [{"cpe": "cpe:2.3:a:busybox:busybox:1.21.1:*:*:*:*:*:*:*"}]},
        {"cve_id": "CVE-2017-14495", "published": "2017-10-03", "cvss_base": 7.5, "cwe_ids": ["CWE-400"],
         "applicability": [{"cpe": "cpe:2.3:a:thekelleys:dnsmasq:*:*:*:*:*:*:*:*",
                            "version_end_including": "2.77"}]},
    ]
    for fname, doc in [("manifest.json", manifest), ("feed.json", feed),
                       ("terms.json", {"busybox": {"category": "open_source", "aliases": []},
                                       "dnsmasq": {"category": "open_source", "aliases": []}}),
                       ("releases.json", {"busybox": ["1.20.0", "1.21.1", "1.36.0"]})]:
        (tmp / fname).write_text(json.dumps(doc))

    config = PipelineConfig(tmp / "manifest.json", tmp / "cache", tmp / "terms.json", tmp / "feed.json",
                            tmp / "releases.json")
    report = run_pipeline(config)

    print(report.totals())
    print("quarantined:", [(q.firmware_name, q.stage) for q in report.quarantined])
    print(render_report(report, "csv"))
    print([s.to_dict() for s in report.update_stats if s.library == "busybox"])
    print([o.to_dict() for o in report.outdated])
