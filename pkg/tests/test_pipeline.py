import csv
import io
import json

import pytest

from _builders import build_fixture_corpus, write_json
from firmscan.errors import ConfigError
from firmscan.pipeline import CSV_COLUMNS, PipelineConfig, Report, emit_report, render_report, run_pipeline


def config(paths, **kw):
    return PipelineConfig(str(paths["manifest"]), str(paths["cache"]), str(paths["dict"]), str(paths["feed"]),
                          str(paths["releases"]), **kw)


@pytest.fixture
def corpus_paths(tmp_path):
    return build_fixture_corpus(tmp_path / "fixture")


def triples(report):
    return sorted((f.library, str(f.version), f.cve_id) for f in report.all_findings())


def test_three_image_corpus(corpus_paths):
    report = run_pipeline(config(corpus_paths))
    assert report.quarantined == []
    assert len(report.firmware) == 3
    assert ("busybox", "1.21.1", "CVE-2018-1000517") in triples(report)
    assert triples(report) == [("busybox", "1.21.1", "CVE-2018-1000517"), ("dnsmasq", "2.71", "CVE-2017-14495"),
                               ("tcpdump", "4.9.2", "CVE-2018-10105")]
    t = report.totals()
    assert t == {"firmware_count": 3, "library_count": 5, "finding_count": 3, "distinct_cve_count": 3}


def test_corpus_analytics(corpus_paths):
    report = run_pipeline(config(corpus_paths))
    fw = {f.record.product: f for f in report.firmware}
    (unversioned,) = fw["DIR-600-2.01"].unversioned
    assert unversioned.canonical == "dropbear" and unversioned.file_path.endswith("usr/sbin/dropbear")
    assert fw["DAP-1665-1.11"].traits.architecture == "mips"
    stats = {(s.series.normalized_product, s.library): s for s in report.update_stats}
    bb = stats[("dap-1665", "busybox")]
    assert (bb.update_count, bb.update_delays) == (1, (731,))
    labels = {(o.library, str(o.found)): o for o in report.outdated}
    assert labels[("busybox", "1.21.1")].interval_distance == 1
    assert {d["library"] for d in report.not_indexed} == {"tcpdump"}
    delays = {p["cve_id"]: p["delay_days"] for p in report.persistence}
    # CVE-2018-1000517 published 2018-06-26, firmware 2017-01-01
    assert delays["CVE-2018-1000517"] == -541
    assert report.cvss_histogram == {7.5: 1, 9.8: 2}


def test_quarantine_one(tmp_path):
    paths = build_fixture_corpus(tmp_path / "f", corrupt="DIR-600-2.01")
    report = run_pipeline(config(paths))
    assert len(report.firmware) == 2
    (q,) = report.quarantined
    assert q.firmware_name == "DIR-600-2.01" and q.stage == "fetch" and "IntegrityError" in q.diagnostic


def test_quarantine_leaves_others_unchanged(tmp_path):
    good = run_pipeline(config(build_fixture_corpus(tmp_path / "a")))
    bad = run_pipeline(config(build_fixture_corpus(tmp_path / "b", corrupt="DIR-600-2.01")))
    keep = {"DAP-1665-1.10", "DAP-1665-1.11"}
    a = [fw.to_dict() for fw in good.firmware if fw.record.product in keep]
    b = [fw.to_dict() for fw in bad.firmware]
    for d in a + b:
        d["record"].pop("url")
    assert a == b


def test_extraction_failure_quarantined(tmp_path):
    paths = build_fixture_corpus(tmp_path / "f")
    entries = json.loads(paths["manifest"].read_text())
    empty = tmp_path / "f" / "empty.bin"
    empty.write_bytes(b"")
    entries.append({**entries[0], "firmware_name": "empty", "url": empty.as_uri(),
                    "checksum": "d41d8cd98f00b204e9800998ecf8427e"})
    write_json(paths["manifest"], entries)
    report = run_pipeline(config(paths))
    assert len(report.firmware) == 3 and [q.firmware_name for q in report.quarantined] == ["empty"]


def test_empty_manifest(corpus_paths):
    write_json(corpus_paths["manifest"], [])
    report = run_pipeline(config(corpus_paths))
    assert report.firmware == [] and report.quarantined == []
    assert report.totals()["finding_count"] == 0
    assert render_report(report, "csv") == ",".join(CSV_COLUMNS) + "\n"


def test_rejected_and_duplicates_reported(corpus_paths):
    entries = json.loads(corpus_paths["manifest"].read_text())
    entries.append(dict(entries[0], firmware_name="dup"))
    entries.append({"firmware_name": "broken"})
    write_json(corpus_paths["manifest"], entries)
    report = run_pipeline(config(corpus_paths))
    assert sorted(r["reason"] for r in report.rejected) == ["duplicate_checksum", "missing_metadata"]
    assert len(report.firmware) + len(report.quarantined) == 3


def test_determinism(tmp_path, corpus_paths):
    one = emit_report(run_pipeline(config(corpus_paths, jobs=4)), tmp_path / "one.json")
    two = emit_report(run_pipeline(config(corpus_paths, jobs=1)), tmp_path / "two.json")
    assert one.read_bytes() == two.read_bytes()


def test_json_roundtrip(corpus_paths):
    report = run_pipeline(config(corpus_paths))
    text = render_report(report)
    again = Report.from_dict(json.loads(text))
    assert again == report
    assert render_report(again) == text


def test_tampered_totals_rejected(corpus_paths):
    doc = run_pipeline(config(corpus_paths)).to_dict()
    doc["totals"]["finding_count"] += 1
    with pytest.raises(ValueError):
        Report.from_dict(doc)


def test_csv(corpus_paths):
    report = run_pipeline(config(corpus_paths))
    rows = list(csv.reader(io.StringIO(render_report(report, "csv"))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 4
    by_cve = {r[3]: r for r in rows[1:]}
    assert by_cve["CVE-2018-10105"][1:5] == ["tcpdump", "4.9.2", "CVE-2018-10105", "9.8"]
    assert by_cve["CVE-2018-10105"][5] == "280"


def test_exposure_section(tmp_path):
    paths = build_fixture_corpus(tmp_path / "f")
    exp = write_json(tmp_path / "e.json", {"dnsmasq@2.71": 417335})
    report = run_pipeline(config(paths, exposure_path=str(exp)))
    counts = {(e["library"], e["version"]): e["count"] for e in report.exposure}
    assert counts[("dnsmasq", "2.71")] == 417335
    assert counts[("busybox", "1.21.1")] is None


@pytest.mark.parametrize("kw", [{"max_depth": 0}, {"output_format": "xml"}, {"jobs": 0}])
def test_bad_config(corpus_paths, kw):
    with pytest.raises(ConfigError):
        run_pipeline(config(corpus_paths, **kw))


def test_missing_input_is_config_error(corpus_paths, tmp_path):
    corpus_paths["feed"] = tmp_path / "nope.json"
    with pytest.raises(ConfigError):
        run_pipeline(config(corpus_paths))
    bad = write_json(tmp_path / "bad.json", {"x": 1})
    corpus_paths["feed"] = bad
    with pytest.raises(ConfigError):
        run_pipeline(config(corpus_paths))
