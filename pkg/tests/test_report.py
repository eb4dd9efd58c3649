import json

import pytest

from clfaudit import kpi
from clfaudit.errors import DuplicateKpi
from clfaudit.report import (assemble_report, canonical_json, render, render_markdown,
                             strip_volatile, to_document)


def _green_results():
    return [kpi.scored("1.2.1", 0.95), kpi.scored("1.2.2", 0.9), kpi.scored("2.1.2b", 0.01)]


def test_summary_counts_all_green():
    r = assemble_report(_green_results(), {"seed": 0}, False)
    assert r.summary == {"Red": 0, "Amber": 0, "Green": 3, "NotApplicable": 0}
    assert not r.any_red


def test_per_group_headline_is_worst():
    r = kpi.scored("2.1.1", {"ne": 0.28, "nw": 0.5, "se": 0.33, "sw": 0.29})
    assert r.rag == "Red"
    assert kpi.scored("2.1.1", {"a": 0.05, "b": 0.15}).rag == "Amber"


def test_duplicates_rejected():
    with pytest.raises(DuplicateKpi):
        assemble_report(_green_results() + [kpi.scored("1.2.1", 0.7)], {}, False)
    with pytest.raises(DuplicateKpi):
        assemble_report([kpi.attestation(True)], {}, False)


def test_order_and_attestation():
    res = [kpi.scored("3.2.1", 50.28), kpi.scored("1.2.1", 0.95)]
    r = assemble_report(res, {}, True)
    assert [k.kpi_id for k in r.kpis] == ["1.1.1", "1.2.1", "3.2.1"]
    assert r.kpis[0].applicability == kpi.QUALITATIVE and r.kpis[0].values is True


def test_not_applicable_rows():
    res = _green_results() + [kpi.not_applicable("1.3.1", "forest: no parameters")]
    r = assemble_report(res, {}, False)
    assert r.summary["NotApplicable"] == 1
    md = render_markdown(r)
    assert "_NotApplicable_" in md and "forest: no parameters" in md


def test_json_shape_and_idempotence():
    r = assemble_report(_green_results() + [kpi.scored("1.1.2a", {"age": float("inf"), "bmi": 2.0})],
                        {"timestamp": "t", "seed": 1}, False)
    text = render(r, "json")
    doc = json.loads(text)
    assert list(doc) == sorted(["schema_version", "meta", "attestation", "kpis", "summary"])
    vif = next(k for k in doc["kpis"] if k["id"] == "1.1.2a")
    assert vif["value"]["age"] == "+inf"
    assert canonical_json(json.loads(text)) == text


def test_markdown_row_count():
    r = assemble_report(_green_results(), {}, False)
    md = render_markdown(r)
    rows = [ln for ln in md.splitlines() if ln.startswith("| ") and not ln.startswith("|---")]
    assert len(rows) == len(r.kpis) + 1


def test_strip_volatile():
    r = assemble_report(_green_results(), {"timestamp": "x", "seed": 2}, False)
    doc = strip_volatile(to_document(r))
    assert "timestamp" not in doc["meta"] and doc["meta"]["seed"] == 2


def test_unknown_format():
    with pytest.raises(ValueError):
        render(assemble_report(_green_results(), {}, False), "html")
