"""Assemble KPI results into an audit report and render it as JSON or Markdown."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from . import kpi, rag
from .errors import DuplicateKpi

SCHEMA_VERSION = 1
SUMMARY_KEYS = (rag.RED, rag.AMBER, rag.GREEN, "NotApplicable")

# Conventions an auditor needs in order to read the colors; published in every report.
CONVENTIONS = {
    "fuzzy_thresholds": "DI: Red < 0.75, Amber [0.75, 0.8], Green (0.8, 1]; "
                        "SP, Diff_Ind, Diff_Ind_GRP: Green < 0.2, Amber [0.2, 0.25], Red > 0.25",
    "unassigned_boundaries": "owned by the lower (worse) band, e.g. SWT/BPT p = 0.05 is Red",
    "per_group_headline": "worst band across groups",
    "bpt_numbering": "BPT reported as 1.1.2c next to SWT",
    "disparate_impact": "min of the two rate ratios",
    "pux_probability": "sigmoid of base value plus summed attributions",
}


@dataclass(frozen=True)
class AuditReport:
    meta: dict
    documentation_attested: bool
    kpis: tuple
    summary: dict

    def kpi(self, kpi_id: str) -> kpi.KpiResult:
        for r in self.kpis:
            if r.kpi_id == kpi_id:
                return r
        raise KeyError(kpi_id)

    def headline_colors(self) -> dict:
        return {r.kpi_id: r.rag for r in self.kpis if r.rag is not None}

    @property
    def any_red(self) -> bool:
        return any(r.rag == rag.RED for r in self.kpis)


def assemble_report(results, meta: dict, attested: bool) -> AuditReport:
    if not results:
        raise ValueError("an audit report needs at least one KPI result")
    seen = {}
    for r in results:
        if r.kpi_id in seen or r.kpi_id == rag.ATTESTATION_ID:
            raise DuplicateKpi(f"KPI {r.kpi_id} reported twice")
        seen[r.kpi_id] = r
    ordered = [kpi.attestation(attested)]
    ordered += [seen[k] for k in rag.KPI_ORDER if k in seen]
    ordered += [seen[k] for k in sorted(set(seen) - set(rag.KPI_ORDER))]
    summary = dict.fromkeys(SUMMARY_KEYS, 0)
    for r in ordered:
        if r.applicability == kpi.NOT_APPLICABLE:
            summary["NotApplicable"] += 1
        elif r.rag is not None:
            summary[r.rag] += 1
    return AuditReport(dict(meta), bool(attested), tuple(ordered), summary)


# ------------------------------------------------------------ JSON

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "+inf" if obj > 0 else "-inf"
        return obj
    return str(obj)


def _kpi_doc(r: kpi.KpiResult) -> dict:
    doc = {"id": r.kpi_id, "name": r.name, "applicability": r.applicability,
           "value": r.values, "rag": r.rag, "details": r.details}
    if r.kpi_id in rag.KPI_TABLE:
        spec = rag.KPI_TABLE[r.kpi_id]
        doc.update(aspect=spec.aspect, sub_aspect=spec.sub_aspect, direction=spec.direction,
                   bands=rag.band_legend(r.kpi_id))
    else:
        _, aspect, sub = rag.ATTESTATION
        doc.update(aspect=aspect, sub_aspect=sub)
    if r.reason:
        doc["reason"] = r.reason
    if r.group_rag:
        doc["group_rag"] = r.group_rag
    return doc


def to_document(report: AuditReport) -> dict:
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "meta": {**report.meta, "conventions": CONVENTIONS},
        "attestation": {"documentation_attested": report.documentation_attested},
        "kpis": [_kpi_doc(r) for r in report.kpis],
        "summary": report.summary,
    })


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def render_json(report: AuditReport) -> str:
    return canonical_json(to_document(report))


# -------------------------------------------------------- Markdown

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "attested" if v else "not attested"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.4g}"
    if isinstance(v, dict):
        return ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items())
    return "" if v is None else str(v)


def render_markdown(report: AuditReport) -> str:
    m = report.meta
    lines = [
        "# Classifier audit report",
        "",
        f"- model: `{m.get('model_kind', '?')}`",
        f"- dataset sha256: `{m.get('dataset_sha256', '?')}`",
        f"- seed: {m.get('seed', '?')}",
        "- summary: " + ", ".join(f"{k} {report.summary[k]}" for k in SUMMARY_KEYS),
        "",
        "| Aspect | Sub-aspect | KPI | Value | RAG |",
        "|---|---|---|---|---|",
    ]
    for r in report.kpis:
        doc = _kpi_doc(r)
        label = f"{r.kpi_id} {r.name}"
        if r.applicability == kpi.NOT_APPLICABLE:
            row = (doc["aspect"], doc["sub_aspect"], f"_{label}_", f"_n/a: {r.reason}_", "_NotApplicable_")
        elif r.applicability == kpi.QUALITATIVE:
            row = (doc["aspect"], doc["sub_aspect"], label, _fmt(r.values), "Qualitative")
        else:
            val = _fmt(r.values)
            if r.group_rag:
                val = ", ".join(f"{k}: {_fmt(r.values[k])} ({c})" for k, c in r.group_rag.items())
            row = (doc["aspect"], doc["sub_aspect"], label, val, f"**{r.rag}**")
        lines.append("| " + " | ".join(s.replace("|", "/") for s in row) + " |")
    lines += ["", "Conventions:", ""] + [f"- {k}: {v}" for k, v in CONVENTIONS.items()]
    return "\n".join(lines) + "\n"


def render(report: AuditReport, fmt: str = "json") -> str:
    if fmt == "json":
        return render_json(report)
    if fmt in ("md", "markdown"):
        return render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def strip_volatile(doc: dict, keys=("timestamp",)) -> dict:
    """Copy of a report document without the run-time stamp, for determinism checks."""
    out = dict(doc)
    out["meta"] = {k: v for k, v in doc.get("meta", {}).items() if k not in keys}
    return out
