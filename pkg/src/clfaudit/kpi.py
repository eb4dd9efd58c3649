"""The result record every KPI function hands to the report."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

from . import rag

APPLICABLE = "applicable"
NOT_APPLICABLE = "not_applicable"
QUALITATIVE = "qualitative"


@dataclass(frozen=True)
class KpiResult:
    kpi_id: str
    name: str
    applicability: str
    values: Union[float, dict, bool, None]
    rag: Optional[str]
    details: dict = field(default_factory=dict)
    reason: Optional[str] = None
    group_rag: Optional[dict] = None  # per-key colors when values is a map

    def __post_init__(self):
        if self.applicability == NOT_APPLICABLE:
            if self.rag is not None or not self.reason:
                raise ValueError(f"{self.kpi_id}: NotApplicable needs a reason and no color")
        elif self.applicability == APPLICABLE:
            if self.rag is None:
                raise ValueError(f"{self.kpi_id}: applicable KPI needs a color")
            vals = self.values.values() if isinstance(self.values, dict) else [self.values]
            for v in vals:
                # +inf is the VIF collinearity sentinel; NaN never is
                if v is None or math.isnan(float(v)):
                    raise ValueError(f"{self.kpi_id}: non-numeric KPI value {v!r}")

    @property
    def is_applicable(self) -> bool:
        return self.applicability == APPLICABLE


def scored(kpi_id: str, values, details: Optional[dict] = None) -> KpiResult:
    """Build an applicable result; maps get a color per entry and the worst one as headline."""
    name = rag.spec_for(kpi_id).name
    details = dict(details or {})
    if isinstance(values, dict):
        if not values:
            return not_applicable(kpi_id, "no group produced a value", details)
        values = {str(k): float(v) for k, v in values.items()}
        colors = {k: rag.rag_score(kpi_id, v) for k, v in values.items()}
        return KpiResult(kpi_id, name, APPLICABLE, values, rag.worst(colors.values()),
                         details, group_rag=colors)
    v = float(values)
    return KpiResult(kpi_id, name, APPLICABLE, v, rag.rag_score(kpi_id, v), details)


def not_applicable(kpi_id: str, reason: str, details: Optional[dict] = None) -> KpiResult:
    name = rag.spec_for(kpi_id).name
    return KpiResult(kpi_id, name, NOT_APPLICABLE, None, None, dict(details or {}), reason=str(reason))


def attestation(attested: bool) -> KpiResult:
    return KpiResult(rag.ATTESTATION_ID, rag.ATTESTATION[0], QUALITATIVE, bool(attested), None,
                     {"status": "attested" if attested else "not attested"})
