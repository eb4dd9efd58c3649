"""Red/Amber/Green band table for every quantitative KPI.

Each KPI owns a closed range split into three intervals with explicit
endpoint ownership, so every value in range maps to exactly one color.
Symbolic thresholds (``~0.8``, ``<<0.8``) are pinned to a 0.05-wide Amber
window; where two bands leave a point unassigned the lower band takes it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnknownKpi

RED, AMBER, GREEN = "Red", "Amber", "Green"
COLOR_RANK = {RED: 0, AMBER: 1, GREEN: 2}
HIGHER_BETTER, LOWER_BETTER = "higher-better", "lower-better"
INF = math.inf

# Values this close outside a KPI's range are treated as the nearest endpoint
# (AUC computed as 1.0000000000000002 and the like).
RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, x: float) -> bool:
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def text(self) -> str:
        lo = "-inf" if self.lo == -INF else f"{self.lo:g}"
        hi = "inf" if self.hi == INF else f"{self.hi:g}"
        return f"{'[' if self.lo_closed else '('}{lo}, {hi}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True)
class KpiSpec:
    kpi_id: str
    name: str
    aspect: str
    sub_aspect: str
    direction: str
    bands: tuple  # ((color, Interval), ...) ordered from low to high values

    @property
    def range(self) -> Interval:
        first, last = self.bands[0][1], self.bands[-1][1]
        return Interval(first.lo, last.hi, first.lo_closed, last.hi_closed)


def _iv(lo, hi, lo_closed, hi_closed):
    return Interval(float(lo), float(hi), lo_closed, hi_closed)


def _lower_better(cut_amber: float, cut_red: float, amber_closed_lo: bool, amber_closed_hi: bool,
                  lo=0.0, hi=INF, hi_closed=True):
    """Green below ``cut_amber``, Red above ``cut_red``; Amber ownership set by the flags."""
    return (
        (GREEN, _iv(lo, cut_amber, True, not amber_closed_lo)),
        (AMBER, _iv(cut_amber, cut_red, amber_closed_lo, amber_closed_hi)),
        (RED, _iv(cut_red, hi, not amber_closed_hi, hi_closed)),
    )


def _higher_better(cut_amber: float, cut_green: float, lo=0.0, hi=1.0):
    """Red in [lo, cut_amber), Amber in [cut_amber, cut_green), Green in [cut_green, hi]."""
    return (
        (RED, _iv(lo, cut_amber, True, False)),
        (AMBER, _iv(cut_amber, cut_green, True, False)),
        (GREEN, _iv(cut_green, hi, True, True)),
    )


_MODEL, _DISC, _EXPL = "Model", "Discrimination", "Transparency & explainability"
_ASSUME, _ACC, _ROB = "Formulation of relevant assumptions", "Accuracy of predictions", "Robustness"
_GROUP, _INDIV = "Group fairness", "Individual fairness"
_ATTR, _CF = "Feature attribution accuracy", "Counterfactual accuracy"

# p-value tests: Red p <= 0.05, Amber (0.05, 0.1], Green above.
_PVALUE = (
    (RED, _iv(0.0, 0.05, True, True)),
    (AMBER, _iv(0.05, 0.1, False, True)),
    (GREEN, _iv(0.1, 1.0, False, True)),
)
# SP and the Diff_Ind family: Green < 0.2, Amber [0.2, 0.25], Red > 0.25.
_RATIO_GAP = _lower_better(0.2, 0.25, True, True)

KPI_TABLE: dict[str, KpiSpec] = {s.kpi_id: s for s in (
    KpiSpec("1.1.2a", "VIF", _MODEL, _ASSUME, LOWER_BETTER, _lower_better(1.0, 5.0, True, True)),
    KpiSpec("1.1.2b", "SWT", _MODEL, _ASSUME, HIGHER_BETTER, _PVALUE),
    KpiSpec("1.1.2c", "BPT", _MODEL, _ASSUME, HIGHER_BETTER, _PVALUE),
    KpiSpec("1.2.1", "AUC-ROC", _MODEL, _ACC, HIGHER_BETTER, _higher_better(0.5, 0.8)),
    KpiSpec("1.2.2", "F1-score", _MODEL, _ACC, HIGHER_BETTER, _higher_better(0.5, 0.8)),
    KpiSpec("1.3.1", "TSVR", _MODEL, _ROB, LOWER_BETTER, _lower_better(0.1, 0.3, True, False)),
    # integer counts: Green 0..5, Amber 6..10; (5, 6) goes to Amber
    KpiSpec("1.3.2", "CSVP", _MODEL, _ROB, LOWER_BETTER, _lower_better(5.0, 10.0, False, True)),
    KpiSpec("2.1.1", "EqualOdds", _DISC, _GROUP, LOWER_BETTER,
            _lower_better(0.1, 0.2, True, True, hi=1.0)),
    KpiSpec("2.1.2a", "DI", _DISC, _GROUP, HIGHER_BETTER, (
        (RED, _iv(0.0, 0.75, True, False)),
        (AMBER, _iv(0.75, 0.8, True, True)),
        (GREEN, _iv(0.8, 1.0, False, True)),
    )),
    KpiSpec("2.1.2b", "SP", _DISC, _GROUP, LOWER_BETTER, _lower_better(0.2, 0.25, True, True, hi=1.0)),
    KpiSpec("2.2.1", "Diff_Ind", _DISC, _INDIV, LOWER_BETTER, _RATIO_GAP),
    KpiSpec("2.2.2", "Diff_Ind_GRP", _DISC, _INDIV, LOWER_BETTER, _RATIO_GAP),
    KpiSpec("3.1.1", "rho_order", _EXPL, _ATTR, HIGHER_BETTER, _higher_better(0.3, 0.8, lo=-1.0)),
    KpiSpec("3.1.2", "PUX", _EXPL, _ATTR, LOWER_BETTER, _lower_better(0.1, 0.2, True, True, hi=1.0)),
    KpiSpec("3.1.3", "POIFS", _EXPL, _ATTR, LOWER_BETTER, _lower_better(10.0, 20.0, False, True, hi=100.0)),
    KpiSpec("3.2.1", "PVCF", _EXPL, _CF, HIGHER_BETTER, _higher_better(75.0, 90.0, hi=100.0)),
    KpiSpec("3.2.2", "PCF", _EXPL, _CF, HIGHER_BETTER, _higher_better(0.7, 0.9)),
    KpiSpec("3.2.3", "SCF", _EXPL, _CF, HIGHER_BETTER, _higher_better(0.7, 0.9)),
    KpiSpec("3.2.4", "DCF", _EXPL, _CF, HIGHER_BETTER, _higher_better(0.7, 0.9)),
)}

ATTESTATION_ID = "1.1.1"
ATTESTATION = ("Presence in technical documentation", _MODEL, _ASSUME)

# Report order: Table numbering, 1.1.1 first.
KPI_ORDER = (ATTESTATION_ID,) + tuple(KPI_TABLE)


def spec_for(kpi_id: str) -> KpiSpec:
    try:
        return KPI_TABLE[kpi_id]
    except KeyError:
        raise UnknownKpi(f"no RAG bands for KPI {kpi_id!r}") from None


def rag_score(kpi_id: str, value: float) -> str:
    """Color for one scalar KPI value."""
    spec = spec_for(kpi_id)
    x = float(value)
    if math.isnan(x):
        raise ValueError(f"KPI {kpi_id}: value is NaN")
    rng = spec.range
    if x < rng.lo:
        if rng.lo - x > RANGE_SLACK:
            raise ValueError(f"KPI {kpi_id}: {x} below range {rng.text()}")
        x = rng.lo
    elif x > rng.hi:
        if x - rng.hi > RANGE_SLACK:
            raise ValueError(f"KPI {kpi_id}: {x} above range {rng.text()}")
        x = rng.hi
    for color, iv in spec.bands:
        if iv.contains(x):
            return color
    raise AssertionError(f"bands of {kpi_id} leave {x} uncovered")  # pragma: no cover


def worst(colors) -> str:
    return min(colors, key=COLOR_RANK.__getitem__)


def band_legend(kpi_id: str) -> dict:
    return {color: iv.text() for color, iv in spec_for(kpi_id).bands}
