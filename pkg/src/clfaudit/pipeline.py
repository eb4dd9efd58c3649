"""End-to-end audit run: ingest, split, train or load, compute KPIs, assemble."""
from __future__ import annotations

import datetime as _dt
import hashlib
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__, _kernels, fairness, kpi, model_checks
from .config import AuditConfig
from .counterfactuals import CfGridSpec, run_counterfactual_audit
from .data import Dataset, TrainTestSplit, load_csv, split
from .errors import ConfigError, DataError
from .explainability import run_explainability_audit
from .models import FittedMlogrm, fit_logistic, fit_mlogrm, fit_random_forest
from .models import io as model_io
from .report import AuditReport, assemble_report


@dataclass
class AuditRun:
    report: AuditReport
    model: object
    split: TrainTestSplit
    attribution_records: list = field(default_factory=list)
    cf_sets: list = field(default_factory=list)


def load_dataset(cfg: AuditConfig) -> Dataset:
    if not cfg.data_path.exists():
        raise DataError(f"dataset file not found: {cfg.data_path}")
    return load_csv(cfg.data_path, cfg.schema)


def make_split(cfg: AuditConfig, data: Dataset) -> TrainTestSplit:
    return split(data, cfg.test_fraction, cfg.seed_for("split"))


def train_model(cfg: AuditConfig, train: Dataset):
    p = cfg.model_params
    if cfg.model_kind == "logistic":
        return fit_logistic(train, **p)
    if cfg.model_kind == "mlogrm":
        return fit_mlogrm(train, **p)
    if cfg.model_kind == "random_forest":
        return fit_random_forest(train, seed=cfg.seed_for("forest"), **p)
    raise ConfigError(f"'model.kind' {cfg.model_kind!r} cannot be trained")


def obtain_model(cfg: AuditConfig, train: Dataset):
    if cfg.model_import is None:
        return train_model(cfg, train)
    if not cfg.model_import.exists():
        raise ConfigError(f"'model.import' file not found: {cfg.model_import}")
    model = model_io.load(cfg.model_import)
    if tuple(model.feature_names) != tuple(train.feature_names):
        raise ConfigError(f"'model.import' features {list(model.feature_names)} do not match "
                          f"dataset features {list(train.feature_names)}")
    return model


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
           else _dt.datetime.now(_dt.timezone.utc))
    return now.replace(microsecond=0).isoformat()


def _probe_vectors(cfg: AuditConfig) -> list:
    out = []
    names = cfg.schema.features
    for n, pr in enumerate(cfg.probes):
        try:
            vec = {}
            for side in ("x_i", "x_j"):
                v = pr[side]
                vec[side] = [float(v[f]) for f in names] if isinstance(v, dict) else [float(t) for t in v]
                if len(vec[side]) != len(names):
                    raise ValueError("wrong length")
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"'kpis.fairness.probes[{n}]' needs x_i and x_j with one value per feature") from None
        out.append({**vec, "group_i": pr.get("group_i"), "group_j": pr.get("group_j")})
    return out


def _pooled(sp: TrainTestSplit) -> Dataset:
    """Train and test rows back together, in original row order."""
    order = np.argsort(np.concatenate([sp.train.row_ids, sp.test.row_ids]), kind="stable")
    cat = lambda a, b: None if a is None else np.concatenate([a, b])[order]
    t, s = sp.train, sp.test
    return replace(t, X=np.vstack([t.X, s.X])[order], y=cat(t.y, s.y), groups=cat(t.groups, s.groups),
                   sensitive=cat(t.sensitive, s.sensitive), row_ids=cat(t.row_ids, s.row_ids))


def compute_kpis(cfg: AuditConfig, model, sp: TrainTestSplit, keep_records: bool = False):
    train, test = sp.train, sp.test
    on = cfg.enabled
    results, records, cf_sets = [], [], []

    if on("1.1.2a"):
        results.append(model_checks.vif_kpi(model, train))
    if on("1.1.2b"):
        results.append(model_checks.swt_kpi(model, train))
    if on("1.1.2c"):
        results.append(model_checks.bpt_kpi(model, train))
    if on("1.2.1") or on("1.2.2"):
        auc, f1 = model_checks.accuracy_kpis(model, test)
        results += [r for r in (auc, f1) if on(r.kpi_id)]
    if on("1.3.1"):
        results.append(model_checks.tsvr_kpi(model, test, cfg.sensitivity))
    if on("1.3.2"):
        results.append(model_checks.csvp_kpi(model, test, cfg.csvp_band, cfg.csvp_delta))

    if on("2.1.1") or on("2.1.2a") or on("2.1.2b"):
        mode = cfg.equal_odds or ("mean" if model.kind == "random_forest" else "per_group")
        results += [r for r in fairness.group_fairness_kpis(model, test, mode) if on(r.kpi_id)]
    if on("2.2.1") or on("2.2.2"):
        rs = fairness.individual_fairness_kpis(model, _pooled(sp), cfg.epsilon, cfg.target_class,
                                               _probe_vectors(cfg))
        results += [r for r in rs if on(r.kpi_id)]

    if on("3.1.1") or on("3.1.2") or on("3.1.3"):
        ex = run_explainability_audit(model, train, cfg.explain_plan, keep_records)
        results += [r for r in ex.results if on(r.kpi_id)]
        records = ex.records

    if any(on(k) for k in ("3.2.1", "3.2.2", "3.2.3", "3.2.4")):
        if not cfg.cf_half_ranges:
            reason = "no counterfactual grid configured (kpis.counterfactuals.half_ranges)"
            results += [kpi.not_applicable(k, reason) for k in ("3.2.1", "3.2.2", "3.2.3", "3.2.4") if on(k)]
        else:
            spec = CfGridSpec(cfg.cf_half_ranges, cfg.cf_steps, cfg.cf_jitter_max)
            cf = run_counterfactual_audit(model, train, test, spec, cfg.seed_for("counterfactuals"))
            results += [r for r in cf.results if on(r.kpi_id)]
            cf_sets = cf.sets
    return results, records, cf_sets


def run_audit(cfg: AuditConfig, keep_records: bool = False, model=None) -> AuditRun:
    data = load_dataset(cfg)
    sp = make_split(cfg, data)
    if model is None:
        model = obtain_model(cfg, sp.train)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        results, records, cf_sets = compute_kpis(cfg, model, sp, keep_records)
    meta = {
        "tool": "clfaudit", "version": __version__, "kernel_backend": _kernels.BACKEND,
        "timestamp": _timestamp(),
        "dataset": {"path": str(cfg.data_path), "sha256": _file_sha256(cfg.data_path),
                    "rows_used": data.n, "rows_dropped": data.dropped,
                    "train_rows": sp.train.n, "test_rows": sp.test.n},
        "dataset_sha256": data.fingerprint(),
        "model_kind": model.kind,
        "model_source": "import" if cfg.model_import is not None else "trained",
        "seed": cfg.seed,
        "sub_seeds": {k: cfg.seed_for(k) for k in ("split", "forest", "explainability", "counterfactuals")},
        "config": cfg.echo(),
    }
    if isinstance(model, FittedMlogrm):
        meta["mlogrm_iterations"] = model.iterations
    report = assemble_report(results, meta, cfg.attested)
    return AuditRun(report, model, sp, records, cf_sets)
