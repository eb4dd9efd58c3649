"""Audit configuration: YAML in, validated frozen objects out.

A minimal config::

    dataset:
      path: insurance.csv
      features: [age, bmi, children]
      target: charges
      target_rule: {threshold: 6000, direction: greater}
      group: region
      sensitive: {column: sex, privileged: male}
    model:
      kind: mlogrm            # logistic | mlogrm | random_forest
    seed: 0

Every other key has a default; see ``DEFAULTS`` for the full tree.
"""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .data import CATEGORICAL, CONTINUOUS, FeatureSchema, TargetRule
from .errors import ConfigError
from .explainability import ExplainabilitySamplingPlan
from .model_checks import SensitivityConfig

MODEL_KINDS = ("logistic", "mlogrm", "random_forest")
KNOWN_KPIS = ("1.1.2a", "1.1.2b", "1.1.2c", "1.2.1", "1.2.2", "1.3.1", "1.3.2",
              "2.1.1", "2.1.2a", "2.1.2b", "2.2.1", "2.2.2",
              "3.1.1", "3.1.2", "3.1.3", "3.2.1", "3.2.2", "3.2.3", "3.2.4")

DEFAULTS = {
    "seed": 0,
    "split": {"test_fraction": 0.05},
    "model": {"params": {}},
    "kpis": {
        "disable": [],
        "csvp": {"band_halfwidth": 0.01, "delta": 0.1},
        "sobol": {"samples_per_parameter": 100},
        "fairness": {"epsilon": 0.25, "target_class": 1, "equal_odds": None, "probes": []},
        "explainability": {"instances_per_repetition": 50, "repetitions": 10,
                           "background_size": 100, "coalition_budget": None,
                           "background": "training"},
        "counterfactuals": {"half_ranges": {}, "steps": {}, "jitter_max": 2},
    },
    "attestation": {"documentation_attested": False},
    "output": {"directory": "audit_out", "formats": ["json", "md"]},
}

_MODEL_PARAMS = {
    "logistic": {"max_iter", "tol"},
    "mlogrm": {"max_iter", "tol", "prior_sd", "sigma_floor", "strict_groups"},
    "random_forest": {"n_trees", "max_depth", "min_leaf", "max_features"},
}


def sub_seed(root: int, label: str) -> int:
    """Independent 63-bit seed for a named consumer of randomness."""
    digest = hashlib.sha256(f"{int(root)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and out[k]:
            out[k] = _merge(out[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _need(tree: dict, key: str, where: str):
    if not isinstance(tree, dict) or key not in tree or tree[key] is None:
        raise ConfigError(f"missing required key '{where}{key}'")
    return tree[key]


def _number(value, key: str, lo=None, hi=None, integer=False, lo_open=False, hi_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(f"'{key}' out of range: {value!r}")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ConfigError(f"'{key}' out of range: {value!r}")
    return int(value) if integer else float(value)


@dataclass(frozen=True)
class AuditConfig:
    raw: dict                  # effective tree after defaults and overrides (the echo)
    base_dir: Path
    schema: FeatureSchema
    data_path: Path
    model_kind: Optional[str]
    model_params: dict
    model_import: Optional[Path]
    test_fraction: float
    seed: int
    disabled: frozenset
    csvp_band: float
    csvp_delta: float
    sensitivity: SensitivityConfig
    epsilon: float
    target_class: int
    equal_odds: Optional[str]
    probes: tuple
    explain_plan: ExplainabilitySamplingPlan
    cf_half_ranges: dict
    cf_steps: dict
    cf_jitter_max: int
    attested: bool
    out_dir: Path
    formats: tuple

    def enabled(self, kpi_id: str) -> bool:
        return kpi_id not in self.disabled

    def seed_for(self, label: str) -> int:
        return sub_seed(self.seed, label)

    def echo(self) -> dict:
        return copy.deepcopy(self.raw)


def _schema(ds: dict) -> tuple[FeatureSchema, str]:
    path = _need(ds, "path", "dataset.")
    features = _need(ds, "features", "dataset.")
    if not isinstance(features, list) or not features or not all(isinstance(f, str) for f in features):
        raise ConfigError("'dataset.features' must be a non-empty list of column names")
    categorical = ds.get("categorical") or []
    unknown = [c for c in categorical if c not in features]
    if unknown:
        raise ConfigError(f"'dataset.categorical' names non-features: {unknown}")
    kinds = {f: (CATEGORICAL if f in categorical else CONTINUOUS) for f in features}
    rule = _need(ds, "target_rule", "dataset.")
    threshold = _number(_need(rule, "threshold", "dataset.target_rule."), "dataset.target_rule.threshold")
    direction = rule.get("direction", "greater")
    if direction not in ("greater", "less"):
        raise ConfigError(f"'dataset.target_rule.direction' must be greater or less, got {direction!r}")
    sens = ds.get("sensitive")
    sens_col = priv = None
    if sens is not None:
        sens_col = _need(sens, "column", "dataset.sensitive.")
        priv = str(_need(sens, "privileged", "dataset.sensitive."))
    try:
        schema = FeatureSchema(tuple(features), _need(ds, "target", "dataset."),
                               TargetRule(threshold, direction), kinds,
                               group=ds.get("group"), sensitive=sens_col, privileged_value=priv)
    except ValueError as exc:
        raise ConfigError(f"dataset: {exc}") from None
    return schema, path


def parse_config(tree: dict, base_dir=".", seed: Optional[int] = None,
                 out_dir: Optional[str] = None, formats=None) -> AuditConfig:
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(tree) - {"dataset", "model", "split", "seed", "kpis", "attestation", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    raw = _merge(DEFAULTS, tree)
    if seed is not None:
        raw["seed"] = int(seed)
    if out_dir is not None:
        # command-line paths are relative to the working directory, not the config
        raw["output"]["directory"] = str(Path(out_dir).resolve())
    if formats is not None:
        raw["output"]["formats"] = list(formats)
    base_dir = Path(base_dir)

    schema, path = _schema(_need(raw, "dataset", ""))
    data_path = Path(path)
    if not data_path.is_absolute():
        data_path = (base_dir / data_path).resolve()

    model = raw["model"]
    kind, imp = model.get("kind"), model.get("import")
    if (kind is None) == (imp is None):
        raise ConfigError("'model' needs exactly one of 'kind' (train) or 'import' (load)")
    if kind is not None and kind not in MODEL_KINDS:
        raise ConfigError(f"'model.kind' must be one of {MODEL_KINDS}, got {kind!r}")
    params = model.get("params") or {}
    if kind is not None:
        bad = set(params) - _MODEL_PARAMS[kind]
        if bad:
            raise ConfigError(f"'model.params' has unknown key(s) for {kind}: {sorted(bad)}")
    if kind == "mlogrm" and schema.group is None:
        raise ConfigError("'dataset.group' is required for model.kind mlogrm")
    model_import = None
    if imp is not None:
        model_import = Path(imp)
        if not model_import.is_absolute():
            model_import = (base_dir / model_import).resolve()

    test_fraction = _number(raw["split"].get("test_fraction"), "split.test_fraction", 0, 1,
                            lo_open=True, hi_open=True)
    root_seed = _number(raw["seed"], "seed", 0, integer=True)

    k = raw["kpis"]
    disabled = k.get("disable") or []
    bad = [x for x in disabled if str(x) not in KNOWN_KPIS]
    if bad:
        raise ConfigError(f"'kpis.disable' names unknown KPI(s): {bad}")
    csvp = k["csvp"]
    fair = k["fairness"]
    eo = fair.get("equal_odds")
    if eo not in (None, "per_group", "mean", "pooled"):
        raise ConfigError(f"'kpis.fairness.equal_odds' must be per_group, mean or pooled, got {eo!r}")
    tc = fair.get("target_class", 1)
    if tc not in (0, 1):
        raise ConfigError("'kpis.fairness.target_class' must be 0 or 1")
    ex = k["explainability"]
    budget = ex.get("coalition_budget")
    if budget == "exhaustive":
        budget = 0
    try:
        plan = ExplainabilitySamplingPlan(
            int(_number(ex["instances_per_repetition"], "kpis.explainability.instances_per_repetition", 1, integer=True)),
            int(_number(ex["repetitions"], "kpis.explainability.repetitions", 1, integer=True)),
            sub_seed(root_seed, "explainability"),
            int(_number(ex["background_size"], "kpis.explainability.background_size", 1, integer=True)),
            None if budget is None else int(_number(budget, "kpis.explainability.coalition_budget", 0, integer=True)),
            ex.get("background", "training"),
        )
    except ValueError as exc:
        raise ConfigError(f"kpis.explainability: {exc}") from None
    cf = k["counterfactuals"]
    for name in list(cf.get("half_ranges", {})) + list(cf.get("steps", {})):
        if name not in schema.features:
            raise ConfigError(f"'kpis.counterfactuals' names non-feature {name!r}")
    half = {f: _number(v, f"kpis.counterfactuals.half_ranges.{f}", 0) for f, v in cf.get("half_ranges", {}).items()}
    steps = {f: _number(v, f"kpis.counterfactuals.steps.{f}", 0, lo_open=True) for f, v in cf.get("steps", {}).items()}

    formats = tuple(raw["output"].get("formats") or ())
    if not formats or any(f not in ("json", "md") for f in formats):
        raise ConfigError(f"'output.formats' must list json and/or md, got {list(formats)}")
    out = Path(raw["output"]["directory"])
    if not out.is_absolute():
        out = (base_dir / out).resolve()

    return AuditConfig(
        raw=raw, base_dir=base_dir, schema=schema, data_path=data_path,
        model_kind=kind, model_params=dict(params), model_import=model_import,
        test_fraction=test_fraction, seed=root_seed, disabled=frozenset(map(str, disabled)),
        csvp_band=_number(csvp["band_halfwidth"], "kpis.csvp.band_halfwidth", 0, 0.5),
        csvp_delta=_number(csvp["delta"], "kpis.csvp.delta", 0, 2),
        sensitivity=SensitivityConfig(int(_number(k["sobol"]["samples_per_parameter"],
                                                  "kpis.sobol.samples_per_parameter", 2, integer=True))),
        epsilon=_number(fair["epsilon"], "kpis.fairness.epsilon", 0, lo_open=True),
        target_class=int(tc), equal_odds=eo, probes=tuple(fair.get("probes") or ()),
        explain_plan=plan, cf_half_ranges=half, cf_steps=steps,
        cf_jitter_max=int(_number(cf.get("jitter_max", 2), "kpis.counterfactuals.jitter_max", 0, integer=True)),
        attested=bool(raw["attestation"].get("documentation_attested", False)),
        out_dir=out, formats=formats,
    )


def load_config(path, **overrides) -> AuditConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return parse_config(tree or {}, path.parent, **overrides)
