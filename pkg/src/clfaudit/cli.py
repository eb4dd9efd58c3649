"""Command line entry point: ``clfaudit {train,audit,explain} --config PATH``.

Exit codes: 0 success, 1 operational error, 2 when ``--fail-on-red`` is set
and at least one headline KPI is Red.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import load_config
from .counterfactuals import dump_sets
from .data import group_labels
from .errors import AuditError, InstanceNotFound
from .explainability import explain_instance
from .models import io as model_io
from .pipeline import _pooled, load_dataset, make_split, obtain_model, run_audit, train_model
from .report import canonical_json, render_json, render_markdown

EXIT_OK, EXIT_ERROR, EXIT_RED = 0, 1, 2
log = logging.getLogger("clfaudit")


def _formats(choice):
    return {"json": ("json",), "md": ("md",), "both": ("json", "md")}[choice] if choice else None


def _cfg(args):
    return load_config(args.config, seed=args.seed, out_dir=args.out, formats=_formats(getattr(args, "format", None)))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def cmd_train(args) -> int:
    cfg = _cfg(args)
    if cfg.model_kind is None:
        raise AuditError("'model.kind' is required for train (the config imports a model)")
    sp = make_split(cfg, load_dataset(cfg))
    model = train_model(cfg, sp.train)
    path = cfg.out_dir / "model.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    model_io.save(model, path)
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _cfg(args)
    run = run_audit(cfg, keep_records=args.dump_attributions)
    out = cfg.out_dir
    if "json" in cfg.formats:
        _write(out / "report.json", render_json(run.report))
    if "md" in cfg.formats:
        _write(out / "report.md", render_markdown(run.report))
    if args.save_model:
        out.mkdir(parents=True, exist_ok=True)
        model_io.save(run.model, out / "model.json")
    if args.dump_attributions:
        _write(out / "attributions.json", canonical_json({"records": run.attribution_records}))
    if args.dump_counterfactuals and run.cf_sets:
        out.mkdir(parents=True, exist_ok=True)
        dump_sets(run.cf_sets, run.split.train.feature_names, out / "counterfactuals.json")
    s = run.report.summary
    print(f"audit finished: Red {s['Red']}, Amber {s['Amber']}, Green {s['Green']}, "
          f"NotApplicable {s['NotApplicable']}")
    if args.fail_on_red and run.report.any_red:
        reds = [r.kpi_id for r in run.report.kpis if r.rag == "Red"]
        print(f"Red KPIs: {', '.join(reds)}", file=sys.stderr)
        return EXIT_RED
    return EXIT_OK


def _parse_rows(text: str) -> list[int]:
    try:
        rows = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InstanceNotFound(f"row selector {text!r} is not a comma-separated list of integers") from None
    if not rows:
        raise InstanceNotFound("empty row selector")
    return rows


def cmd_explain(args) -> int:
    cfg = _cfg(args)
    sp = make_split(cfg, load_dataset(cfg))
    model = obtain_model(cfg, sp.train)
    data = _pooled(sp)
    labels = group_labels(data)
    position = {int(r): i for i, r in enumerate(data.row_ids)}
    plan = cfg.explain_plan
    rng = np.random.default_rng([plan.seed, 0xB6])
    k = min(plan.background_size, sp.train.n)
    background = sp.train.X[np.sort(rng.choice(sp.train.n, size=k, replace=False))]
    records = []
    for row in _parse_rows(args.rows):
        if row not in position:
            raise InstanceNotFound(f"row {row} is not in the dataset (0..{data.n - 1} after dropping)")
        i = position[row]
        g = None if labels is None else labels[i]
        rec = explain_instance(model, data.X[i], g, background, (plan.seed, row),
                               plan.coalition_budget or None)
        rec["row"] = row
        rec["split"] = "test" if row in set(sp.test.row_ids.tolist()) else "train"
        records.append(rec)
    _write(cfg.out_dir / "attributions.json",
           canonical_json({"model_kind": model.kind, "records": records}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clfaudit", description="Technical audit of binary classifiers.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, metavar="PATH", help="YAML audit config")
        sp.add_argument("--seed", type=int, default=None, metavar="N", help="override the root seed")
        sp.add_argument("--out", default=None, metavar="DIR", help="output directory")

    t = sub.add_parser("train", help="train the configured model and export model.json")
    common(t)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("audit", help="run every enabled KPI and write the report")
    common(a)
    a.add_argument("--format", choices=("json", "md", "both"), default=None)
    a.add_argument("--fail-on-red", action="store_true", help="exit 2 if any headline KPI is Red")
    a.add_argument("--save-model", action="store_true", help="also write model.json")
    a.add_argument("--dump-attributions", action="store_true", help="write attributions.json")
    a.add_argument("--dump-counterfactuals", action="store_true", help="write counterfactuals.json")
    a.set_defaults(func=cmd_audit)

    e = sub.add_parser("explain", help="attribution records for selected rows")
    common(e)
    e.add_argument("--rows", required=True, help="comma-separated dataset row indices (0-based)")
    e.set_defaults(func=cmd_explain)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return args.func(args)
    except AuditError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
