import json

import pytest
import yaml

from clfaudit.cli import main
from clfaudit.report import canonical_json, strip_volatile

from conftest import insurance_tree

FAST = {
    "kpis": {
        "explainability": {"instances_per_repetition": 5, "repetitions": 2, "background_size": 20},
        "counterfactuals": {"half_ranges": {"age": 25, "bmi": 25, "children": 5}},
    },
}


def write_config(tmp_path, csv, kind="mlogrm", name="cfg.yaml", **extra):
    tree = insurance_tree(csv, kind, **{**FAST, **extra})
    if kind == "random_forest":
        tree["model"]["params"] = {"n_trees": 20, "max_depth": 6}
    path = tmp_path / name
    path.write_text(yaml.safe_dump(tree))
    return path


def audit(cfg, out, *flags):
    return main(["audit", "--config", str(cfg), "--out", str(out), *flags])


def test_audit_writes_reports(tmp_path, insurance_csv):
    cfg = write_config(tmp_path, insurance_csv)
    assert audit(cfg, tmp_path / "o", "--format", "both") == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert len(doc["kpis"]) == 20
    assert (tmp_path / "o" / "report.md").read_text().startswith("# Classifier audit report")


def test_byte_identical_reruns(tmp_path, insurance_csv, monkeypatch):
    cfg = write_config(tmp_path, insurance_csv)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    texts = []
    for _ in range(2):
        audit(cfg, tmp_path / "o", "--format", "json")
        doc = json.loads((tmp_path / "o" / "report.json").read_text())
        texts.append(canonical_json(strip_volatile(doc)))
    assert texts[0] == texts[1]


def test_fixed_epoch_gives_identical_files(tmp_path, insurance_csv):
    cfg = write_config(tmp_path, insurance_csv)
    blobs = []
    for _ in range(2):
        audit(cfg, tmp_path / "o", "--format", "json")
        blobs.append((tmp_path / "o" / "report.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_fail_on_red_exit_code(tmp_path, insurance_csv, capsys):
    cfg = write_config(tmp_path, insurance_csv)
    assert audit(cfg, tmp_path / "o", "--fail-on-red") == 2
    assert "3.2.1" in capsys.readouterr().err


def test_fail_on_red_passes_without_reds(tmp_path, insurance_csv):
    keep = ["1.2.1"]
    from clfaudit.config import KNOWN_KPIS
    cfg = write_config(tmp_path, insurance_csv, kpis={**FAST["kpis"],
                                                      "disable": [k for k in KNOWN_KPIS if k not in keep]})
    assert audit(cfg, tmp_path / "o", "--fail-on-red") == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert [k["id"] for k in doc["kpis"]] == ["1.1.1", "1.2.1"]
    assert doc["kpis"][1]["rag"] == "Green"


def test_missing_dataset(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "nope.csv")
    assert audit(cfg, tmp_path / "o") == 1
    assert str(tmp_path / "nope.csv") in capsys.readouterr().err


def test_unknown_model_kind(tmp_path, insurance_csv, capsys):
    cfg = write_config(tmp_path, insurance_csv, kind="svm")
    assert audit(cfg, tmp_path / "o") == 1
    assert "ConfigError" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert audit(tmp_path / "absent.yaml", tmp_path / "o") == 1


def test_train_then_import_matches(tmp_path, insurance_csv):
    cfg = write_config(tmp_path, insurance_csv)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "m1")]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "m2")]) == 0
    model1 = (tmp_path / "m1" / "model.json").read_bytes()
    assert model1 == (tmp_path / "m2" / "model.json").read_bytes()

    tree = yaml.safe_load(cfg.read_text())
    tree["model"] = {"import": str(tmp_path / "m1" / "model.json")}
    imp = tmp_path / "imp.yaml"
    imp.write_text(yaml.safe_dump(tree))
    audit(cfg, tmp_path / "trained", "--format", "json")
    audit(imp, tmp_path / "imported", "--format", "json")
    a = json.loads((tmp_path / "trained" / "report.json").read_text())["kpis"]
    b = json.loads((tmp_path / "imported" / "report.json").read_text())["kpis"]
    assert [k["value"] for k in a] == [k["value"] for k in b]


def test_explain_mlogrm_records(tmp_path, insurance_csv):
    cfg = write_config(tmp_path, insurance_csv)
    assert main(["explain", "--config", str(cfg), "--out", str(tmp_path / "e"), "--rows", "3,17"]) == 0
    doc = json.loads((tmp_path / "e" / "attributions.json").read_text())
    assert [r["row"] for r in doc["records"]] == [3, 17]
    for r in doc["records"]:
        assert r["intrinsic"]["space"] == r["kernel_shapley"]["space"] == "log_odds"


def test_explain_forest_records(tmp_path, insurance_csv):
    cfg = write_config(tmp_path, insurance_csv, kind="random_forest")
    assert main(["explain", "--config", str(cfg), "--out", str(tmp_path / "e"), "--rows", "0,5"]) == 0
    recs = json.loads((tmp_path / "e" / "attributions.json").read_text())["records"]
    assert len(recs) == 2 and all({"tree_shapley", "kernel_shapley"} <= set(r) for r in recs)


def test_explain_unknown_row(tmp_path, insurance_csv, capsys):
    cfg = write_config(tmp_path, insurance_csv)
    assert main(["explain", "--config", str(cfg), "--out", str(tmp_path / "e"), "--rows", "99999"]) == 1
    assert "InstanceNotFound" in capsys.readouterr().err


def test_forest_audit_not_applicable_entries(tmp_path, insurance_csv):
    cfg = write_config(tmp_path, insurance_csv, kind="random_forest")
    assert audit(cfg, tmp_path / "o", "--format", "json", "--dump-counterfactuals") == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    na = {k["id"] for k in doc["kpis"] if k["applicability"] == "not_applicable"}
    assert {"1.1.2a", "1.1.2b", "1.1.2c", "1.3.1", "3.1.2"} <= na
    assert all(k.get("reason") for k in doc["kpis"] if k["id"] in na)
    assert (tmp_path / "o" / "counterfactuals.json").exists()


def test_requires_config():
    with pytest.raises(SystemExit):
        main(["audit"])
