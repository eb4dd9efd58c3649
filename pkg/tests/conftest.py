import os

import numpy as np
import pytest

from clfaudit.config import parse_config
from clfaudit.data import from_arrays
from clfaudit.models import fit_logistic, fit_mlogrm, fit_random_forest
from clfaudit.pipeline import load_dataset, make_split
from clfaudit.synthetic import write_insurance_like

# Keep report timestamps stable across runs inside one test session.
os.environ.setdefault("SOURCE_DATE_EPOCH", "1700000000")


def insurance_tree(csv_path, kind="mlogrm", **extra):
    tree = {
        "dataset": {
            "path": str(csv_path),
            "features": ["age", "bmi", "children"],
            "target": "charges",
            "target_rule": {"threshold": 6000, "direction": "greater"},
            "group": "region",
            "sensitive": {"column": "sex", "privileged": "male"},
        },
        "model": {"kind": kind},
        "seed": 0,
    }
    for k, v in extra.items():
        tree[k] = v
    return tree


@pytest.fixture(scope="session")
def insurance_csv(tmp_path_factory):
    return write_insurance_like(tmp_path_factory.mktemp("data") / "insurance.csv")


@pytest.fixture(scope="session")
def insurance_split(insurance_csv, tmp_path_factory):
    cfg = parse_config(insurance_tree(insurance_csv), tmp_path_factory.mktemp("cfg"))
    return make_split(cfg, load_dataset(cfg))


@pytest.fixture(scope="session")
def mlogrm_model(insurance_split):
    return fit_mlogrm(insurance_split.train)


@pytest.fixture(scope="session")
def small_forest(insurance_split):
    return fit_random_forest(insurance_split.train, n_trees=20, max_depth=6, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def logistic_data(n, beta, alpha=0.0, seed=0):
    r = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    X = r.normal(size=(n, beta.size))
    p = 1.0 / (1.0 + np.exp(-(alpha + X @ beta)))
    y = (r.random(n) < p).astype(int)
    return from_arrays(X, y, [f"x{i}" for i in range(beta.size)])


@pytest.fixture(scope="session")
def toy_logistic():
    return fit_logistic(logistic_data(400, [1.0, -0.5, 0.25], alpha=0.3, seed=7))


# ------------------------------------------------------ acceptance lines

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
