"""Synthetic stand-in for the US health-insurance table.

Same columns and roughly the same marginals (age, sex, bmi, children,
smoker, region, charges). It exists so the pipeline, CLI and tests can run
without the real file; numbers computed on it say nothing about the real
data.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

REGIONS = ("northeast", "northwest", "southeast", "southwest")
COLUMNS = ("age", "sex", "bmi", "children", "smoker", "region", "charges")


def insurance_like(n: int = 1338, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    age = rng.integers(18, 65, size=n)
    sex = rng.choice(["female", "male"], size=n)
    region = rng.choice(REGIONS, size=n)
    bmi_shift = np.where(region == "southeast", 3.0, 0.0)
    bmi = np.clip(rng.normal(30.0, 6.0, size=n) + bmi_shift, 16.0, 53.1).round(2)
    children = rng.choice(6, size=n, p=[0.43, 0.24, 0.18, 0.12, 0.02, 0.01])
    smoker = rng.random(n) < 0.2
    base = -4200.0 + 265.0 * age + 20.0 * bmi + 480.0 * children
    base += np.where(region == "northeast", 600.0, 0.0)
    base += np.where(sex == "male", -150.0, 0.0)
    noise = rng.gamma(2.0, 900.0, size=n) - 1800.0
    charges = base + noise + np.where(smoker, 20000.0 + 400.0 * np.maximum(bmi - 30.0, 0.0), 0.0)
    charges = np.maximum(charges, 1100.0).round(2)
    rows = []
    for i in range(n):
        rows.append({
            "age": int(age[i]), "sex": str(sex[i]), "bmi": float(bmi[i]),
            "children": int(children[i]), "smoker": "yes" if smoker[i] else "no",
            "region": str(region[i]), "charges": float(charges[i]),
        })
    return rows


def write_insurance_like(path, n: int = 1338, seed: int = 0) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        w.writerows(insurance_like(n, seed))
    return path
