"""Bundled synthetic fixture datasets shaped like the two classic credit
and heart study tables: same feature names, kinds, level sets, and
actionability rules, with rows drawn from a seeded generative process so
the package is self-contained and tests are hermetic.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import Dataset, load_csv
from .schema import Actionability, FeatureSchema, FeatureSpec, Kind

FIXTURES = ("german-credit", "heart")


def german_credit_schema() -> FeatureSchema:
    A = Actionability
    tenure = ("unemployed", "<1", "1<=X<4", "4<=X<7", ">=7")
    longer = {lv: tenure[i + 1:] for i, lv in enumerate(tenure)}
    feats = [
        FeatureSpec("duration", Kind.CONTINUOUS, lower=-60.0, upper=90.0,
                    actionability=A.NON_NEGATIVE),
        FeatureSpec("credit_amount", Kind.CONTINUOUS, lower=-15000.0, upper=20000.0,
                    actionability=A.NON_NEGATIVE),
        FeatureSpec("instalment_commitment", Kind.CONTINUOUS, lower=-8.0, upper=10.0,
                    actionability=A.NON_NEGATIVE),
        FeatureSpec("age", Kind.CONTINUOUS, lower=18.0, upper=100.0,
                    actionability=A.NON_DECREASING),
        FeatureSpec("residence_since", Kind.INTEGER, lower=0, upper=10,
                    actionability=A.NON_DECREASING),
        FeatureSpec("existing_credits", Kind.INTEGER, lower=-4, upper=8,
                    actionability=A.NON_NEGATIVE),
        FeatureSpec("num_dependents", Kind.INTEGER, lower=-3, upper=5,
                    actionability=A.NON_NEGATIVE),
        FeatureSpec("checking_status", Kind.CATEGORICAL,
                    levels=("<0", "0<=X<200", ">=200", "no checking")),
        FeatureSpec("credit_history", Kind.CATEGORICAL,
                    levels=("critical account", "delayed previously", "existing paid",
                            "all paid", "no credits")),
        FeatureSpec("employment", Kind.CATEGORICAL, levels=tenure,
                    actionability=A.CONDITIONAL, allowed_transitions=longer),
        FeatureSpec("foreign_worker", Kind.CATEGORICAL, levels=("yes", "no"),
                    actionability=A.IMMUTABLE),
        FeatureSpec("housing", Kind.CATEGORICAL, levels=("rent", "own", "for free")),
        FeatureSpec("job", Kind.CATEGORICAL, levels=("unskilled", "skilled", "management")),
        FeatureSpec("other_parties", Kind.CATEGORICAL,
                    levels=("none", "co applicant", "guarantor")),
        FeatureSpec("other_payment_plans", Kind.CATEGORICAL, levels=("none", "bank", "stores")),
        FeatureSpec("own_telephone", Kind.CATEGORICAL, levels=("none", "yes")),
        FeatureSpec("personal_status", Kind.CATEGORICAL,
                    levels=("male single", "female div/dep/mar", "male div/sep", "male mar/wid"),
                    actionability=A.IMMUTABLE),
        FeatureSpec("property_magnitude", Kind.CATEGORICAL,
                    levels=("real estate", "life insurance", "car", "no known property")),
        FeatureSpec("purpose", Kind.CATEGORICAL,
                    levels=("radio/tv", "education", "furniture/equipment", "new car",
                            "used car", "business"),
                    actionability=A.IMMUTABLE),
        FeatureSpec("saving_status", Kind.CATEGORICAL,
                    levels=("no known savings", "<100", "100<=X<500", "500<=X<1000", ">=1000")),
    ]
    return FeatureSchema(feats, "risk")


def make_german_credit(n_rows: int = 400, seed: int = 20240) -> tuple[FeatureSchema, list[dict], list[str]]:
    rng = np.random.default_rng(seed)
    schema = german_credit_schema()
    rows, labels = [], []

    def pick(levels, p):
        return levels[rng.choice(len(levels), p=p)]

    for _ in range(n_rows):
        amount = float(np.round(np.exp(rng.normal(7.9, 0.75)), 2))
        amount = float(min(max(amount, 300.0), 15000.0))
        # duration tracks the credit amount, the causal link demos rely on
        duration = float(np.round(np.clip(amount / 400.0 + rng.normal(0, 4.5), 4, 60), 1))
        r = {
            "duration": duration,
            "credit_amount": amount,
            "instalment_commitment": float(np.round(rng.uniform(1, 4), 1)),
            "age": float(np.round(np.clip(rng.normal(36, 11), 19, 75), 1)),
            "residence_since": int(rng.integers(1, 5)),
            "existing_credits": int(rng.integers(1, 4)),
            "num_dependents": int(rng.integers(1, 3)),
            "checking_status": pick(schema.feature("checking_status").levels,
                                    [0.27, 0.27, 0.12, 0.34]),
            "credit_history": pick(schema.feature("credit_history").levels,
                                   [0.28, 0.09, 0.45, 0.09, 0.09]),
            "employment": pick(schema.feature("employment").levels,
                               [0.06, 0.17, 0.33, 0.26, 0.18]),
            "foreign_worker": pick(schema.feature("foreign_worker").levels, [0.92, 0.08]),
            "housing": pick(schema.feature("housing").levels, [0.28, 0.62, 0.10]),
            "job": pick(schema.feature("job").levels, [0.22, 0.63, 0.15]),
            "other_parties": pick(schema.feature("other_parties").levels, [0.86, 0.06, 0.08]),
            "other_payment_plans": pick(schema.feature("other_payment_plans").levels,
                                        [0.80, 0.14, 0.06]),
            "own_telephone": pick(schema.feature("own_telephone").levels, [0.58, 0.42]),
            "personal_status": pick(schema.feature("personal_status").levels,
                                    [0.52, 0.3, 0.1, 0.08]),
            "property_magnitude": pick(schema.feature("property_magnitude").levels,
                                       [0.28, 0.22, 0.33, 0.17]),
            "purpose": pick(schema.feature("purpose").levels,
                            [0.28, 0.1, 0.18, 0.22, 0.12, 0.1]),
            "saving_status": pick(schema.feature("saving_status").levels,
                                  [0.18, 0.48, 0.12, 0.12, 0.10]),
        }
        z = (
            -0.050 * (r["duration"] - 20.0)
            - 0.00040 * (r["credit_amount"] - 3200.0)
            - 0.35 * (r["instalment_commitment"] - 2.5)
            + 0.020 * (r["age"] - 33.0)
            + {"<0": -0.9, "0<=X<200": -0.1, ">=200": 0.7, "no checking": 1.0}[r["checking_status"]]
            + {"critical account": 0.6, "delayed previously": -0.3, "existing paid": 0.25,
               "all paid": -0.2, "no credits": -0.4}[r["credit_history"]]
            + {"unemployed": -0.7, "<1": -0.3, "1<=X<4": 0.0, "4<=X<7": 0.45, ">=7": 0.6}[r["employment"]]
            + {"no known savings": 0.35, "<100": -0.35, "100<=X<500": 0.0,
               "500<=X<1000": 0.3, ">=1000": 0.55}[r["saving_status"]]
            + {"rent": -0.2, "own": 0.25, "for free": 0.0}[r["housing"]]
            + {"real estate": 0.35, "life insurance": 0.1, "car": 0.0,
               "no known property": -0.35}[r["property_magnitude"]]
            + {"none": 0.0, "co applicant": -0.25, "guarantor": 0.35}[r["other_parties"]]
            + {"none": 0.12, "bank": -0.3, "stores": -0.2}[r["other_payment_plans"]]
            + rng.normal(0, 0.45)
        )
        rows.append(r)
        labels.append("good" if z > 0.45 else "bad")
    return schema, rows, labels


def heart_schema() -> FeatureSchema:
    A = Actionability
    feats = [
        FeatureSpec("age", Kind.CONTINUOUS, lower=18.0, upper=90.0, actionability=A.IMMUTABLE),
        FeatureSpec("bp", Kind.CONTINUOUS, lower=-50.0, upper=250.0, actionability=A.NON_NEGATIVE),
        FeatureSpec("sch", Kind.CONTINUOUS, lower=-100.0, upper=600.0, actionability=A.NON_NEGATIVE),
        FeatureSpec("mhrt", Kind.CONTINUOUS, lower=-50.0, upper=250.0, actionability=A.NON_NEGATIVE),
        FeatureSpec("opk", Kind.CONTINUOUS, lower=-4.0, upper=8.0, actionability=A.NON_NEGATIVE),
        FeatureSpec("chp", Kind.CATEGORICAL,
                    levels=("typical angina", "atypical angina", "nonanginal pain", "asymptomatic")),
        FeatureSpec("ecg", Kind.CATEGORICAL,
                    levels=("normal", "st-t abnormality", "left ventricular hypertrophy")),
        FeatureSpec("exian", Kind.CATEGORICAL, levels=("no", "yes")),
        FeatureSpec("fbs", Kind.CATEGORICAL, levels=("false", "true")),
        FeatureSpec("sex", Kind.CATEGORICAL, levels=("male", "female"), actionability=A.IMMUTABLE),
        FeatureSpec("slope", Kind.CATEGORICAL, levels=("upsloping", "flat", "downsloping")),
        FeatureSpec("thal", Kind.CATEGORICAL, levels=("normal", "fixed defect", "reversible defect")),
        FeatureSpec("vessel", Kind.CATEGORICAL, levels=("0", "1", "2", "3")),
    ]
    return FeatureSchema(feats, "disease")


def make_heart(n_rows: int = 300, seed: int = 7) -> tuple[FeatureSchema, list[dict], list[str]]:
    rng = np.random.default_rng(seed)
    schema = heart_schema()
    rows, labels = [], []

    def pick(levels, p):
        return levels[rng.choice(len(levels), p=p)]

    for _ in range(n_rows):
        r = {
            "age": float(np.round(np.clip(rng.normal(54, 9), 29, 78), 1)),
            "bp": float(np.round(np.clip(rng.normal(131, 17), 94, 200), 1)),
            "sch": float(np.round(np.clip(rng.normal(247, 50), 126, 420), 2)),
            "mhrt": float(np.round(np.clip(rng.normal(150, 22), 71, 205), 2)),
            "opk": float(np.round(np.clip(rng.gamma(1.4, 0.8), 0, 6), 2)),
            "chp": pick(schema.feature("chp").levels, [0.08, 0.16, 0.29, 0.47]),
            "ecg": pick(schema.feature("ecg").levels, [0.49, 0.02, 0.49]),
            "exian": pick(schema.feature("exian").levels, [0.67, 0.33]),
            "fbs": pick(schema.feature("fbs").levels, [0.85, 0.15]),
            "sex": pick(schema.feature("sex").levels, [0.68, 0.32]),
            "slope": pick(schema.feature("slope").levels, [0.47, 0.46, 0.07]),
            "thal": pick(schema.feature("thal").levels, [0.55, 0.06, 0.39]),
            "vessel": pick(schema.feature("vessel").levels, [0.59, 0.22, 0.12, 0.07]),
        }
        z = (
            0.030 * (r["age"] - 54.0)
            + 0.012 * (r["bp"] - 131.0)
            + 0.0045 * (r["sch"] - 247.0)
            - 0.024 * (r["mhrt"] - 150.0)
            + 0.55 * r["opk"]
            + {"typical angina": -0.4, "atypical angina": -0.9, "nonanginal pain": -0.6,
               "asymptomatic": 1.1}[r["chp"]]
            + {"normal": -0.2, "st-t abnormality": 0.3, "left ventricular hypertrophy": 0.25}[r["ecg"]]
            + {"no": -0.4, "yes": 0.7}[r["exian"]]
            + {"male": 0.45, "female": -0.45}[r["sex"]]
            + {"upsloping": -0.5, "flat": 0.4, "downsloping": 0.3}[r["slope"]]
            + {"normal": -0.7, "fixed defect": 0.3, "reversible defect": 0.9}[r["thal"]]
            + {"0": -0.6, "1": 0.4, "2": 0.9, "3": 1.2}[r["vessel"]]
            + rng.normal(0, 0.6)
        )
        rows.append(r)
        labels.append("presence" if z > 0.0 else "absence")
    return schema, rows, labels


def write_fixture_files(out_dir: str | Path) -> list[Path]:
    """Regenerate the bundled CSV and schema JSON files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, maker in (("german_credit", make_german_credit), ("heart", make_heart)):
        schema, rows, labels = maker()
        csv_path = out / f"{name}.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            cols = [f.name for f in schema.features] + [schema.label_column]
            writer.writerow(cols)
            for r, y in zip(rows, labels):
                writer.writerow([r[f.name] for f in schema.features] + [y])
        schema_path = out / f"{name}_schema.json"
        schema.to_json(schema_path)
        written += [csv_path, schema_path]
    return written


def fixture_paths(name: str) -> tuple[Path, Path]:
    key = name.replace("-", "_")
    if name not in FIXTURES and key not in [f.replace("-", "_") for f in FIXTURES]:
        raise ValueError(f"unknown fixture {name!r}; available: {FIXTURES}")
    base = resources.files("cemio") / "data"
    return Path(str(base / f"{key}.csv")), Path(str(base / f"{key}_schema.json"))


def load_fixture(name: str) -> Dataset:
    csv_path, schema_path = fixture_paths(name)
    schema = FeatureSchema.from_json(schema_path)
    return load_csv(csv_path, schema)


def desired_label(name: str) -> str:
    return {"german-credit": "good", "german_credit": "good",
            "heart": "absence"}[name]
