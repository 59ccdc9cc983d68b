import numpy as np
import pytest

from cemio.dataset import Dataset
from cemio.datasets import load_fixture
from cemio.learners import train
from cemio.schema import Actionability, FeatureSchema, FeatureSpec, Kind


@pytest.fixture(scope="session")
def german():
    return load_fixture("german-credit")


@pytest.fixture(scope="session")
def heart():
    return load_fixture("heart")


@pytest.fixture(scope="session")
def german_svm(german):
    return train(german, "svm", seed=0)


@pytest.fixture(scope="session")
def heart_mlp(heart):
    return train(heart, "mlp", {"hidden": (8,), "epochs": 150}, seed=0)


def diet_schema(extra=()):
    feats = [
        FeatureSpec("weight", Kind.CONTINUOUS, lower=10.0, upper=30.0),
        FeatureSpec("diet", Kind.CATEGORICAL, levels=("vegan", "vegetarian", "omnivore")),
        *extra,
    ]
    return FeatureSchema(feats, "label")


@pytest.fixture
def diet_dataset():
    schema = diet_schema()
    rows = [
        {"weight": 10.0, "diet": "vegan"},
        {"weight": 20.0, "diet": "vegetarian"},
        {"weight": 30.0, "diet": "omnivore"},
        {"weight": 15.0, "diet": "vegan"},
    ]
    labels = ["0", "1", "1", "0"]
    return Dataset(schema, rows, labels)


def numeric_dataset(values, labels, lower=0.0, upper=1.0, name="x",
                    actionability=Actionability.FREE):
    """Single numeric feature in [lower, upper]; scaled space equals raw
    space when the bounds are [0, 1]."""
    schema = FeatureSchema(
        [FeatureSpec(name, Kind.CONTINUOUS, lower=lower, upper=upper,
                     actionability=actionability)], "label")
    rows = [{name: float(v)} for v in values]
    return Dataset(schema, rows, [str(y) for y in labels])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
