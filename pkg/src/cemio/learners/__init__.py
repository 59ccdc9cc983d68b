"""Training and prediction for the MIO-representable model families:
logistic regression, linear SVM, CART trees, bagged tree ensembles, and
ReLU networks. All training is deterministic given (data, params, seed).

Decision rules are fixed per family so a validity margin has one meaning:
linear and ReLU-net classifiers predict the positive class at score >= 0,
single trees predict their leaf class, ensembles at averaged score >= 0.5.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .common import TrainingError
from .forest import EnsembleModel, train_forest
from .linear import LinearModel, logistic_pointwise_gradient, train_hinge, train_logistic
from .mlp import ReluNetModel, pointwise_gradient, train_mlp
from .tree import TreeModel, TreeNode, grow_tree

FAMILIES = ("lr", "svm", "cart", "rf", "mlp")

TrainedModel = LinearModel | TreeModel | EnsembleModel | ReluNetModel

__all__ = [
    "EnsembleModel", "FAMILIES", "LinearModel", "ReluNetModel", "TrainedModel",
    "TrainingError", "TreeModel", "TreeNode", "from_dict", "gradient", "load",
    "predict", "predict_index", "save", "score", "to_dict", "train", "train_arrays",
]

_DEFAULTS = {
    "lr": {"epochs": 500, "lr": 0.5},
    "svm": {"epochs": 500, "lr": 0.1, "reg": 1e-3},
    "cart": {"max_depth": 4, "min_samples_leaf": 1},
    "rf": {"n_trees": 5, "max_depth": 4, "min_samples_leaf": 1,
           "bootstrap": True, "feature_frac": 1.0},
    "mlp": {"hidden": (10,), "epochs": 200, "lr": 0.1, "batch_size": 32},
}


def _check_params(family: str, hp: dict) -> dict:
    merged = dict(_DEFAULTS[family])
    unknown = set(hp) - set(merged)
    if unknown:
        raise ValueError(f"unknown hyperparameters for {family}: {sorted(unknown)}")
    merged.update(hp)
    if merged.get("lr", 1.0) <= 0:
        raise ValueError("learning rate must be > 0")
    if merged.get("max_depth", 1) < 1:
        raise ValueError("tree max depth must be >= 1")
    if merged.get("epochs", 0) < 0:
        raise ValueError("epochs must be >= 0")
    if family == "mlp":
        hidden = merged["hidden"]
        if isinstance(hidden, int):
            hidden = (hidden,)
        hidden = tuple(int(h) for h in hidden)
        if any(h < 1 for h in hidden):
            raise ValueError("mlp hidden width must be >= 1")
        merged["hidden"] = hidden
    if family == "rf" and merged["n_trees"] < 1:
        raise ValueError("n_trees must be >= 1")
    return merged


def train_arrays(X: np.ndarray, y: np.ndarray, family: str, task: str = "classify",
                 hyperparams: dict | None = None, seed: int = 0) -> TrainedModel:
    """Train on raw arrays. For classification ``y`` holds class indices 0/1;
    for regression it holds real targets."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    hp = _check_params(family, hyperparams or {})
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)

    if family == "lr":
        w, b = train_logistic(X, y, epochs=hp["epochs"], lr=hp["lr"])
        return LinearModel(w, b, "logistic", task="classify", family="lr")
    if family == "svm":
        w, b = train_hinge(X, 2.0 * y - 1.0, epochs=hp["epochs"], lr=hp["lr"], reg=hp["reg"])
        return LinearModel(w, b, "hinge", task="classify", family="svm")
    if family == "cart":
        root = grow_tree(X, y, max_depth=hp["max_depth"],
                         min_samples_leaf=hp["min_samples_leaf"], task=task)
        return TreeModel(root, X.shape[1], task=task)
    if family == "rf":
        trees, weights = train_forest(
            X, y, n_trees=hp["n_trees"], max_depth=hp["max_depth"],
            min_samples_leaf=hp["min_samples_leaf"], bootstrap=hp["bootstrap"],
            feature_frac=hp["feature_frac"], task=task, seed=seed)
        return EnsembleModel(trees, weights, task=task)
    layers = train_mlp(X, y, hidden=hp["hidden"], epochs=hp["epochs"], lr=hp["lr"],
                       batch_size=hp["batch_size"], task=task, seed=seed)
    return ReluNetModel(layers, task=task)


def train(dataset, family: str, hyperparams: dict | None = None, seed: int = 0) -> TrainedModel:
    """Train a classifier on a Dataset's encoded matrix. The positive class
    is the lexicographically larger of the two labels."""
    classes = sorted(set(dataset.labels), key=str)
    if len(classes) != 2:
        raise ValueError(f"binary classification requires 2 classes, found {len(classes)}")
    y = np.array([classes.index(lbl) for lbl in dataset.labels], dtype=float)
    model = train_arrays(dataset.encoded, y, family, task="classify",
                         hyperparams=hyperparams, seed=seed)
    model.classes = tuple(classes)
    preds = [predict(model, row) for row in dataset.encoded]
    model.train_accuracy = float(np.mean([p == lbl for p, lbl in zip(preds, dataset.labels)]))
    return model


def score(model: TrainedModel, x) -> float:
    return model.score(np.asarray(x, dtype=float))


def predict_index(model: TrainedModel, x) -> int:
    """Predicted class index (0 or 1) under the family's decision rule."""
    s = score(model, x)
    if isinstance(model, TreeModel):
        return int(round(s))
    if isinstance(model, EnsembleModel):
        return int(s >= 0.5)
    return int(s >= 0.0)


def predict(model: TrainedModel, x):
    """Predicted class label for classifiers, raw score for regressors."""
    if model.task != "classify":
        return score(model, x)
    idx = predict_index(model, x)
    return model.classes[idx] if model.classes else idx


def gradient(model: TrainedModel, x, target):
    """Exact pointwise-loss gradient for the differentiable families."""
    if isinstance(model, LinearModel):
        return logistic_pointwise_gradient(model, x, target)
    if isinstance(model, ReluNetModel):
        return pointwise_gradient(model, x, target)
    raise TypeError(f"gradients are defined for linear and ReLU-net models, not {type(model).__name__}")


# -- serialization ----------------------------------------------------------

_FORMAT = "cemio-model"
_VERSION = 1


def to_dict(model: TrainedModel) -> dict:
    return {
        "format": _FORMAT,
        "version": _VERSION,
        "family": model.family,
        "task": model.task,
        "classes": list(model.classes),
        "train_accuracy": model.train_accuracy,
        "params": model.params_dict(),
    }


def from_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != _FORMAT:
        raise ValueError("not a model document")
    if doc.get("version") != _VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    family = doc["family"]
    params = doc["params"]
    common = {"task": doc.get("task", "classify"),
              "classes": tuple(doc.get("classes", ())),
              "train_accuracy": doc.get("train_accuracy")}
    if family in ("lr", "svm"):
        model = LinearModel(np.array(params["weights"], dtype=float),
                            float(params["bias"]), params["loss"], **common)
    elif family == "cart":
        model = TreeModel(TreeModel.unpack_node(params["root"]),
                          int(params["n_features"]), **common)
    elif family in ("rf", "gbm", "ensemble"):
        trees = [TreeModel(TreeModel.unpack_node(t["root"]), int(t["n_features"]),
                           task=common["task"]) for t in params["trees"]]
        model = EnsembleModel(trees, [float(w) for w in params["weights"]],
                              aggregation=params.get("aggregation", "average-score"), **common)
    elif family == "mlp":
        layers = [(np.array(W, dtype=float), np.array(b, dtype=float))
                  for W, b in params["layers"]]
        model = ReluNetModel(layers, **common)
    else:
        raise ValueError(f"unknown model family {family!r}")
    model.family = family
    return model


def save(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_dict(model)))


def load(path: str | Path) -> TrainedModel:
    return from_dict(json.loads(Path(path).read_text()))
