"""Bagged tree ensembles (random forest style) and the generic weighted
tree-sum container that also covers externally supplied boosted models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tree import TreeModel, grow_tree


@dataclass
class EnsembleModel:
    trees: list[TreeModel]
    weights: list[float]
    task: str = "classify"
    classes: tuple = ()
    train_accuracy: float | None = None
    aggregation: str = "average-score"
    family: str = field(default="rf", repr=False)

    def __post_init__(self):
        if len(self.trees) != len(self.weights):
            raise ValueError("one weight per tree required")

    def score(self, x: np.ndarray) -> float:
        # fixed left-to-right summation so the value is reproducible
        total = 0.0
        for tree, w in zip(self.trees, self.weights):
            total += w * tree.score(x)
        return total

    def params_dict(self) -> dict:
        return {"trees": [t.params_dict() for t in self.trees],
                "weights": list(self.weights), "aggregation": self.aggregation}


def train_forest(X, y, n_trees=5, max_depth=4, min_samples_leaf=1,
                 bootstrap=True, feature_frac=1.0, task="classify",
                 seed=0) -> tuple[list[TreeModel], list[float]]:
    rng = np.random.default_rng(seed)
    n, d = X.shape
    trees = []
    for _ in range(n_trees):
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        k = max(1, int(round(feature_frac * d)))
        feats = np.sort(rng.choice(d, size=k, replace=False)) if k < d else np.arange(d)
        root = grow_tree(X[idx], y[idx], max_depth=max_depth,
                         min_samples_leaf=min_samples_leaf, task=task,
                         feature_ids=feats)
        trees.append(TreeModel(root, d, task=task))
    return trees, [1.0 / n_trees] * n_trees
