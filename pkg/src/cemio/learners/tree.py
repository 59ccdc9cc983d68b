"""CART decision trees: greedy impurity splits with midpoint thresholds.

Zero-gain splits are taken as long as a node is impure and depth remains,
so parity-style targets (where no single axis split helps) still reach
pure leaves. Ties between candidate splits break on the lowest
(column, threshold) pair for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TreeNode:
    # internal node when left/right set, leaf otherwise
    split_col: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class TreeModel:
    root: TreeNode
    n_features: int
    task: str = "classify"
    classes: tuple = ()
    train_accuracy: float | None = None
    family: str = field(default="cart", repr=False)

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(f"expected input of length {self.n_features}")
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.split_col] <= node.threshold else node.right
        return node.value

    def leaves(self) -> list[tuple[list[tuple[int, float, bool]], float]]:
        """All leaves as (path, value); path entries are
        (column, threshold, goes_left)."""
        out = []

        def walk(node, path):
            if node.is_leaf:
                out.append((list(path), node.value))
                return
            walk(node.left, path + [(node.split_col, node.threshold, True)])
            walk(node.right, path + [(node.split_col, node.threshold, False)])

        walk(self.root, [])
        return out

    def params_dict(self) -> dict:
        def pack(node):
            if node.is_leaf:
                return {"value": node.value}
            return {"split_col": node.split_col, "threshold": node.threshold,
                    "left": pack(node.left), "right": pack(node.right)}
        return {"root": pack(self.root), "n_features": self.n_features}

    @staticmethod
    def unpack_node(doc) -> TreeNode:
        if "value" in doc and "left" not in doc:
            return TreeNode(value=float(doc["value"]))
        return TreeNode(split_col=int(doc["split_col"]), threshold=float(doc["threshold"]),
                        left=TreeModel.unpack_node(doc["left"]),
                        right=TreeModel.unpack_node(doc["right"]))


def _impurity(y: np.ndarray, task: str) -> float:
    if task == "classify":
        if len(y) == 0:
            return 0.0
        p = np.mean(y)
        return 1.0 - p * p - (1.0 - p) * (1.0 - p)  # binary Gini
    return float(np.var(y)) if len(y) else 0.0


def _leaf_value(y: np.ndarray, task: str) -> float:
    if task == "classify":
        return float(np.mean(y) >= 0.5)
    return float(np.mean(y))


def grow_tree(X, y, max_depth=4, min_samples_leaf=1, task="classify",
              feature_ids=None) -> TreeNode:
    feature_ids = range(X.shape[1]) if feature_ids is None else feature_ids

    def build(idx, depth):
        yv = y[idx]
        node = TreeNode(value=_leaf_value(yv, task))
        imp = _impurity(yv, task)
        if depth >= max_depth or imp <= 1e-12 or len(idx) < 2 * min_samples_leaf:
            return node
        best = None  # (negative gain handled via > -inf floor, allow gain 0)
        for col in feature_ids:
            vals = np.unique(X[idx, col])
            if len(vals) < 2:
                continue
            for t in (vals[:-1] + vals[1:]) / 2.0:
                mask = X[idx, col] <= t
                nl = int(mask.sum())
                if nl < min_samples_leaf or len(idx) - nl < min_samples_leaf:
                    continue
                gain = imp - (nl * _impurity(yv[mask], task)
                              + (len(idx) - nl) * _impurity(yv[~mask], task)) / len(idx)
                cand = (-gain, col, t)
                if best is None or cand < best:
                    best = cand
        if best is None:
            return node
        _, col, t = best
        mask = X[idx, col] <= t
        node.split_col = int(col)
        node.threshold = float(t)
        node.left = build(idx[mask], depth + 1)
        node.right = build(idx[~mask], depth + 1)
        return node

    return build(np.arange(len(y)), 0)
