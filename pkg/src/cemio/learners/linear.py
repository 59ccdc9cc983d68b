"""Linear classifiers: logistic regression (full-batch gradient descent)
and linear SVM (hinge subgradient descent with L2 regularization). Both
start from zero weights so training is deterministic without a seed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .common import TrainingError, sigmoid


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    loss: str  # "logistic" | "hinge"
    task: str = "classify"
    classes: tuple = ()
    train_accuracy: float | None = None
    family: str = field(default="lr", repr=False)

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != self.weights.shape:
            raise ValueError(f"expected input of length {len(self.weights)}")
        return float(self.weights @ x + self.bias)

    def params_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias, "loss": self.loss}


def train_logistic(X, y01, epochs=500, lr=0.5) -> tuple[np.ndarray, float]:
    n = X.shape[1]
    w = np.zeros(n)
    b = 0.0
    for epoch in range(epochs):
        p = sigmoid(X @ w + b)
        err = p - y01
        gw = X.T @ err / len(y01)
        gb = float(err.mean())
        if not (np.all(np.isfinite(gw)) and np.isfinite(gb)):
            raise TrainingError(f"logistic training diverged at epoch {epoch}")
        w -= lr * gw
        b -= lr * gb
    return w, b


def train_hinge(X, ypm, epochs=500, lr=0.1, reg=1e-3) -> tuple[np.ndarray, float]:
    n = X.shape[1]
    w = np.zeros(n)
    b = 0.0
    for epoch in range(epochs):
        margin = ypm * (X @ w + b)
        active = margin < 1.0
        gw = reg * w - (ypm[active, None] * X[active]).sum(axis=0) / len(ypm)
        gb = -float(ypm[active].sum()) / len(ypm)
        if not (np.all(np.isfinite(gw)) and np.isfinite(gb)):
            raise TrainingError(f"hinge training diverged at epoch {epoch}")
        w -= lr * gw
        b -= lr * gb
    return w, b


def logistic_pointwise_gradient(model: LinearModel, x, target01: float):
    """Gradient of the logistic loss at one point, matching the closed form
    (sigmoid(score) - y) * x for the weights."""
    x = np.asarray(x, dtype=float)
    err = sigmoid(model.score(x)) - float(target01)
    return {"weights": err * x, "bias": err}
