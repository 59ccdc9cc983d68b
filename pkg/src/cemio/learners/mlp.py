"""Multilayer perceptron with ReLU hidden layers and a single linear
output score, trained by minibatch SGD with seeded shuffling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .common import TrainingError, sigmoid


@dataclass
class ReluNetModel:
    layers: list[tuple[np.ndarray, np.ndarray]]  # (weight matrix, bias vector)
    task: str = "classify"
    classes: tuple = ()
    train_accuracy: float | None = None
    family: str = field(default="mlp", repr=False)

    def __post_init__(self):
        for (w0, _), (w1, _) in zip(self.layers, self.layers[1:]):
            if w0.shape[0] != w1.shape[1]:
                raise ValueError("layer dimensions do not chain")
        if self.layers[-1][0].shape[0] != 1:
            raise ValueError("final layer must have width 1")

    @property
    def n_features(self) -> int:
        return self.layers[0][0].shape[1]

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        """Activations per layer, ReLU on all but the last."""
        x = np.asarray(x, dtype=float)
        acts = [x]
        for i, (W, b) in enumerate(self.layers):
            z = W @ acts[-1] + b
            acts.append(z if i == len(self.layers) - 1 else np.maximum(z, 0.0))
        return acts

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(f"expected input of length {self.n_features}")
        return float(self.forward(x)[-1][0])

    def params_dict(self) -> dict:
        return {"layers": [[W.tolist(), b.tolist()] for W, b in self.layers]}


def pointwise_gradient(model: ReluNetModel, x, target: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Backprop gradient of the pointwise loss (logistic for classifiers,
    squared error for regressors) with respect to every layer's parameters."""
    acts = model.forward(x)
    score = acts[-1][0]
    if model.task == "classify":
        delta = np.array([sigmoid(score) - float(target)])
    else:
        delta = np.array([score - float(target)])
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for i in reversed(range(len(model.layers))):
        W, _ = model.layers[i]
        a_in = acts[i]
        grads.append((np.outer(delta, a_in), delta.copy()))
        if i > 0:
            delta = (W.T @ delta) * (acts[i] > 0)
    grads.reverse()
    return grads


def train_mlp(X, y, hidden=(10,), epochs=200, lr=0.1, batch_size=32,
              task="classify", seed=0) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(seed)
    dims = [X.shape[1], *hidden, 1]
    layers = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        layers.append((rng.normal(scale=1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)),
                       np.zeros(fan_out)))
    model = ReluNetModel(layers, task=task)
    n = len(y)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            acc = [(np.zeros_like(W), np.zeros_like(b)) for W, b in model.layers]
            for i in batch:
                for j, (gW, gb) in enumerate(pointwise_gradient(model, X[i], y[i])):
                    acc[j] = (acc[j][0] + gW, acc[j][1] + gb)
            scale = lr / len(batch)
            model.layers = [(W - scale * gW, b - scale * gb)
                            for (W, b), (gW, gb) in zip(model.layers, acc)]
            for W, b in model.layers:
                if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                    raise TrainingError(f"mlp training diverged at epoch {epoch}")
    return model.layers
