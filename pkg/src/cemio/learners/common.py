"""Shared learner helpers."""

from __future__ import annotations

import numpy as np


class TrainingError(RuntimeError):
    """Non-finite loss or gradient encountered during training."""


def sigmoid(z):
    # clipping keeps exp() finite for extreme scores
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
