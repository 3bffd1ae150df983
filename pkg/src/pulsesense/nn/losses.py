"""Per-sample losses and their gradients w.r.t. the prediction.

Batch averaging is the trainer's job; these operate element-wise and accept
scalars or arrays.
"""

from __future__ import annotations

import numpy as np

BCE_CLAMP = 1e-7


def mse_loss(pred, target):
    """Squared error: loss = (pred - target)^2, grad = 2 (pred - target)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    diff = pred - target
    return diff * diff, 2.0 * diff


def bce_loss(prob, label):
    """Binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    prob = np.asarray(prob, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    p = np.clip(prob, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -(label * np.log(p) + (1.0 - label) * np.log1p(-p))
    grad = (p - label) / (p * (1.0 - p))
    return loss, grad
