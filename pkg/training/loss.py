"""
Label-Smoothed Cross-Entropy
============================

Target distribution q = (1 - eps) * onehot(label) + eps / K, so the true class
gets 1 - eps + eps/K. Loss = mean over the batch of -sum_k q_k log softmax_k.
"""

from __future__ import annotations

import numpy as np

from autodiff import functional as ops
from autodiff.tensor import Tensor
from common.exceptions import DataError, DimensionError


def smoothed_targets(labels: np.ndarray, num_classes: int, eps: float, dtype: np.dtype) -> np.ndarray:
    """[B, K] target distributions.

    Raises:
        DataError: If a label is negative or >= K.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = labels[(labels < 0) | (labels >= num_classes)][0]
        raise DataError(f"label {bad} is outside [0, {num_classes})")
    q = np.full((labels.size, num_classes), eps / num_classes, dtype=np.float64)
    q[np.arange(labels.size), labels] += 1.0 - eps
    return q.astype(dtype)


def label_smoothed_ce(logits: Tensor, labels: np.ndarray, eps: float = 0.1) -> Tensor:
    """Scalar loss for [B, K] logits.

    Raises:
        DimensionError: If logits are not 2-D or the batch sizes differ.
        DataError: If a label is outside [0, K).
    """
    if logits.ndim != 2:
        raise DimensionError(f"logits must be [B, K], got {logits.shape}")
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise DimensionError(f"{labels.shape[0] if labels.ndim else 0} labels for a batch of {logits.shape[0]}")
    q = smoothed_targets(labels, logits.shape[1], eps, logits.dtype)
    return -(ops.log_softmax(logits, axis=-1) * Tensor.wrap(q)).sum() * (1.0 / logits.shape[0])
