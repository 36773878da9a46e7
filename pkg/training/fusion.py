"""
Score Files and Multi-Stream Fusion
===================================

Softmax score matrices are persisted as CSV with the header

    sample_id,label,class_0,...,class_{K-1}

so streams trained on different modalities can be fused by a weighted mean
of their scores: fused = sum_i w_i S_i / sum_i w_i.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from common.exceptions import DimensionError, FormatError, ParseError, UsageError


@dataclass(frozen=True)
class ScoreSet:
    """[n, K] scores of one stream with the sample order they belong to."""

    sample_ids: tuple[str, ...]
    labels: np.ndarray
    scores: np.ndarray

    @property
    def accuracy(self) -> float:
        return accuracy_from_scores(self.scores, self.labels)


def accuracy_from_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax equals the label (0.0 for no rows)."""
    if len(labels) == 0:
        return 0.0
    return float(np.mean(np.argmax(scores, axis=1) == np.asarray(labels)))


def per_class_accuracy(scores: np.ndarray, labels: np.ndarray, num_classes: int) -> list[float | None]:
    """Accuracy restricted to each label; None for labels without samples."""
    predictions = np.argmax(scores, axis=1) if len(labels) else np.zeros(0, dtype=np.int64)
    labels = np.asarray(labels)
    result: list[float | None] = []
    for k in range(num_classes):
        mask = labels == k
        result.append(float(np.mean(predictions[mask] == k)) if mask.any() else None)
    return result


def write_scores_csv(path: str | Path, scores: ScoreSet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    num_classes = scores.scores.shape[1] if scores.scores.ndim == 2 else 0
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["sample_id", "label", *(f"class_{k}" for k in range(num_classes))])
        for sample_id, label, row in zip(scores.sample_ids, scores.labels, scores.scores, strict=True):
            writer.writerow([sample_id, int(label), *(repr(float(v)) for v in row)])
    return path


def read_scores_csv(path: str | Path) -> ScoreSet:
    """Load a score file.

    Raises:
        FormatError: If the header is not sample_id,label,class_0..
        ParseError: If a row has the wrong width or a non-numeric entry.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ParseError(f"cannot read score file {path}: {e}") from e
    if not rows or rows[0][:2] != ["sample_id", "label"]:
        raise FormatError(f"{path}: expected header sample_id,label,class_0,...")
    num_classes = len(rows[0]) - 2
    if rows[0][2:] != [f"class_{k}" for k in range(num_classes)]:
        raise FormatError(f"{path}: class columns must be class_0..class_{num_classes - 1}")

    ids: list[str] = []
    labels: list[int] = []
    values: list[list[float]] = []
    for line_number, row in enumerate(rows[1:], start=2):
        if len(row) != num_classes + 2:
            raise ParseError(f"{path}:{line_number}: expected {num_classes + 2} fields, got {len(row)}")
        try:
            labels.append(int(row[1]))
            values.append([float(v) for v in row[2:]])
        except ValueError as e:
            raise ParseError(f"{path}:{line_number}: {e}") from e
        ids.append(row[0])
    scores = np.array(values, dtype=np.float64).reshape(len(values), num_classes)
    return ScoreSet(tuple(ids), np.array(labels, dtype=np.int64), scores)


def fuse_scores(score_sets: list[ScoreSet], weights: list[float] | None = None) -> ScoreSet:
    """Weighted mean of the streams' score matrices.

    Raises:
        UsageError: If no streams are given, weights mismatch, or all weights are zero.
        DimensionError: If the matrices differ in shape or sample order.
    """
    if not score_sets:
        raise UsageError("fuse_scores needs at least one score set")
    weights = [1.0] * len(score_sets) if weights is None else list(weights)
    if len(weights) != len(score_sets):
        raise UsageError(f"{len(weights)} weights for {len(score_sets)} score sets")
    if any(w < 0 for w in weights) or sum(weights) <= 0:
        raise UsageError(f"fusion weights must be non-negative with a positive sum, got {weights}")

    first = score_sets[0]
    for other in score_sets[1:]:
        if other.scores.shape != first.scores.shape:
            raise DimensionError(f"score shapes differ: {first.scores.shape} vs {other.scores.shape}")
        if other.sample_ids != first.sample_ids:
            raise DimensionError("score sets list different samples or a different sample order")
    fused = sum(w * s.scores for w, s in zip(weights, score_sets, strict=True)) / sum(weights)
    return ScoreSet(first.sample_ids, first.labels, np.asarray(fused, dtype=np.float64))
