"""Tests for label-smoothed cross-entropy."""

from __future__ import annotations

import math

import numpy as np
import pytest

from autodiff.tensor import Tensor
from common.exceptions import DataError, DimensionError
from training.loss import label_smoothed_ce, smoothed_targets


class TestSmoothedTargets:
    def test_rows_are_distributions(self):
        q = smoothed_targets(np.array([0, 2]), 4, 0.1, np.float64)
        np.testing.assert_allclose(q.sum(axis=1), 1.0)
        assert q[0, 0] == pytest.approx(0.9 + 0.025)
        assert q[1, 0] == pytest.approx(0.025)

    @pytest.mark.parametrize("label", [-1, 3])
    def test_out_of_range_label(self, label):
        with pytest.raises(DataError):
            smoothed_targets(np.array([0, label]), 3, 0.1, np.float64)


class TestLabelSmoothedCe:
    """Known values and agreement with plain cross-entropy."""

    def test_uniform_logits_without_smoothing(self, float64):
        loss = label_smoothed_ce(Tensor(np.zeros((3, 2))), np.array([0, 1, 0]), eps=0.0)
        assert loss.item() == pytest.approx(math.log(2))

    def test_uniform_logits_with_smoothing(self, float64):
        loss = label_smoothed_ce(Tensor(np.zeros((2, 4))), np.array([1, 3]), eps=0.1)
        assert loss.item() == pytest.approx(math.log(4))

    def test_two_class_known_value(self, float64):
        loss = label_smoothed_ce(Tensor(np.array([[math.log(2), 0.0]])), np.array([0]), eps=0.1)
        assert loss.item() == pytest.approx(0.4402, abs=1e-4)

    def test_zero_smoothing_equals_plain_cross_entropy(self, float64, rng):
        logits = rng.normal(size=(5, 6))
        labels = rng.integers(0, 6, size=5)
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        plain = -np.mean(log_probs[np.arange(5), labels])
        assert abs(label_smoothed_ce(Tensor(logits), labels, eps=0.0).item() - plain) < 1e-7

    def test_gradient_is_softmax_minus_targets(self, float64, rng):
        logits = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        labels = np.array([0, 1, 2, 1])
        label_smoothed_ce(logits, labels, eps=0.2).backward()
        probs = np.exp(logits.data) / np.exp(logits.data).sum(axis=1, keepdims=True)
        expected = (probs - smoothed_targets(labels, 3, 0.2, np.float64)) / 4
        np.testing.assert_allclose(logits.grad, expected, atol=1e-12)

    def test_logits_must_be_two_dimensional(self, float64):
        with pytest.raises(DimensionError):
            label_smoothed_ce(Tensor(np.zeros(3)), np.array([0]))

    def test_batch_mismatch(self, float64):
        with pytest.raises(DimensionError):
            label_smoothed_ce(Tensor(np.zeros((2, 3))), np.array([0, 1, 2]))

    def test_bad_label(self, float64):
        with pytest.raises(DataError):
            label_smoothed_ce(Tensor(np.zeros((1, 3))), np.array([5]))
