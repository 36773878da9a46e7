"""Tests for score files, accuracy helpers and multi-stream fusion."""

from __future__ import annotations

import numpy as np
import pytest

from common.exceptions import DimensionError, FormatError, ParseError, UsageError
from training.fusion import (
    ScoreSet,
    accuracy_from_scores,
    fuse_scores,
    per_class_accuracy,
    read_scores_csv,
    write_scores_csv,
)

IDS = ("a", "b", "c", "d")
LABELS = np.array([0, 1, 0, 1])


@pytest.fixture
def joint_stream() -> ScoreSet:
    """Right on the first two samples, confidently wrong on the last two."""
    return ScoreSet(IDS, LABELS, np.array([[0.9, 0.1], [0.2, 0.8], [0.4, 0.6], [0.55, 0.45]]))


@pytest.fixture
def bone_stream() -> ScoreSet:
    """Barely wrong on the first two samples, confidently right on the last two."""
    return ScoreSet(IDS, LABELS, np.array([[0.45, 0.55], [0.55, 0.45], [0.95, 0.05], [0.1, 0.9]]))


class TestAccuracy:
    def test_perfect_scores(self):
        assert accuracy_from_scores(np.eye(3), np.arange(3)) == 1.0

    def test_empty(self):
        assert accuracy_from_scores(np.zeros((0, 3)), np.zeros(0, dtype=np.int64)) == 0.0

    def test_invariant_to_positive_affine_rows(self, rng):
        scores = rng.normal(size=(20, 5))
        labels = rng.integers(0, 5, size=20)
        scale = rng.uniform(0.1, 10.0, size=(20, 1))
        shift = rng.normal(size=(20, 1))
        assert accuracy_from_scores(scale * scores + shift, labels) == accuracy_from_scores(scores, labels)

    def test_per_class(self):
        scores = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        assert per_class_accuracy(scores, np.array([0, 0, 1]), 3) == [0.5, 1.0, None]


class TestFuseScores:
    """Weighted mean of aligned score matrices."""

    def test_self_fusion_keeps_accuracy(self, joint_stream):
        assert fuse_scores([joint_stream, joint_stream]).accuracy == joint_stream.accuracy

    def test_one_hot_weights_select_a_stream(self, joint_stream, bone_stream):
        fused = fuse_scores([joint_stream, bone_stream], [1.0, 0.0])
        assert fused.accuracy == joint_stream.accuracy
        np.testing.assert_allclose(fused.scores, joint_stream.scores)

    def test_complementary_streams(self, joint_stream, bone_stream):
        assert joint_stream.accuracy == 0.5
        assert bone_stream.accuracy == 0.5
        assert fuse_scores([joint_stream, bone_stream]).accuracy == 1.0

    def test_fused_rows_sum_to_one(self, joint_stream, bone_stream):
        fused = fuse_scores([joint_stream, bone_stream], [2.0, 1.0])
        np.testing.assert_allclose(fused.scores.sum(axis=1), 1.0)

    def test_no_streams(self):
        with pytest.raises(UsageError):
            fuse_scores([])

    @pytest.mark.parametrize("weights", [[1.0], [0.0, 0.0], [-1.0, 2.0]])
    def test_bad_weights(self, joint_stream, bone_stream, weights):
        with pytest.raises(UsageError):
            fuse_scores([joint_stream, bone_stream], weights)

    def test_shape_mismatch(self, joint_stream):
        other = ScoreSet(IDS[:3], LABELS[:3], joint_stream.scores[:3])
        with pytest.raises(DimensionError):
            fuse_scores([joint_stream, other])

    def test_sample_order_mismatch(self, joint_stream):
        other = ScoreSet(tuple(reversed(IDS)), LABELS, joint_stream.scores)
        with pytest.raises(DimensionError, match="order"):
            fuse_scores([joint_stream, other])


class TestScoreFiles:
    def test_write_then_read(self, tmp_path, joint_stream):
        path = write_scores_csv(tmp_path / "nested" / "scores.csv", joint_stream)
        assert path.read_text(encoding="utf-8").splitlines()[0] == "sample_id,label,class_0,class_1"
        loaded = read_scores_csv(path)
        assert loaded.sample_ids == IDS
        np.testing.assert_array_equal(loaded.labels, LABELS)
        np.testing.assert_array_equal(loaded.scores, joint_stream.scores)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("id,label,class_0\na,0,1.0\n", encoding="utf-8")
        with pytest.raises(FormatError):
            read_scores_csv(path)

    def test_class_columns_out_of_order(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("sample_id,label,class_1,class_0\n", encoding="utf-8")
        with pytest.raises(FormatError):
            read_scores_csv(path)

    def test_short_row(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("sample_id,label,class_0,class_1\na,0,0.5\n", encoding="utf-8")
        with pytest.raises(ParseError, match=":2:"):
            read_scores_csv(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("sample_id,label,class_0\na,zero,0.5\n", encoding="utf-8")
        with pytest.raises(ParseError):
            read_scores_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            read_scores_csv(tmp_path / "absent.csv")
