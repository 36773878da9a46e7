"""Tests for centering, resampling and the input modalities."""

from __future__ import annotations

import numpy as np
import pytest

from common.exceptions import UsageError
from common.types import Modality, RunMode
from skeleton.data import DatasetSplit, SkeletonSequence
from skeleton.preprocess import (
    apply_modality,
    center,
    pad_bodies,
    prepare_sample,
    prepare_split,
    resample_indices,
    to_bone,
    to_motion,
)


@pytest.fixture
def seq(rng) -> SkeletonSequence:
    return SkeletonSequence(rng.normal(size=(3, 10, 5, 1)) + 1.0, 1, "s")


# ============================================================================
# Resampling
# ============================================================================


class TestResample:
    def test_eval_indices_cover_endpoints(self):
        idx = resample_indices(10, 4, RunMode.EVAL)
        assert idx[0] == 0
        assert idx[-1] == 9
        assert np.all(np.diff(idx) >= 0)

    def test_eval_upsamples_short_sequence(self):
        idx = resample_indices(3, 8, RunMode.EVAL)
        assert len(idx) == 8
        assert set(idx.tolist()) == {0, 1, 2}

    def test_train_crop_stays_in_range(self, rng):
        for _ in range(20):
            idx = resample_indices(100, 16, RunMode.TRAIN, rng)
            assert idx.min() >= 0
            assert idx.max() <= 99
            assert idx.max() - idx.min() >= 89 - 1

    def test_train_needs_rng(self):
        with pytest.raises(UsageError):
            resample_indices(10, 4, RunMode.TRAIN)

    def test_train_is_seeded(self):
        a = resample_indices(50, 8, RunMode.TRAIN, np.random.default_rng(7))
        b = resample_indices(50, 8, RunMode.TRAIN, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)


# ============================================================================
# Centering and modalities
# ============================================================================


class TestCenter:
    def test_center_joint_of_first_frame_is_origin(self, seq, graph5):
        out = center(seq, graph5)
        np.testing.assert_allclose(out.coords[:, 0, graph5.center, 0], 0.0, atol=1e-12)

    def test_absent_frames_stay_zero(self, graph5):
        coords = np.ones((3, 4, 5, 2))
        coords[:, 2:, :, 1] = 0.0
        out = center(SkeletonSequence(coords, 0), graph5)
        np.testing.assert_array_equal(out.coords[:, 2:, :, 1], 0.0)
        np.testing.assert_array_equal(out.coords[:, :2, :, 1], 0.0)

    def test_all_zero_sample_warns(self, graph5, caplog):
        seq = SkeletonSequence(np.zeros((3, 2, 5, 1)), 0, "empty")
        assert center(seq, graph5) is seq
        assert "all zeros" in caplog.text

    def test_origin_skips_absent_leading_frames(self, graph5):
        coords = np.zeros((3, 4, 5, 1))
        coords[:, 1:] = np.arange(1.0, 4.0)[:, None, None, None]
        coords[:, 1:, graph5.center] += 5.0
        out = center(SkeletonSequence(coords, 0), graph5)
        np.testing.assert_array_equal(out.coords[:, 0], 0.0)
        np.testing.assert_allclose(out.coords[:, 1, graph5.center, 0], 0.0, atol=1e-12)
        np.testing.assert_allclose(out.coords[:, 1, 0, 0], -5.0)

    def test_origin_falls_back_to_first_present_body(self, rng, graph5):
        coords = np.zeros((3, 4, 5, 2))
        coords[:, 2:, :, 1] = rng.normal(size=(3, 2, 5)) + 1.0
        out = center(SkeletonSequence(coords, 0), graph5)
        np.testing.assert_allclose(out.coords[:, 2, graph5.center, 1], 0.0, atol=1e-12)
        np.testing.assert_array_equal(out.coords[..., 0], 0.0)


class TestModalities:
    def test_bone_of_center_is_zero(self, seq, graph5):
        bone = to_bone(seq, graph5)
        np.testing.assert_array_equal(bone.coords[:, :, graph5.center], 0.0)
        np.testing.assert_allclose(bone.coords[:, :, 4], seq.coords[:, :, 4] - seq.coords[:, :, 3])

    def test_bone_path_sums_recover_centered_joints(self, rng, ntu_graph):
        seq = SkeletonSequence(rng.normal(size=(3, 6, 25, 2)), 0)
        bone = to_bone(seq, ntu_graph).coords
        for joint in range(ntu_graph.num_joints):
            path = ntu_graph.path_to_center(joint)
            assert len(path) == ntu_graph.depth[joint] + 1
            np.testing.assert_allclose(
                bone[:, :, path].sum(axis=2),
                seq.coords[:, :, joint] - seq.coords[:, :, ntu_graph.center],
                atol=1e-6,
            )

    def test_motion_last_frame_zero(self, seq):
        motion = to_motion(seq)
        np.testing.assert_array_equal(motion.coords[:, -1], 0.0)
        np.testing.assert_allclose(motion.coords[:, 0], seq.coords[:, 1] - seq.coords[:, 0])

    def test_bone_motion_composes(self, seq, graph5):
        composed = apply_modality(seq, graph5, Modality.BONE_MOTION)
        np.testing.assert_allclose(composed.coords, to_motion(to_bone(seq, graph5)).coords)

    def test_joint_is_identity(self, seq, graph5):
        assert apply_modality(seq, graph5, Modality.JOINT) is seq


# ============================================================================
# Whole-sample pipeline
# ============================================================================


class TestPipeline:
    def test_prepare_sample_shape(self, seq, graph5):
        out = prepare_sample(seq, graph5, Modality.BONE, frames=6)
        assert out.coords.shape == (3, 6, 5, 1)
        assert out.label == seq.label

    def test_pad_bodies(self, seq):
        padded = pad_bodies(seq, 2)
        assert padded.bodies == 2
        np.testing.assert_array_equal(padded.coords[..., 1], 0.0)
        assert pad_bodies(seq, 1) is seq

    def test_prepare_split_pads_to_max_bodies(self, rng, graph5):
        one = SkeletonSequence(rng.normal(size=(3, 7, 5, 1)), 0)
        two = SkeletonSequence(rng.normal(size=(3, 9, 5, 2)), 1)
        x, labels = prepare_split(DatasetSplit((one, two), 2, "test", 5), graph5, Modality.JOINT, 4, np.float64)
        assert x.shape == (2, 3, 4, 5, 2)
        assert x.dtype == np.float64
        np.testing.assert_array_equal(labels, [0, 1])
        np.testing.assert_array_equal(x[0, ..., 1], 0.0)
