"""
Preprocessing and Modalities
============================

Pipeline applied to every sample before batching:

    center (translation only) -> resample to a fixed frame count -> modality

Modalities: joint (raw), bone (parent-relative), joint-motion and
bone-motion (forward frame differences, last frame zero).
"""

from __future__ import annotations

import logging
import math

import numpy as np

from common.exceptions import UsageError
from common.types import Modality, RunMode
from skeleton.data import DatasetSplit, SkeletonSequence
from skeleton.graph import SkeletonGraph

logger = logging.getLogger(__name__)

CROP_FRACTION = 0.9


def resample_indices(num_frames: int, t_out: int, mode: RunMode, rng: np.random.Generator | None = None) -> np.ndarray:
    """Frame indices for resampling.

    eval: round(linspace(0, T-1, t_out)), deterministic and non-decreasing.
    train: a random contiguous crop of at least 90% of the frames, sampled the same way.
    """
    if mode == RunMode.TRAIN:
        if rng is None:
            raise UsageError("train-mode resampling needs an rng")
        length = int(rng.integers(math.ceil(CROP_FRACTION * num_frames), num_frames + 1))
        start = int(rng.integers(0, num_frames - length + 1))
    else:
        length, start = num_frames, 0
    return start + np.round(np.linspace(0, length - 1, t_out)).astype(np.int64)


def resample(
    seq: SkeletonSequence, t_out: int = 64, mode: RunMode = RunMode.EVAL, rng: np.random.Generator | None = None
) -> SkeletonSequence:
    return seq.with_coords(seq.coords[:, resample_indices(seq.frames, t_out, mode, rng)])


def _present_mask(coords: np.ndarray) -> np.ndarray:
    """[1, T, 1, M] mask of body-frames with any nonzero coordinate."""
    return np.any(coords != 0, axis=(0, 2), keepdims=True)


def _origin_frame(present: np.ndarray) -> tuple[int, int]:
    """(frame, body) the origin is read from: body 0's first present frame, else the earliest present body-frame."""
    frames = np.flatnonzero(present[:, 0])
    if frames.size:
        return int(frames[0]), 0
    t, m = np.argwhere(present)[0]
    return int(t), int(m)


def center(seq: SkeletonSequence, graph: SkeletonGraph) -> SkeletonSequence:
    """Subtract the center joint of the first present frame of the first body.

    Absent (all-zero) body-frames are skipped when picking the origin and stay
    zero. If body 0 is never present the earliest present body-frame of any
    body is used. An all-zero sample is returned unchanged with a warning.
    """
    if not np.any(seq.coords):
        logger.warning("Sample %s is all zeros; centering skipped", seq.sample_id or "?")
        return seq
    mask = _present_mask(seq.coords)
    t, m = _origin_frame(mask[0, :, 0, :])
    origin = seq.coords[:, t, graph.center, m].reshape(-1, 1, 1, 1)
    return seq.with_coords(seq.coords - origin * mask)


def to_bone(seq: SkeletonSequence, graph: SkeletonGraph) -> SkeletonSequence:
    """bone[:, t, j, m] = coords[:, t, j, m] - coords[:, t, parent(j), m]; the center bone is zero."""
    parent = np.asarray(graph.parent, dtype=np.int64)
    return seq.with_coords(seq.coords - seq.coords[:, :, parent, :])


def to_motion(seq: SkeletonSequence) -> SkeletonSequence:
    """motion[:, t] = coords[:, t + 1] - coords[:, t]; the last frame is zero."""
    motion = np.zeros_like(seq.coords)
    motion[:, :-1] = seq.coords[:, 1:] - seq.coords[:, :-1]
    return seq.with_coords(motion)


def apply_modality(seq: SkeletonSequence, graph: SkeletonGraph, modality: Modality) -> SkeletonSequence:
    if modality in (Modality.BONE, Modality.BONE_MOTION):
        seq = to_bone(seq, graph)
    if modality in (Modality.JOINT_MOTION, Modality.BONE_MOTION):
        seq = to_motion(seq)
    return seq


def prepare_sample(
    seq: SkeletonSequence,
    graph: SkeletonGraph,
    modality: Modality = Modality.JOINT,
    frames: int = 64,
    mode: RunMode = RunMode.EVAL,
    rng: np.random.Generator | None = None,
) -> SkeletonSequence:
    return apply_modality(resample(center(seq, graph), frames, mode, rng), graph, modality)


def stack_batch(samples: list[SkeletonSequence], dtype: type[np.floating] = np.float32) -> np.ndarray:
    """[B, C, T, V, M] array of equally shaped samples."""
    return np.stack([s.coords for s in samples]).astype(dtype)


def prepare_split(
    split: DatasetSplit,
    graph: SkeletonGraph,
    modality: Modality,
    frames: int,
    dtype: type[np.floating] = np.float32,
) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode preprocessing of a whole split: ([N, C, T, V, M] array, labels)."""
    bodies = max((s.bodies for s in split.samples), default=1)
    prepared = []
    for sample in split.samples:
        sample = prepare_sample(sample, graph, modality, frames, RunMode.EVAL)
        prepared.append(pad_bodies(sample, bodies))
    if not prepared:
        return np.zeros((0, split.channels, frames, split.num_joints, bodies), dtype=dtype), split.labels
    return stack_batch(prepared, dtype), split.labels


def pad_bodies(seq: SkeletonSequence, bodies: int) -> SkeletonSequence:
    """Zero-fill absent bodies up to `bodies`."""
    if seq.bodies >= bodies:
        return seq
    pad = np.zeros((*seq.coords.shape[:3], bodies - seq.bodies), dtype=seq.coords.dtype)
    return seq.with_coords(np.concatenate([seq.coords, pad], axis=3))
