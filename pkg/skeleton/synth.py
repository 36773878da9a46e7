"""
Synthetic Skeleton Actions
==========================

Desk-scale stand-in for NTU: a standing rest pose on the 25-joint graph with
one limb subtree swinging about its root joint.

Each class crosses a spatial factor (which limb moves: left arm, right arm,
left leg, right leg) with a temporal factor (1 or 3 swings per sequence):

    label = 2 * limb + frequency_index

The swing angle is A * sin(2 pi f t / T + phi) about the x axis, with a fresh
phase phi per sample and Gaussian jitter on every coordinate. A purely spatial
view cannot tell the two frequencies of a limb apart, and a purely temporal
one cannot tell the limbs apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from common.exceptions import ConfigError, TopologyError
from common.utils import derive_rng
from skeleton.data import DatasetSplit, SkeletonSequence
from skeleton.graph import NTU25_LIMB_ROOTS, SkeletonGraph, ntu25_graph

SWING_AMPLITUDE = 0.6  # radians
SWING_FREQUENCIES = (1.0, 3.0)  # cycles per sequence
LIMBS = ("left_arm", "right_arm", "left_leg", "right_leg")
MAX_CLASSES = len(LIMBS) * len(SWING_FREQUENCIES)

# Standing pose in meters, x to the subject's right, y up, z forward
NTU25_REST_POSE = np.array(
    [
        [0.00, 0.00, 0.00],  # spine base
        [0.00, 0.25, 0.00],  # spine mid
        [0.00, 0.58, 0.00],  # neck
        [0.00, 0.72, 0.02],  # head
        [-0.18, 0.50, 0.00],  # left shoulder
        [-0.20, 0.24, 0.00],  # left elbow
        [-0.21, 0.01, 0.02],  # left wrist
        [-0.21, -0.06, 0.02],  # left hand
        [0.18, 0.50, 0.00],  # right shoulder
        [0.20, 0.24, 0.00],  # right elbow
        [0.21, 0.01, 0.02],  # right wrist
        [0.21, -0.06, 0.02],  # right hand
        [-0.10, -0.03, 0.00],  # left hip
        [-0.11, -0.45, 0.01],  # left knee
        [-0.11, -0.85, 0.00],  # left ankle
        [-0.11, -0.90, 0.09],  # left foot
        [0.10, -0.03, 0.00],  # right hip
        [0.11, -0.45, 0.01],  # right knee
        [0.11, -0.85, 0.00],  # right ankle
        [0.11, -0.90, 0.09],  # right foot
        [0.00, 0.48, 0.00],  # spine shoulder
        [-0.21, -0.13, 0.02],  # left hand tip
        [-0.18, -0.08, 0.05],  # left thumb
        [0.21, -0.13, 0.02],  # right hand tip
        [0.18, -0.08, 0.05],  # right thumb
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings.

    Attributes:
        classes: number of labels used, 1..8 (labels 0..classes-1)
        per_class: training samples per label
        num_joints: V, must be 25 (the rest pose is defined on the NTU graph)
        frames: T of every sample
        noise_sigma: standard deviation of the coordinate jitter
        seed: generator seed
        test_per_class: test samples per label (default per_class // 5)
    """

    classes: int = 8
    per_class: int = 250
    num_joints: int = 25
    frames: int = 64
    noise_sigma: float = 0.01
    seed: int = 0
    test_per_class: int | None = None

    def __post_init__(self) -> None:
        if self.per_class < 1:
            raise ConfigError(f"synth per_class must be >= 1, got {self.per_class}")
        if not 1 <= self.classes <= MAX_CLASSES:
            raise ConfigError(f"synth classes must lie in [1, {MAX_CLASSES}], got {self.classes}")
        if self.num_joints != len(NTU25_REST_POSE):
            raise ConfigError(f"synth data is defined on the 25-joint graph, got V={self.num_joints}")
        if self.frames < 2:
            raise ConfigError(f"synth frames must be >= 2, got {self.frames}")
        if self.noise_sigma < 0:
            raise ConfigError(f"synth noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.test_per_class is not None and self.test_per_class < 0:
            raise ConfigError(f"synth test_per_class must be >= 0, got {self.test_per_class}")

    @property
    def resolved_test_per_class(self) -> int:
        return self.per_class // 5 if self.test_per_class is None else self.test_per_class


def _rotation_x(angles: np.ndarray) -> np.ndarray:
    """[T, 3, 3] rotations about the x axis."""
    c, s = np.cos(angles), np.sin(angles)
    rot = np.zeros((len(angles), 3, 3))
    rot[:, 0, 0] = 1.0
    rot[:, 1, 1], rot[:, 1, 2] = c, -s
    rot[:, 2, 1], rot[:, 2, 2] = s, c
    return rot


def generate_sample(
    label: int, spec: SynthSpec, graph: SkeletonGraph, rng: np.random.Generator, sample_id: str
) -> SkeletonSequence:
    """One sequence of class `label`: coords [3, T, 25, 1]."""
    limb = LIMBS[label // len(SWING_FREQUENCIES)]
    frequency = SWING_FREQUENCIES[label % len(SWING_FREQUENCIES)]
    root = NTU25_LIMB_ROOTS[limb]
    moving = graph.descendants(root)

    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(spec.frames, dtype=np.float64)
    angles = SWING_AMPLITUDE * np.sin(2.0 * np.pi * frequency * t / spec.frames + phase)

    pose = np.broadcast_to(NTU25_REST_POSE, (spec.frames, *NTU25_REST_POSE.shape)).copy()  # [T, V, 3]
    offsets = NTU25_REST_POSE[moving] - NTU25_REST_POSE[root]  # [J, 3]
    pose[:, moving] = NTU25_REST_POSE[root] + np.einsum("tij,kj->tki", _rotation_x(angles), offsets)
    if spec.noise_sigma > 0:
        pose = pose + rng.normal(0.0, spec.noise_sigma, size=pose.shape)
    return SkeletonSequence(pose.transpose(2, 0, 1)[..., None].copy(), label, sample_id)


def _generate_split(
    name: str, count: int, spec: SynthSpec, graph: SkeletonGraph, rng: np.random.Generator
) -> DatasetSplit:
    samples = []
    for label in range(spec.classes):
        for _ in range(count):
            samples.append(generate_sample(label, spec, graph, rng, f"{name}-{len(samples):05d}"))
    return DatasetSplit(tuple(samples), spec.classes, name, spec.num_joints, 3)


def synth_dataset(spec: SynthSpec, graph: SkeletonGraph | None = None) -> tuple[DatasetSplit, DatasetSplit]:
    """Deterministic (train, test) splits with exactly per_class / test_per_class samples per label.

    Raises:
        ConfigError: If the generator settings are invalid (raised when SynthSpec is built).
        TopologyError: If the graph is not the 25-joint graph.
    """
    graph = graph or ntu25_graph()
    if graph.num_joints != spec.num_joints:
        raise TopologyError(f"synth data needs a {spec.num_joints}-joint graph, got V={graph.num_joints}")
    rng = derive_rng(spec.seed, "synth")
    train = _generate_split("train", spec.per_class, spec, graph, rng)
    test = _generate_split("test", spec.resolved_test_per_class, spec, graph, rng)
    return train, test


def nearest_centroid_accuracy(train: DatasetSplit, test: DatasetSplit) -> float:
    """Test accuracy of a nearest-class-mean classifier on raw flattened coordinates."""
    if len(train) == 0 or len(test) == 0:
        return 0.0
    x_train = np.stack([s.coords.reshape(-1) for s in train.samples])
    x_test = np.stack([s.coords.reshape(-1) for s in test.samples])
    labels = train.labels
    present = np.unique(labels)
    centroids = np.stack([x_train[labels == k].mean(axis=0) for k in present])
    distances = ((x_test[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    predictions = present[distances.argmin(axis=1)]
    return float(np.mean(predictions == test.labels))
