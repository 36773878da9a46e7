"""Shared fixtures: float64 mode, tiny graphs and configs, and a small synthetic dataset."""

from __future__ import annotations

import numpy as np
import pytest

from autodiff.tensor import default_dtype
from common.types import DsttConfig, ModelConfig, TopologyMode, TrainConfig
from hgct.verification import tiny_graph, tiny_model_config
from skeleton.data import DatasetSplit
from skeleton.graph import SkeletonGraph, ntu25_graph
from skeleton.synth import SynthSpec, synth_dataset


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Build and run everything in float64 for the duration of the test."""
    with default_dtype(np.float64):
        yield


@pytest.fixture
def graph5() -> SkeletonGraph:
    return tiny_graph(5)


@pytest.fixture
def chain3() -> SkeletonGraph:
    return tiny_graph(3)


@pytest.fixture
def ntu_graph() -> SkeletonGraph:
    return ntu25_graph()


@pytest.fixture
def tiny_config() -> ModelConfig:
    """Width-4 model over the 3-joint chain."""
    return tiny_model_config()


@pytest.fixture
def small_config() -> ModelConfig:
    """Width-8 model over the 25-joint graph, two classes."""
    return ModelConfig(
        stage_channels=[8, 8, 8],
        stage_blocks=[1, 1, 1],
        dstt=DsttConfig(c_e=8, alpha=0.25, s_heads=2, t_heads=1, gamma=1),
        topology=TopologyMode.SCALED,
        freeze_epochs=1,
        num_classes=2,
    )


@pytest.fixture
def small_train_config() -> TrainConfig:
    return TrainConfig(
        lr0=0.05,
        epochs=2,
        milestones=[],
        warmup_epochs=0,
        batch_size=4,
        seed=3,
        frames=8,
        dtype="float64",
    )


@pytest.fixture
def toy_splits() -> tuple[DatasetSplit, DatasetSplit]:
    """8 training and 4 test samples over two classes, 10 frames each."""
    return synth_dataset(SynthSpec(classes=2, per_class=4, frames=10, test_per_class=2, seed=5))
