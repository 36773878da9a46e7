"""
Partitioned Adjacency
=====================

The three adjacency matrices a spatial graph convolution aggregates over.

Modes:
- fixed: the normalized base partitions A_o, never trained
- learnable: a per-layer copy A_tilde initialised to A_o
- scaled: lambda * A_tilde with a per-layer scalar lambda initialised to 1

A_tilde is held constant for the first `freeze_epochs` epochs: the forward
pass detaches it and the optimizer skips it. lambda is always trainable.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from autodiff.modules import Module, Parameter
from autodiff.tensor import Tensor, get_default_dtype
from common.exceptions import TopologyError
from common.types import TopologyMode
from skeleton.graph import NUM_PARTITIONS


class PartitionedAdjacency(Module):
    """Per-layer adjacency state for one spatial graph convolution.

    Attributes:
        base: Constant A_o, [3, V, V]
        mode: Topology mode
        freeze_epochs: Number of leading epochs during which A_tilde is held
        epoch: Epoch the next forward pass belongs to
        a_tilde: Learnable partitions (learnable and scaled modes)
        scale: Learnable scalar lambda, shape (1,) (scaled mode)
    """

    def __init__(self, base: np.ndarray, mode: TopologyMode = TopologyMode.SCALED, freeze_epochs: int = 5) -> None:
        super().__init__()
        if base.ndim != 3 or base.shape[0] != NUM_PARTITIONS or base.shape[1] != base.shape[2]:
            raise TopologyError(f"Expected base partitions of shape [3, V, V], got {base.shape}")
        self.base = np.array(base, dtype=get_default_dtype())
        self.mode = mode
        self.freeze_epochs = freeze_epochs
        self.epoch = 0
        if mode != TopologyMode.FIXED:
            self.a_tilde = Parameter(self.base.copy(), decay=True)
        if mode == TopologyMode.SCALED:
            self.scale = Parameter(np.ones(1, dtype=self.base.dtype), decay=True)
        self.set_epoch(0)

    @property
    def num_joints(self) -> int:
        return self.base.shape[-1]

    @property
    def frozen(self) -> bool:
        return self.mode != TopologyMode.FIXED and self.epoch < self.freeze_epochs

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch
        if self.mode != TopologyMode.FIXED:
            self.a_tilde.frozen = self.frozen

    def forward(self, dtype: Any = None) -> Tensor:
        """Effective [3, V, V] matrices for the current epoch."""
        if self.mode == TopologyMode.FIXED:
            return Tensor.wrap(self.base.astype(dtype or self.base.dtype, copy=False))
        a = self.a_tilde.detach() if self.frozen else self.a_tilde
        if self.mode == TopologyMode.SCALED:
            return self.scale * a
        return a


def effective_adjacency(adjacency: PartitionedAdjacency, epoch: int) -> Tensor:
    """Set the epoch, then return the matrices used by the forward pass."""
    adjacency.set_epoch(epoch)
    return adjacency()
