"""
Spatiotemporal Graph Convolution
================================

STGC block = partitioned spatial graph convolution followed by a multiscale
temporal convolution, wrapped in an outer residual:

    out = relu(temporal(spatial(f)) + residual(f))

The spatial stage sums one 1x1 conv per partition over the joint-contracted
input: sum_k W_k (f A_k), where (f A)[..., v] = sum_u f[..., u] A[u, v].
"""

from __future__ import annotations

import numpy as np

from autodiff import functional as ops
from autodiff.modules import BatchNorm, Conv, Module, ModuleList
from autodiff.tensor import Tensor, concat, matmul
from common.exceptions import ConfigError, DimensionError
from common.types import TopologyMode
from hgct.topology import PartitionedAdjacency
from skeleton.graph import NUM_PARTITIONS

TEMPORAL_KERNEL = 5
POOL_KERNEL = 3


class SpatialGraphConv(Module):
    """sum over the 3 partitions of Conv1x1_k(f . A_k), then BN and ReLU."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        partitions: np.ndarray,
        rng: np.random.Generator,
        mode: TopologyMode = TopologyMode.SCALED,
        freeze_epochs: int = 5,
    ) -> None:
        super().__init__()
        self.adjacency = PartitionedAdjacency(partitions, mode, freeze_epochs)
        self.convs = ModuleList([Conv(in_channels, out_channels, rng) for _ in range(NUM_PARTITIONS)])
        self.norm = BatchNorm(out_channels)

    def aggregate(self, f: Tensor) -> Tensor:
        """Pre-norm output sum_k W_k (f . A_k)."""
        if f.ndim != 4 or f.shape[-1] != self.adjacency.num_joints:
            raise DimensionError(f"Expected [B, C, T, {self.adjacency.num_joints}] input, got {f.shape}")
        a = self.adjacency(dtype=f.dtype)
        out: Tensor | None = None
        for k, conv in enumerate(self.convs):
            term = conv(matmul(f, a[k]))
            out = term if out is None else out + term
        assert out is not None
        return out

    def forward(self, f: Tensor) -> Tensor:
        return self.norm(self.aggregate(f)).relu()


class DilatedBranch(Module):
    """1x1 reduce -> BN -> ReLU -> 5x1 dilated conv -> BN."""

    def __init__(self, channels: int, width: int, dilation: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.reduce = Conv(channels, width, rng)
        self.reduce_norm = BatchNorm(width)
        self.conv = Conv(width, width, rng, kernel_t=TEMPORAL_KERNEL, dilation=dilation)
        self.norm = BatchNorm(width)

    def forward(self, f: Tensor) -> Tensor:
        return self.norm(self.conv(self.reduce_norm(self.reduce(f)).relu()))


class PoolBranch(Module):
    """1x1 reduce -> BN -> ReLU -> 3x1 max pool -> BN."""

    def __init__(self, channels: int, width: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.reduce = Conv(channels, width, rng)
        self.reduce_norm = BatchNorm(width)
        self.norm = BatchNorm(width)

    def forward(self, f: Tensor) -> Tensor:
        return self.norm(ops.max_pool_t(self.reduce_norm(self.reduce(f)).relu(), POOL_KERNEL))


class BottleneckBranch(Module):
    def __init__(self, channels: int, width: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.reduce = Conv(channels, width, rng)
        self.norm = BatchNorm(width)

    def forward(self, f: Tensor) -> Tensor:
        return self.norm(self.reduce(f))


class MultiscaleTemporalConv(Module):
    """Dilated 5x1 branches, a max-pool branch and a 1x1 bottleneck, concatenated.

    Each branch produces C / (len(dilations) + 2) channels; the concatenation
    gets the input added back before the final ReLU. Shapes are preserved.
    """

    def __init__(self, channels: int, rng: np.random.Generator, dilations: tuple[int, ...] = (1, 2)) -> None:
        super().__init__()
        branches = len(dilations) + 2
        if channels % branches:
            raise ConfigError(f"Temporal conv channels {channels} must be divisible by {branches} branches")
        width = channels // branches
        self.channels = channels
        self.branches = ModuleList(
            [
                *(DilatedBranch(channels, width, d, rng) for d in dilations),
                PoolBranch(channels, width, rng),
                BottleneckBranch(channels, width, rng),
            ]
        )

    def forward(self, f: Tensor) -> Tensor:
        if f.ndim != 4 or f.shape[1] != self.channels:
            raise DimensionError(f"Expected [B, {self.channels}, T, V] input, got {f.shape}")
        mixed = concat([branch(f) for branch in self.branches], axis=1)
        return (mixed + f).relu()


class Residual(Module):
    """1x1 conv + BN projection used when the channel count changes."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.conv = Conv(in_channels, out_channels, rng)
        self.norm = BatchNorm(out_channels)

    def forward(self, f: Tensor) -> Tensor:
        return self.norm(self.conv(f))


class StgcBlock(Module):
    """relu(temporal(spatial(f)) + residual(f)); with `capture` set the output is kept in last_output."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        partitions: np.ndarray,
        rng: np.random.Generator,
        mode: TopologyMode = TopologyMode.SCALED,
        freeze_epochs: int = 5,
        dilations: tuple[int, ...] = (1, 2),
    ) -> None:
        super().__init__()
        self.spatial = SpatialGraphConv(in_channels, out_channels, partitions, rng, mode, freeze_epochs)
        self.temporal = MultiscaleTemporalConv(out_channels, rng, dilations)
        self.residual = Residual(in_channels, out_channels, rng) if in_channels != out_channels else None
        self.capture = False
        self.last_output: np.ndarray | None = None

    def forward(self, f: Tensor) -> Tensor:
        shortcut = f if self.residual is None else self.residual(f)
        out = (self.temporal(self.spatial(f)) + shortcut).relu()
        if self.capture:
            self.last_output = out.data
        return out
