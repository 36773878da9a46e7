"""
HGCT Model
==========

Three stages, each a stack of STGC blocks followed by a DSTT block with a
residual from the STGC output:

    x -> data BN (over V * C_in channels)
      -> stage x3: s = stgc...(x); x = s + dstt(s)
      -> mean over (T, V) -> dropout -> linear head

Multi-body input [B, C, T, V, M] is folded into the batch; the logits of the
bodies that carry any nonzero coordinate are averaged per sample.
"""

from __future__ import annotations

import logging

import numpy as np

from autodiff.modules import BatchNorm, Dropout, Linear, Module, ModuleList
from autodiff.tensor import Tensor
from common.exceptions import DimensionError, TopologyError
from common.types import ModelConfig
from common.utils import derive_rng
from hgct.dstt import DsttBlock
from hgct.stgc import StgcBlock
from hgct.topology import PartitionedAdjacency
from skeleton.graph import SkeletonGraph, build_partitions, load_graph

logger = logging.getLogger(__name__)


class Stage(Module):
    def __init__(
        self,
        index: int,
        in_channels: int,
        config: ModelConfig,
        partitions: np.ndarray,
        rng: np.random.Generator,
    ) -> None:
        super().__init__()
        width = config.stage_channels[index]
        blocks: list[Module] = []
        for b in range(config.stage_blocks[index]):
            blocks.append(
                StgcBlock(
                    in_channels if b == 0 else width,
                    width,
                    partitions,
                    rng,
                    config.topology,
                    config.freeze_epochs,
                    tuple(config.dilations),
                )
            )
        self.stgc = ModuleList(blocks)
        self.dstt = DsttBlock(width, config.dstt, rng, stage_index=index, num_joints=config.num_joints)

    def forward(self, x: Tensor) -> Tensor:
        for block in self.stgc:
            x = block(x)
        return x + self.dstt(x)


class HgctModel(Module):
    """Hierarchical graph convolution + disentangled transformer classifier.

    Attributes:
        config: Resolved model configuration
        graph: Skeleton graph the adjacency partitions were built from
    """

    def __init__(self, config: ModelConfig, graph: SkeletonGraph | None = None, seed: int = 0) -> None:
        super().__init__()
        graph = graph or load_graph(config.graph)
        if graph.num_joints != config.num_joints:
            raise TopologyError(f"Graph has {graph.num_joints} joints, config expects {config.num_joints}")
        self.config = config
        self.graph = graph
        rng = derive_rng(seed, "init")
        partitions = build_partitions(graph)

        self.data_bn = BatchNorm(config.num_joints * config.in_channels)
        stages: list[Module] = []
        in_channels = config.in_channels
        for index in range(len(config.stage_channels)):
            stages.append(Stage(index, in_channels, config, partitions, rng))
            in_channels = config.stage_channels[index]
        self.stages = ModuleList(stages)
        self.dropout = Dropout(config.head_dropout, derive_rng(seed, "dropout"))
        self.head = Linear(in_channels, config.num_classes, rng)

    def set_epoch(self, epoch: int) -> None:
        """Apply the adjacency freeze rule for `epoch` in every layer."""
        for module in self.modules():
            if isinstance(module, PartitionedAdjacency):
                module.set_epoch(epoch)

    def dstt_blocks(self) -> list[DsttBlock]:
        return [stage.dstt for stage in self.stages]  # type: ignore[attr-defined]

    def stgc_blocks(self) -> list[list[StgcBlock]]:
        """STGC blocks of every stage, in forward order."""
        return [list(stage.stgc) for stage in self.stages]  # type: ignore[attr-defined]

    def _check_input(self, x: Tensor) -> None:
        if x.ndim not in (4, 5):
            raise DimensionError(f"Expected [B, C, T, V] or [B, C, T, V, M] input, got {x.shape}")
        _, c, _, v = x.shape[:4]
        if c != self.config.in_channels or v != self.config.num_joints:
            raise DimensionError(
                f"Input has C={c}, V={v}; model expects C={self.config.in_channels}, V={self.config.num_joints}"
            )

    def features(self, x: Tensor) -> Tensor:
        """[B, C_in, T, V] -> pooled [B, C] features."""
        b, c, t, v = x.shape
        x = x.permute(0, 3, 1, 2).reshape(b, v * c, t)
        x = self.data_bn(x).reshape(b, v, c, t).permute(0, 2, 3, 1)
        for stage in self.stages:
            x = stage(x)
        return x.mean(axis=(2, 3))

    def forward(self, x: Tensor, epoch: int | None = None) -> Tensor:
        """Logits [B, num_classes].

        Raises:
            DimensionError: If C or V do not match the configuration.
        """
        self._check_input(x)
        if epoch is not None:
            self.set_epoch(epoch)
        if x.ndim == 4:
            return self.head(self.dropout(self.features(x)))

        b, c, t, v, m = x.shape
        folded = x.permute(0, 4, 1, 2, 3).reshape(b * m, c, t, v)
        logits = self.head(self.dropout(self.features(folded))).reshape(b, m, -1)
        present = np.any(x.data != 0, axis=(1, 2, 3))  # [B, M]
        present[~present.any(axis=1), 0] = True
        weights = (present / present.sum(axis=1, keepdims=True)).astype(x.dtype)
        return (logits * Tensor.wrap(weights[:, :, None])).sum(axis=1)


def build_model(config: ModelConfig, seed: int = 0, graph: SkeletonGraph | None = None) -> HgctModel:
    model = HgctModel(config, graph, seed)
    logger.debug("Built HGCT with %d parameters", model.num_parameters())
    return model
