"""
Parameter and Compute Accounting
================================

Closed-form parameter counts and multiply-accumulate (MAC) counts for one
sample, itemized per block. The formulas mirror the layers in hgct.stgc,
hgct.dstt and hgct.model one for one, so count_params(config) equals the
enumerated parameter total of the constructed model.

MACs cover convolutions, linear maps, graph contractions (C * T * V^2 per
partition) and the two attention products. Normalization, activations,
softmax, pooling and bias additions are not counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from common.types import ModelConfig, TopologyMode
from hgct.dstt import DEPTHWISE_KERNEL, TEMPORAL_EMBED_KERNEL
from hgct.stgc import TEMPORAL_KERNEL
from skeleton.graph import NUM_PARTITIONS

DEFAULT_FRAMES = 64


@dataclass
class BlockCount:
    name: str
    params: int = 0
    macs: int = 0

    def add(self, params: int = 0, macs: int = 0) -> None:
        self.params += params
        self.macs += macs

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "params": self.params, "macs": self.macs}


@dataclass
class CostReport:
    """Per-block counts plus totals; totals are the sums of the blocks."""

    frames: int
    joints: int
    blocks: list[BlockCount] = field(default_factory=list)

    @property
    def params(self) -> int:
        return sum(b.params for b in self.blocks)

    @property
    def macs(self) -> int:
        return sum(b.macs for b in self.blocks)

    @property
    def flops_2x(self) -> int:
        return 2 * self.macs

    def to_dict(self) -> dict[str, Any]:
        return {
            "frames": self.frames,
            "joints": self.joints,
            "params": self.params,
            "macs": self.macs,
            "flops_2x": self.flops_2x,
            "blocks": [b.to_dict() for b in self.blocks],
        }


# ============================================================================
# Layer Formulas
# ============================================================================


def _conv(block: BlockCount, c_in: int, c_out: int, positions: int, kernel: int = 1, groups: int = 1) -> None:
    block.add(c_out * (c_in // groups) * kernel + c_out, c_out * (c_in // groups) * kernel * positions)


def _linear(block: BlockCount, c_in: int, c_out: int, rows: int) -> None:
    block.add(c_in * c_out + c_out, c_in * c_out * rows)


def _norm(block: BlockCount, channels: int) -> None:
    block.add(2 * channels)


def _stgc(block: BlockCount, c_in: int, c_out: int, config: ModelConfig, t: int, v: int) -> None:
    positions = t * v
    if config.topology != TopologyMode.FIXED:
        block.add(NUM_PARTITIONS * config.num_joints**2)
    if config.topology == TopologyMode.SCALED:
        block.add(1)
    for _ in range(NUM_PARTITIONS):
        block.add(macs=c_in * t * v * v)
        _conv(block, c_in, c_out, positions)
    _norm(block, c_out)

    width = c_out // config.temporal_branches
    for _ in config.dilations:
        _conv(block, c_out, width, positions)
        _norm(block, width)
        _conv(block, width, width, positions, kernel=TEMPORAL_KERNEL)
        _norm(block, width)
    _conv(block, c_out, width, positions)
    _norm(block, width)
    _norm(block, width)
    _conv(block, c_out, width, positions)
    _norm(block, width)

    if c_in != c_out:
        _conv(block, c_in, c_out, positions)
        _norm(block, c_out)


def _attention(block: BlockCount, channels: int, rows: int, length: int) -> None:
    _norm(block, channels)
    _linear(block, channels, 3 * channels, rows * length)
    block.add(macs=2 * rows * length * length * channels)  # scores and weighted values
    _linear(block, channels, channels, rows * length)


def _dstt(block: BlockCount, c_in: int, stage_index: int, config: ModelConfig, t: int, v: int) -> None:
    d = config.dstt
    positions = t * v
    _conv(block, c_in, d.c_s, positions)
    _conv(block, c_in, d.c_t, positions, kernel=TEMPORAL_EMBED_KERNEL)
    if stage_index == 0:
        block.add(config.num_joints * d.c_s)
    _attention(block, d.c_s, t, v)
    _attention(block, d.c_t, v, t)
    hidden = d.gamma * d.c_e
    _norm(block, d.c_e)
    _conv(block, d.c_e, hidden, positions)
    _conv(block, hidden, hidden, positions, kernel=DEPTHWISE_KERNEL, groups=hidden)
    _conv(block, hidden, d.c_e, positions)


# ============================================================================
# Public API
# ============================================================================


def cost_report(config: ModelConfig, frames: int = DEFAULT_FRAMES, joints: int | None = None) -> CostReport:
    """Itemized parameters and MACs of one forward pass over a [C_in, frames, joints] sample."""
    t = frames
    v = config.num_joints if joints is None else joints
    report = CostReport(frames=t, joints=v)

    data_bn = BlockCount("data_bn")
    _norm(data_bn, config.num_joints * config.in_channels)
    report.blocks.append(data_bn)

    c_in = config.in_channels
    for s, width in enumerate(config.stage_channels):
        for b in range(config.stage_blocks[s]):
            block = BlockCount(f"stage{s + 1}.stgc{b + 1}")
            _stgc(block, c_in if b == 0 else width, width, config, t, v)
            report.blocks.append(block)
        block = BlockCount(f"stage{s + 1}.dstt")
        _dstt(block, width, s, config, t, v)
        report.blocks.append(block)
        c_in = width

    head = BlockCount("head")
    _linear(head, c_in, config.num_classes, 1)
    report.blocks.append(head)
    return report


def count_params(config: ModelConfig) -> int:
    return cost_report(config).params


def count_flops(config: ModelConfig, frames: int = DEFAULT_FRAMES, joints: int | None = None) -> dict[str, int]:
    """{"macs": ..., "flops_2x": 2 * macs} for one sample."""
    report = cost_report(config, frames, joints)
    return {"macs": report.macs, "flops_2x": report.flops_2x}
