"""
Block Gradient Checks
=====================

Runs the finite-difference oracle against every block type in float64 at
tiny dimensions:

    spatial-fixed, spatial-learnable, spatial-scaled, temporal, disentangle,
    gsa, gta, cwff, dstt, model

Each check differentiates a random projection sum(out * R) with respect to
the block input and to one representative parameter. Adjacency and
partition-weight checks differentiate the pre-norm aggregation.

Central differences are only meaningful where the function is smooth and
the gradient is well conditioned, so a sample point is redrawn when a ReLU
input or max-pool gap lies within KINK_MARGIN of a kink, or when some
gradient coordinate is below CONDITION_FLOOR of the largest one.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from autodiff.gradcheck import DEFAULT_STEP, finite_difference_check, parameter_gradient_check
from autodiff.modules import Module, Parameter
from autodiff.tensor import Tensor, concat, default_dtype, kink_probe
from common.exceptions import UsageError
from common.types import DsttConfig, ModelConfig, TopologyMode
from common.utils import derive_rng
from hgct.dstt import ChannelwiseFeedForward, Disentangle, DsttBlock, GlobalAttention
from hgct.model import HgctModel
from hgct.stgc import MultiscaleTemporalConv, SpatialGraphConv
from skeleton.graph import SkeletonGraph, build_partitions

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-4
KINK_MARGIN = 1e-3
CONDITION_FLOOR = 1e-4
MAX_DRAWS = 50

TINY_BATCH = 2
TINY_FRAMES = 6
TINY_WIDTH = 4
TINY_DSTT = DsttConfig(c_e=8, alpha=0.5, s_heads=2, t_heads=2, gamma=2)

BLOCK_NAMES = (
    "spatial-fixed",
    "spatial-learnable",
    "spatial-scaled",
    "temporal",
    "disentangle",
    "gsa",
    "gta",
    "cwff",
    "dstt",
    "model",
)

Forward = Callable[[Tensor], Tensor]


@dataclass(frozen=True)
class GradcheckResult:
    """Outcome of one oracle comparison."""

    block: str
    seed: int
    target: str
    error: float
    draws: int

    @property
    def passed(self) -> bool:
        return self.error < GRADCHECK_TOLERANCE

    def to_dict(self) -> dict[str, Any]:
        return {
            "block": self.block,
            "seed": self.seed,
            "target": self.target,
            "error": self.error,
            "draws": self.draws,
            "passed": self.passed,
        }


@dataclass
class GradcheckSummary:
    results: list[GradcheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def max_error(self) -> float:
        return max((r.error for r in self.results), default=0.0)

    def worst_by_block(self) -> dict[str, float]:
        worst: dict[str, float] = {}
        for r in self.results:
            worst[r.block] = max(worst.get(r.block, 0.0), r.error)
        return worst

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "max_error": self.max_error,
            "tolerance": GRADCHECK_TOLERANCE,
            "results": [r.to_dict() for r in self.results],
        }


@dataclass
class BlockCase:
    """An instantiated block: its input shape and what to differentiate.

    Attributes:
        module: Block under test
        input_shape: Shape of the random input
        forward: Block forward used for the input check
        param_name: Name of the parameter checked
        param: The parameter checked
        param_forward: Forward used for the parameter check
    """

    module: Module
    input_shape: tuple[int, ...]
    forward: Forward
    param_name: str
    param: Parameter
    param_forward: Forward


# ============================================================================
# Tiny Blocks
# ============================================================================


def tiny_graph(num_joints: int = 5) -> SkeletonGraph:
    """5 joints: a center with a two-joint branch and two leaves; 3 joints: a chain."""
    if num_joints == 3:
        return SkeletonGraph(3, ((0, 1), (1, 2)), 1)
    return SkeletonGraph(5, ((0, 1), (1, 2), (1, 3), (3, 4)), 1)


def _spatial_case(mode: TopologyMode, rng: np.random.Generator) -> BlockCase:
    graph = tiny_graph()
    block = SpatialGraphConv(3, TINY_WIDTH, build_partitions(graph), rng, mode, freeze_epochs=0)
    if mode == TopologyMode.SCALED:
        name, param = "adjacency.scale", block.adjacency.scale
    elif mode == TopologyMode.LEARNABLE:
        name, param = "adjacency.a_tilde", block.adjacency.a_tilde
    else:
        name, param = "convs.0.weight", block.convs[0].weight  # type: ignore[attr-defined]
    shape = (TINY_BATCH, 3, TINY_FRAMES, graph.num_joints)
    return BlockCase(block, shape, block, name, param, block.aggregate)


def _temporal_case(rng: np.random.Generator) -> BlockCase:
    block = MultiscaleTemporalConv(TINY_WIDTH, rng)
    param = block.branches[0].conv.weight  # type: ignore[attr-defined]
    shape = (TINY_BATCH, TINY_WIDTH, TINY_FRAMES, 5)
    return BlockCase(block, shape, block, "branches.0.conv.weight", param, block)


def _disentangle_case(rng: np.random.Generator) -> BlockCase:
    block = Disentangle(TINY_DSTT.c_e, TINY_DSTT, rng)

    def forward(x: Tensor) -> Tensor:
        return concat(list(block(x)), axis=1)

    shape = (TINY_BATCH, TINY_DSTT.c_e, TINY_FRAMES, 5)
    return BlockCase(block, shape, forward, "temporal.weight", block.temporal.weight, forward)


def _attention_case(channels: int, heads: int, rows: int, length: int, rng: np.random.Generator) -> BlockCase:
    block = GlobalAttention(channels, heads, rng)
    weight = block.attention.qkv.weight
    return BlockCase(block, (rows, length, channels), block, "attention.qkv.weight", weight, block)


def _cwff_case(rng: np.random.Generator) -> BlockCase:
    block = ChannelwiseFeedForward(TINY_DSTT.c_e, TINY_DSTT.gamma, rng)
    shape = (TINY_BATCH, TINY_DSTT.c_e, TINY_FRAMES, 5)
    return BlockCase(block, shape, block, "excite.weight", block.excite.weight, block)


def _dstt_case(rng: np.random.Generator) -> BlockCase:
    block = DsttBlock(TINY_DSTT.c_e, TINY_DSTT, rng, stage_index=0, num_joints=5)
    assert block.encoding is not None
    table = block.encoding.joint_type.table
    shape = (TINY_BATCH, TINY_DSTT.c_e, TINY_FRAMES, 5)
    return BlockCase(block, shape, block, "encoding.joint_type.table", table, block)


def tiny_model_config() -> ModelConfig:
    return ModelConfig(
        stage_channels=[TINY_WIDTH] * 3,
        stage_blocks=[1, 1, 1],
        dstt=DsttConfig(c_e=TINY_WIDTH, alpha=0.5, s_heads=2, t_heads=1, gamma=2),
        topology=TopologyMode.SCALED,
        freeze_epochs=0,
        num_classes=3,
        num_joints=3,
        in_channels=3,
    )


def _model_case(rng: np.random.Generator) -> BlockCase:
    seed = int(rng.integers(0, 2**31 - 1))
    model = HgctModel(tiny_model_config(), tiny_graph(3), seed=seed)
    shape = (TINY_BATCH, 3, 4, 3)
    return BlockCase(model, shape, model, "head.weight", model.head.weight, model)


_BUILDERS: dict[str, Callable[[np.random.Generator], BlockCase]] = {
    "spatial-fixed": lambda rng: _spatial_case(TopologyMode.FIXED, rng),
    "spatial-learnable": lambda rng: _spatial_case(TopologyMode.LEARNABLE, rng),
    "spatial-scaled": lambda rng: _spatial_case(TopologyMode.SCALED, rng),
    "temporal": _temporal_case,
    "disentangle": _disentangle_case,
    "gsa": lambda rng: _attention_case(TINY_DSTT.c_s, TINY_DSTT.s_heads, TINY_BATCH * TINY_FRAMES, 5, rng),
    "gta": lambda rng: _attention_case(TINY_DSTT.c_t, TINY_DSTT.t_heads, TINY_BATCH * 5, TINY_FRAMES, rng),
    "cwff": _cwff_case,
    "dstt": _dstt_case,
    "model": _model_case,
}


# ============================================================================
# Private Helper Functions
# ============================================================================


def _projected(forward: Forward, projection: np.ndarray) -> Forward:
    def loss(x: Tensor) -> Tensor:
        return (forward(x) * Tensor.wrap(projection)).sum()

    return loss


def _well_conditioned(grad: np.ndarray | None) -> bool:
    if grad is None or grad.size == 0:
        return False
    magnitude = np.abs(grad)
    return bool(magnitude.min() >= CONDITION_FLOOR * magnitude.max() > 0)


def _draw_point(case: BlockCase, rng: np.random.Generator) -> tuple[np.ndarray, Forward, Forward, int]:
    """Sample (x, input loss, parameter loss) away from kinks and ill-conditioned coordinates."""
    draws = 0
    while True:
        draws += 1
        x = rng.standard_normal(case.input_shape)
        with kink_probe() as probe:
            input_loss = _projected(case.forward, rng.standard_normal(case.forward(Tensor(x)).shape))
            param_loss = _projected(case.param_forward, rng.standard_normal(case.param_forward(Tensor(x)).shape))

            leaf = Tensor(x, requires_grad=True)
            case.module.zero_grad()
            input_loss(leaf).backward()
            input_grad = leaf.grad
            case.module.zero_grad()
            param_loss(Tensor(x)).backward()
            param_grad = case.param.grad
            case.module.zero_grad()

        smooth = probe.margin >= KINK_MARGIN
        if (smooth and _well_conditioned(input_grad) and _well_conditioned(param_grad)) or draws >= MAX_DRAWS:
            if draws >= MAX_DRAWS:
                logger.warning("No well-conditioned sample point after %d draws; checking the last one", draws)
            return x, input_loss, param_loss, draws


# ============================================================================
# Public API
# ============================================================================


def check_block(block: str, seed: int, h: float = DEFAULT_STEP) -> list[GradcheckResult]:
    """Input and parameter checks of one block type at one seed.

    Raises:
        UsageError: If the block name is unknown.
    """
    builder = _BUILDERS.get(block)
    if builder is None:
        raise UsageError(f"Unknown gradcheck block '{block}' (choose from {', '.join(BLOCK_NAMES)})")
    rng = derive_rng(seed, f"gradcheck/{block}")
    with default_dtype(np.float64):
        case = builder(rng)
        x, input_loss, param_loss, draws = _draw_point(case, rng)
        input_error = finite_difference_check(input_loss, x, h)
        param_error = parameter_gradient_check(lambda: param_loss(Tensor(x)), case.param, h)
    case.module.zero_grad()
    return [
        GradcheckResult(block, seed, "input", input_error, draws),
        GradcheckResult(block, seed, case.param_name, param_error, draws),
    ]


def resolve_blocks(selection: str) -> list[str]:
    """'all' or a comma list of block names.

    Raises:
        UsageError: If a name is unknown.
    """
    if selection.strip() == "all":
        return list(BLOCK_NAMES)
    names = [name.strip() for name in selection.split(",") if name.strip()]
    unknown = [name for name in names if name not in _BUILDERS]
    if unknown or not names:
        raise UsageError(f"Unknown gradcheck blocks {unknown} (choose from all, {', '.join(BLOCK_NAMES)})")
    return names


def run_gradcheck_suite(blocks: list[str] | None = None, seeds: int = 10, h: float = DEFAULT_STEP) -> GradcheckSummary:
    """Run every selected block at seeds 0..seeds-1."""
    summary = GradcheckSummary()
    for block in blocks or list(BLOCK_NAMES):
        for seed in range(seeds):
            results = check_block(block, seed, h)
            summary.results.extend(results)
            logger.debug("gradcheck %s seed %d: %s", block, seed, [f"{r.target}={r.error:.2e}" for r in results])
        logger.info("gradcheck %s: max relative error %.3e", block, summary.worst_by_block().get(block, 0.0))
    return summary
