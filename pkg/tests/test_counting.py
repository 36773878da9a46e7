"""Tests for the closed-form parameter and MAC counters."""

from __future__ import annotations

import numpy as np
import pytest

from common.types import DsttConfig, ModelConfig, TopologyMode
from hgct.counting import BlockCount, _attention, _conv, _linear, cost_report, count_flops, count_params
from hgct.model import build_model

DEFAULT_PARAM_RANGE = (790_000, 1_070_000)
REFERENCE_FLOPS = 1.5e9


def _random_config(rng: np.random.Generator) -> ModelConfig:
    c_e = int(rng.choice([8, 16, 32]))
    alpha = float(rng.choice([0.25, 0.5]))
    c_t = round(alpha * c_e)
    return ModelConfig(
        stage_channels=[c_e] * 3,
        stage_blocks=[int(b) for b in rng.integers(1, 3, size=3)],
        dstt=DsttConfig(
            c_e=c_e,
            alpha=alpha,
            s_heads=int(rng.choice([1, 2])),
            t_heads=int(rng.choice([1, 2])) if c_t % 2 == 0 else 1,
            gamma=int(rng.integers(1, 5)),
            joint_type=bool(rng.integers(0, 2)),
            frame_order=bool(rng.integers(0, 2)),
        ),
        topology=TopologyMode(str(rng.choice(["fixed", "learnable", "scaled"]))),
        num_classes=int(rng.integers(2, 11)),
        in_channels=int(rng.choice([2, 3])),
    )


# ============================================================================
# Layer formulas
# ============================================================================


class TestLayerFormulas:
    def test_linear_head(self):
        block = BlockCount("head")
        _linear(block, 128, 120, rows=1)
        assert block.params == 15_480

    def test_pointwise_conv_macs(self):
        block = BlockCount("conv")
        _conv(block, 3, 64, positions=64 * 25)
        assert block.macs == 307_200
        assert block.params == 3 * 64 + 64

    def test_attention_score_macs(self):
        block = BlockCount("gsa")
        _attention(block, 96, rows=64, length=25)
        projections = 96 * 3 * 96 * 64 * 25 + 96 * 96 * 64 * 25
        # scores and weighted values cost the same
        assert block.macs - projections == 2 * 3_840_000


# ============================================================================
# Whole-model totals
# ============================================================================


class TestCostReport:
    """Totals, reference ranges and agreement with the constructed model."""

    def test_default_parameter_range(self):
        params = count_params(ModelConfig())
        assert DEFAULT_PARAM_RANGE[0] <= params <= DEFAULT_PARAM_RANGE[1]

    def test_default_matches_enumeration(self):
        config = ModelConfig()
        assert count_params(config) == build_model(config).num_parameters()

    @pytest.mark.parametrize("seed", range(20))
    def test_random_configs_match_enumeration(self, seed):
        config = _random_config(np.random.default_rng(seed))
        assert count_params(config) == build_model(config, seed=seed).num_parameters()

    def test_default_flops_range(self):
        flops = count_flops(ModelConfig(), frames=64, joints=25)
        assert flops["flops_2x"] == 2 * flops["macs"]
        in_range = [0.5 * REFERENCE_FLOPS <= value <= 1.5 * REFERENCE_FLOPS for value in flops.values()]
        assert any(in_range)

    def test_blocks_are_additive(self):
        report = cost_report(ModelConfig())
        assert report.params == sum(b.params for b in report.blocks)
        assert report.macs == sum(b.macs for b in report.blocks)
        names = [b.name for b in report.blocks]
        assert names[0] == "data_bn"
        assert names[-1] == "head"
        assert "stage1.stgc2" in names
        assert "stage3.dstt" in names

    def test_wider_model_costs_more(self):
        narrow = ModelConfig()
        wide = ModelConfig(stage_channels=[256] * 3, dstt=DsttConfig(c_e=256, s_heads=6, t_heads=8))
        assert count_params(wide) > count_params(narrow)

    def test_macs_scale_with_frames(self):
        config = ModelConfig()
        assert count_flops(config, frames=128)["macs"] > count_flops(config, frames=64)["macs"]

    def test_to_dict(self):
        data = cost_report(ModelConfig(), frames=32).to_dict()
        assert data["frames"] == 32
        assert data["joints"] == 25
        assert data["flops_2x"] == 2 * data["macs"]
