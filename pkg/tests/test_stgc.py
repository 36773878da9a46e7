"""Tests for the adjacency modes and the spatiotemporal graph convolution block."""

from __future__ import annotations

import numpy as np
import pytest

from autodiff.tensor import Tensor
from common.exceptions import ConfigError, DimensionError, TopologyError
from common.types import TopologyMode
from hgct.stgc import MultiscaleTemporalConv, SpatialGraphConv, StgcBlock
from hgct.topology import PartitionedAdjacency, effective_adjacency
from skeleton.graph import build_partitions


@pytest.fixture
def parts(graph5) -> np.ndarray:
    return build_partitions(graph5)


@pytest.fixture
def feature(rng) -> Tensor:
    return Tensor(rng.normal(size=(2, 4, 6, 5)))


# ============================================================================
# Adjacency
# ============================================================================


class TestPartitionedAdjacency:
    """fixed / learnable / scaled modes and the freeze window."""

    def test_fixed_has_no_parameters(self, float64, parts):
        adj = PartitionedAdjacency(parts, TopologyMode.FIXED)
        assert adj.parameters() == []
        np.testing.assert_allclose(adj().data, parts)

    def test_learnable_starts_at_base(self, float64, parts):
        adj = PartitionedAdjacency(parts, TopologyMode.LEARNABLE, freeze_epochs=0)
        assert [name for name, _ in adj.named_parameters()] == ["a_tilde"]
        np.testing.assert_allclose(adj().data, parts)

    def test_scaled_multiplies_by_lambda(self, float64, parts):
        adj = PartitionedAdjacency(parts, TopologyMode.SCALED, freeze_epochs=0)
        adj.scale.data[:] = 2.0
        np.testing.assert_allclose(adj().data, 2.0 * parts)

    def test_freeze_window(self, float64, parts):
        adj = PartitionedAdjacency(parts, TopologyMode.SCALED, freeze_epochs=2)
        assert adj.frozen and adj.a_tilde.frozen
        effective_adjacency(adj, 1).sum().backward()
        assert adj.a_tilde.grad is None
        assert adj.scale.grad is not None

        adj.zero_grad()
        effective_adjacency(adj, 2).sum().backward()
        assert not adj.a_tilde.frozen
        assert adj.a_tilde.grad is not None

    def test_bad_shape(self):
        with pytest.raises(TopologyError):
            PartitionedAdjacency(np.zeros((2, 5, 5)))


# ============================================================================
# Spatial and temporal convolutions
# ============================================================================


class TestSpatialGraphConv:
    def test_aggregate_matches_reference(self, float64, rng, parts, feature):
        gc = SpatialGraphConv(4, 3, parts, rng, TopologyMode.FIXED)
        expected = np.zeros((2, 3, 6, 5))
        for k, conv in enumerate(gc.convs):
            w = conv.weight.data[:, :, 0, 0]
            contracted = np.einsum("bctu,uv->bctv", feature.data, parts[k])
            expected += np.einsum("oc,bctv->botv", w, contracted) + conv.bias.data[None, :, None, None]
        np.testing.assert_allclose(gc.aggregate(feature).data, expected, atol=1e-12)

    def test_joint_mismatch(self, float64, rng, parts):
        gc = SpatialGraphConv(4, 3, parts, rng)
        with pytest.raises(DimensionError):
            gc(Tensor(np.zeros((1, 4, 6, 3))))

    def test_output_nonnegative(self, float64, rng, parts, feature):
        assert SpatialGraphConv(4, 8, parts, rng)(feature).data.min() >= 0.0

    def test_joint_permutation_with_conjugated_adjacency(self, float64, parts, feature):
        perm = np.array([2, 4, 0, 1, 3])
        # (P^T A P)[i, j] = A[perm[i], perm[j]]
        conjugated = parts[:, perm][:, :, perm]
        gc = SpatialGraphConv(4, 3, parts, np.random.default_rng(0), TopologyMode.FIXED).eval()
        permuted_gc = SpatialGraphConv(4, 3, conjugated, np.random.default_rng(0), TopologyMode.FIXED).eval()
        expected = gc(feature).data[..., perm]
        np.testing.assert_allclose(permuted_gc(Tensor(feature.data[..., perm])).data, expected, atol=1e-12)


class TestMultiscaleTemporalConv:
    def test_preserves_shape(self, float64, rng, feature):
        out = MultiscaleTemporalConv(4, rng)(feature)
        assert out.shape == feature.shape
        assert out.data.min() >= 0.0

    def test_branch_count(self, rng):
        assert len(MultiscaleTemporalConv(8, rng, dilations=(1, 2)).branches) == 4
        assert len(MultiscaleTemporalConv(10, rng, dilations=(1, 2, 3)).branches) == 5

    def test_indivisible_width(self, rng):
        with pytest.raises(ConfigError):
            MultiscaleTemporalConv(6, rng)

    def test_wrong_channels(self, float64, rng):
        with pytest.raises(DimensionError):
            MultiscaleTemporalConv(8, rng)(Tensor(np.zeros((1, 4, 6, 5))))

    def test_translation_equivariant_away_from_boundaries(self, float64, rng):
        conv = MultiscaleTemporalConv(4, rng).eval()
        x = rng.normal(size=(2, 4, 20, 5))
        shift = 3
        shifted = np.concatenate([rng.normal(size=(2, 4, shift, 5)), x[:, :, :-shift]], axis=2)
        # frames within 4 of either end see the zero padding
        np.testing.assert_allclose(
            conv(Tensor(shifted)).data[:, :, shift + 4 : 16], conv(Tensor(x)).data[:, :, 4 : 16 - shift], atol=1e-12
        )


class TestStgcBlock:
    def test_identity_residual_when_widths_match(self, rng, parts):
        assert StgcBlock(4, 4, parts, rng).residual is None
        assert StgcBlock(3, 4, parts, rng).residual is not None

    def test_forward_shape_and_gradients(self, float64, rng, parts):
        block = StgcBlock(3, 4, parts, rng, TopologyMode.SCALED, freeze_epochs=0)
        x = Tensor(rng.normal(size=(2, 3, 6, 5)), requires_grad=True)
        out = block(x)
        assert out.shape == (2, 4, 6, 5)
        (out * out).sum().backward()
        assert x.grad is not None
        assert all(p.grad is not None for p in block.parameters())

    def test_impulse_reaches_four_frames_each_way(self, float64, rng, parts):
        block = StgcBlock(3, 4, parts, rng).eval()
        x = rng.normal(size=(2, 3, 13, 5))
        kicked = x.copy()
        kicked[:, :, 6, 2] += rng.normal(size=(2, 3))
        delta = np.abs(block(Tensor(kicked)).data - block(Tensor(x)).data).max(axis=(0, 1, 3))
        assert delta[6] > 0
        np.testing.assert_allclose(np.concatenate([delta[:2], delta[11:]]), 0.0, atol=1e-12)
