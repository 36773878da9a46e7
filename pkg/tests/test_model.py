"""Tests for the assembled HGCT classifier."""

from __future__ import annotations

import numpy as np
import pytest

from autodiff.tensor import Tensor
from common.exceptions import DimensionError, TopologyError
from hgct.model import HgctModel, build_model
from hgct.topology import PartitionedAdjacency


@pytest.fixture
def model(float64, tiny_config, chain3) -> HgctModel:
    return build_model(tiny_config, seed=4, graph=chain3)


class TestConstruction:
    def test_stage_layout(self, model, tiny_config):
        assert len(model.stages) == 3
        assert len(model.dstt_blocks()) == 3
        assert model.dstt_blocks()[0].encoding is not None
        assert all(block.encoding is None for block in model.dstt_blocks()[1:])
        assert model.head.weight.shape == (tiny_config.stage_channels[-1], tiny_config.num_classes)

    def test_graph_must_match_joint_count(self, tiny_config, graph5):
        with pytest.raises(TopologyError):
            HgctModel(tiny_config, graph5)

    def test_same_seed_same_weights(self, float64, tiny_config, chain3):
        a = build_model(tiny_config, seed=1, graph=chain3)
        b = build_model(tiny_config, seed=1, graph=chain3)
        c = build_model(tiny_config, seed=2, graph=chain3)
        np.testing.assert_array_equal(a.head.weight.data, b.head.weight.data)
        assert not np.array_equal(a.head.weight.data, c.head.weight.data)

    def test_set_epoch_reaches_every_adjacency(self, float64, small_config, ntu_graph):
        model = build_model(small_config, graph=ntu_graph)
        adjacencies = [m for m in model.modules() if isinstance(m, PartitionedAdjacency)]
        assert len(adjacencies) == 3
        assert all(a.frozen for a in adjacencies)
        model.set_epoch(small_config.freeze_epochs)
        assert not any(a.frozen for a in adjacencies)


class TestForward:
    """Logit shapes, multi-body averaging and input validation."""

    def test_logits_shape(self, model, rng):
        assert model(Tensor(rng.normal(size=(2, 3, 5, 3)))).shape == (2, 3)

    def test_single_body_matches_four_dim_input(self, model, rng):
        model.eval()
        x = rng.normal(size=(2, 3, 5, 3))
        np.testing.assert_allclose(model(Tensor(x[..., None])).data, model(Tensor(x)).data, atol=1e-12)

    def test_absent_body_ignored(self, model, rng):
        model.eval()
        x = rng.normal(size=(1, 3, 5, 3))
        padded = np.concatenate([x[..., None], np.zeros((1, 3, 5, 3, 1))], axis=-1)
        np.testing.assert_allclose(model(Tensor(padded)).data, model(Tensor(x)).data, atol=1e-12)

    def test_two_bodies_are_averaged(self, model, rng):
        model.eval()
        a, b = rng.normal(size=(1, 3, 5, 3)), rng.normal(size=(1, 3, 5, 3))
        both = np.stack([a, b], axis=-1)
        expected = 0.5 * (model(Tensor(a)).data + model(Tensor(b)).data)
        np.testing.assert_allclose(model(Tensor(both)).data, expected, atol=1e-12)

    def test_wrong_joint_count(self, model):
        with pytest.raises(DimensionError):
            model(Tensor(np.zeros((1, 3, 5, 4))))

    def test_wrong_rank(self, model):
        with pytest.raises(DimensionError):
            model(Tensor(np.zeros((3, 5, 3))))

    def test_backward_reaches_every_parameter(self, model, rng):
        logits = model(Tensor(rng.normal(size=(2, 3, 5, 3))))
        (logits * logits).sum().backward()
        assert all(p.grad is not None for p in model.parameters())

    def test_epoch_argument_applies_freeze(self, float64, small_config, ntu_graph, rng):
        model = build_model(small_config, graph=ntu_graph)
        model(Tensor(rng.normal(size=(2, 3, 4, 25))), epoch=0).sum().backward()
        adjacency = model.stages[0].stgc[0].spatial.adjacency
        assert adjacency.a_tilde.grad is None
        model.zero_grad()
        model(Tensor(rng.normal(size=(2, 3, 4, 25))), epoch=1).sum().backward()
        assert adjacency.a_tilde.grad is not None
