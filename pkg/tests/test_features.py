"""Tests for the per-stage feature-response dump."""

from __future__ import annotations

import csv
from dataclasses import replace

import numpy as np
import pytest

from hgct.features import CSV_COLUMNS, KINDS, dump_feature_responses, feature_responses, stgc_kind
from hgct.model import build_model


@pytest.fixture
def model(float64, tiny_config, chain3):
    return build_model(tiny_config, seed=6, graph=chain3)


@pytest.fixture
def batch(rng) -> np.ndarray:
    return rng.normal(size=(2, 3, 5, 3))


class TestFeatureResponses:
    def test_series_per_stage_and_kind(self, model, batch, tiny_config):
        responses = feature_responses(model, batch)
        assert [(r.stage, r.kind) for r in responses] == [
            (s, k) for s in (1, 2, 3) for k in (stgc_kind(1), *KINDS)
        ]
        lengths = {r.kind: len(r.values) for r in responses if r.stage == 1}
        assert lengths == {
            "stgc_output.1": tiny_config.stage_channels[0],
            "spatial": 3,
            "temporal": 5,
            "block_output": tiny_config.dstt.c_e,
        }

    def test_every_stgc_block_gets_a_series(self, float64, tiny_config, chain3, batch):
        model = build_model(replace(tiny_config, stage_blocks=[2, 1, 1]), seed=6, graph=chain3)
        kinds = [r.kind for r in feature_responses(model, batch) if r.stage == 1]
        assert kinds == ["stgc_output.1", "stgc_output.2", *KINDS]

    def test_each_series_peaks_at_one(self, model, batch):
        for response in feature_responses(model, batch):
            assert response.values.max() == pytest.approx(1.0)
            assert response.values.min() >= 0.0

    def test_restores_mode_and_capture(self, model, batch):
        model.train()
        feature_responses(model, batch)
        assert model.training
        assert not any(block.capture for block in model.dstt_blocks())
        assert not any(block.capture for stage in model.stgc_blocks() for block in stage)

    def test_dump_csv(self, model, batch, tmp_path):
        path = tmp_path / "out" / "features.csv"
        responses = dump_feature_responses(model, batch, path)
        with path.open(encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) - 1 == sum(len(r.values) for r in responses)
        assert rows[1][:3] == ["1", "stgc_output.1", "0"]
        assert ["1", "spatial", "0"] in [row[:3] for row in rows]
