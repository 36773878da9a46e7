"""
Feature Responses
=================

Per-stage responses of every STGC block, of the disentangled streams and of
each DSTT block's output, normalized so the largest value of every series is
exactly 1.0:

- stgc_output.k: per channel, root mean square of the k-th STGC block of the stage
- spatial: per joint, mean over (B, T) of the channel L2 norm of F_S
- temporal: per frame, mean over (B, V) of the channel L2 norm of F_T
- block_output: per channel, root mean square of the DSTT output
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from autodiff.tensor import Tensor, no_grad
from hgct.dstt import DsttBlock
from hgct.model import HgctModel
from hgct.stgc import StgcBlock

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("stage", "kind", "index", "response")
KINDS = ("spatial", "temporal", "block_output")
STGC_KIND = "stgc_output"


@dataclass(frozen=True)
class FeatureResponse:
    """One normalized response series of one stage."""

    stage: int
    kind: str
    values: np.ndarray


def _normalize(series: np.ndarray) -> np.ndarray:
    peak = series.max() if series.size else 0.0
    return series / peak if peak > 0 else series


def _channel_norm(f: np.ndarray) -> np.ndarray:
    """[B, C, T, V] -> [B, T, V] L2 norm over channels."""
    return np.sqrt((f.astype(np.float64) ** 2).sum(axis=1))


def _channel_rms(f: np.ndarray) -> np.ndarray:
    """[B, C, T, V] -> [C] root mean square per channel."""
    return np.sqrt((f.astype(np.float64) ** 2).mean(axis=(0, 2, 3)))


def stgc_kind(block: int) -> str:
    """Series name of the `block`-th (1-based) STGC block of a stage."""
    return f"{STGC_KIND}.{block}"


def feature_responses(model: HgctModel, batch: np.ndarray | Tensor) -> list[FeatureResponse]:
    """Run `batch` through the model in eval mode and collect the responses of every stage."""
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    blocks = model.dstt_blocks()
    stgc = model.stgc_blocks()
    capturing: list[StgcBlock | DsttBlock] = [*blocks, *(b for stage in stgc for b in stage)]
    was_training = model.training
    model.eval()
    for block in capturing:
        block.capture = True
    try:
        with no_grad():
            model(x)
    finally:
        for block in capturing:
            block.capture = False
        model.train(was_training)

    responses: list[FeatureResponse] = []
    for stage, (block, stage_stgc) in enumerate(zip(blocks, stgc, strict=True), start=1):
        for k, stgc_block in enumerate(stage_stgc, start=1):
            assert stgc_block.last_output is not None
            responses.append(FeatureResponse(stage, stgc_kind(k), _normalize(_channel_rms(stgc_block.last_output))))
        assert block.last_spatial is not None and block.last_temporal is not None and block.last_output is not None
        spatial = _channel_norm(block.last_spatial).mean(axis=(0, 1))
        temporal = _channel_norm(block.last_temporal).mean(axis=(0, 2))
        responses.append(FeatureResponse(stage, "spatial", _normalize(spatial)))
        responses.append(FeatureResponse(stage, "temporal", _normalize(temporal)))
        responses.append(FeatureResponse(stage, "block_output", _normalize(_channel_rms(block.last_output))))
    return responses


def write_responses_csv(responses: list[FeatureResponse], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for response in responses:
            for index, value in enumerate(response.values):
                writer.writerow([response.stage, response.kind, index, repr(float(value))])
    return path


def dump_feature_responses(model: HgctModel, batch: np.ndarray | Tensor, path: str | Path) -> list[FeatureResponse]:
    """Compute the responses for `batch` and write them as CSV to `path`."""
    responses = feature_responses(model, batch)
    write_responses_csv(responses, path)
    logger.info("Wrote %d feature-response series to %s", len(responses), path)
    return responses
