"""
Ablation Runner
===============

Each ablation axis has a dedicated handler that expands a base model
configuration into the axis' settings. Adding a new axis = adding a new
handler class and registering it with the dispatcher.

Every setting is counted, then trained and evaluated unless the runner is
asked for parameter counts only.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Protocol

from common.exceptions import ConfigError, UsageError
from common.state import FileRunRepository, RunRepository
from common.types import AblationAxis, DsttConfig, ModelConfig, TopologyMode, TrainConfig
from common.utils import fit_heads
from hgct.counting import count_params
from skeleton.data import DatasetSplit
from skeleton.graph import SkeletonGraph
from training.trainer import train

logger = logging.getLogger(__name__)

ALPHA_SETTINGS = ((0.5, "1/2"), (0.25, "1/4"), (0.125, "1/8"))
GAMMA_SETTINGS = (1, 2, 3, 4)
TABLE_COLUMNS = ("axis", "setting", "params", "accuracy")


@dataclass
class AblationSetting:
    """One row to run: a label and the model configuration it stands for."""

    label: str
    config: ModelConfig


@dataclass
class AblationRow:
    axis: str
    setting: str
    params: int
    accuracy: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"axis": self.axis, "setting": self.setting, "params": self.params, "accuracy": self.accuracy}


@dataclass
class AblationTable:
    axis: AblationAxis
    rows: list[AblationRow] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"axis": self.axis.value, "rows": [r.to_dict() for r in self.rows]}


def _with_dstt(config: ModelConfig, **changes: Any) -> ModelConfig:
    return replace(config, dstt=replace(config.dstt, **changes))


# ============================================================================
# Axis Handlers
# ============================================================================


class AxisHandler(Protocol):
    """Strategy interface for ablation axes."""

    def can_handle(self, axis: AblationAxis) -> bool:
        """Return True if this handler expands the axis."""
        ...

    def settings(self, base: ModelConfig) -> list[AblationSetting]:
        """Model configurations of every row of the axis, in table order."""
        ...


class TopologyAxisHandler:
    """A_o, A_tilde and lambda * A_tilde."""

    def can_handle(self, axis: AblationAxis) -> bool:
        return axis == AblationAxis.TOPOLOGY

    def settings(self, base: ModelConfig) -> list[AblationSetting]:
        return [AblationSetting(mode.value, replace(base, topology=mode)) for mode in TopologyMode]


class AlphaAxisHandler:
    """Temporal fraction of the embedding channels; head counts are refitted per split."""

    def can_handle(self, axis: AblationAxis) -> bool:
        return axis == AblationAxis.ALPHA

    def settings(self, base: ModelConfig) -> list[AblationSetting]:
        result = []
        for alpha, label in ALPHA_SETTINGS:
            c_t = alpha * base.dstt.c_e
            if c_t != int(c_t) or c_t < 1:
                raise ConfigError(f"alpha={label} needs dstt.c_e divisible by 8, got c_e={base.dstt.c_e}")
            c_s = base.dstt.c_e - int(c_t)
            dstt = DsttConfig(
                **{
                    **base.dstt.to_dict(),
                    "alpha": alpha,
                    "s_heads": fit_heads(c_s, base.dstt.s_heads),
                    "t_heads": fit_heads(int(c_t), base.dstt.t_heads),
                }
            )
            result.append(AblationSetting(label, replace(base, dstt=dstt)))
        return result


class GammaAxisHandler:
    """Expansion factor of the channel-wise feed forward."""

    def can_handle(self, axis: AblationAxis) -> bool:
        return axis == AblationAxis.GAMMA

    def settings(self, base: ModelConfig) -> list[AblationSetting]:
        return [AblationSetting(str(g), _with_dstt(base, gamma=g)) for g in GAMMA_SETTINGS]


class PositionalAxisHandler:
    """On/off combinations of the joint-type and frame-order encodings."""

    def can_handle(self, axis: AblationAxis) -> bool:
        return axis == AblationAxis.POSITIONAL

    def settings(self, base: ModelConfig) -> list[AblationSetting]:
        result = []
        for joint_type in (False, True):
            for frame_order in (False, True):
                label = f"joint_type={'on' if joint_type else 'off'},frame_order={'on' if frame_order else 'off'}"
                result.append(AblationSetting(label, _with_dstt(base, joint_type=joint_type, frame_order=frame_order)))
        return result


class AblationDispatcher:
    """Coordinates setting expansion using registered axis handlers."""

    def __init__(self, handlers: list[AxisHandler] | None = None) -> None:
        if handlers is None:
            self.handlers: list[AxisHandler] = [
                TopologyAxisHandler(),
                AlphaAxisHandler(),
                GammaAxisHandler(),
                PositionalAxisHandler(),
            ]
        else:
            self.handlers = handlers

    def get_handler(self, axis: AblationAxis) -> AxisHandler:
        for handler in self.handlers:
            if handler.can_handle(axis):
                return handler
        raise UsageError(f"No handler registered for ablation axis: {axis}")

    def settings(self, axis: AblationAxis, base: ModelConfig) -> list[AblationSetting]:
        return self.get_handler(axis).settings(base)


# ============================================================================
# Runner
# ============================================================================


def run_ablation(
    axis: AblationAxis | str,
    base_config: ModelConfig,
    train_config: TrainConfig,
    train_split: DatasetSplit | None = None,
    test_split: DatasetSplit | None = None,
    graph: SkeletonGraph | None = None,
    params_only: bool = False,
    dispatcher: AblationDispatcher | None = None,
) -> AblationTable:
    """Count, and unless params_only, train and evaluate every setting of an axis.

    Accuracy is the final-epoch test accuracy. Every setting trains with the
    same seed and data.

    Raises:
        UsageError: If the axis is unknown, or training is requested without data.
        ConfigError: If a setting cannot be realized at the base widths.
    """
    try:
        axis = AblationAxis(axis)
    except ValueError as e:
        raise UsageError(f"unknown ablation axis '{axis}'; choose from {[a.value for a in AblationAxis]}") from e
    if not params_only and (train_split is None or test_split is None):
        raise UsageError("run_ablation needs train and test splits unless params_only is set")

    table = AblationTable(axis)
    for setting in (dispatcher or AblationDispatcher()).settings(axis, base_config):
        params = count_params(setting.config)
        logger.info("Ablation %s=%s: %d parameters", axis.value, setting.label, params)
        accuracy = None
        if not params_only:
            assert train_split is not None and test_split is not None
            result = train(setting.config, train_config, train_split, test_split, graph=graph)
            accuracy = result.report.final_test_accuracy
            logger.info("Ablation %s=%s: test accuracy %.4f", axis.value, setting.label, accuracy)
        table.rows.append(AblationRow(axis.value, setting.label, params, accuracy))
    return table


def write_ablation_csv(path: str | Path, table: AblationTable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TABLE_COLUMNS)
        for row in table.rows:
            writer.writerow([row.axis, row.setting, row.params, "" if row.accuracy is None else repr(row.accuracy)])
    return path


def save_ablation(run_dir: Path, table: AblationTable, repository: RunRepository | None = None) -> tuple[Path, Path]:
    """Write ablation_<axis>.json and ablation_<axis>.csv under the run directory."""
    name = f"ablation_{table.axis.value}"
    json_path = (repository or FileRunRepository()).save_report(run_dir, name, table.to_dict())
    return json_path, write_ablation_csv(run_dir / f"{name}.csv", table)
