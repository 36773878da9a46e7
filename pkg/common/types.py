"""
Shared Types and Data Classes
==============================

Common type definitions used across the tensor core, model, training and CLI packages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from common.exceptions import ConfigError

# ============================================================================
# Enumerations
# ============================================================================


class TopologyMode(str, Enum):
    """How the partitioned adjacency enters the spatial graph convolution."""

    FIXED = "fixed"  # A_o, never trained
    LEARNABLE = "learnable"  # A_tilde initialised from A_o
    SCALED = "scaled"  # lambda * A_tilde


class Modality(str, Enum):
    """Input data modality of one stream."""

    JOINT = "joint"
    BONE = "bone"
    JOINT_MOTION = "joint-motion"
    BONE_MOTION = "bone-motion"


class RunMode(str, Enum):
    """Train/eval switch for normalization, dropout and resampling."""

    TRAIN = "train"
    EVAL = "eval"


class DType(str, Enum):
    """Floating point precision of a run."""

    FLOAT32 = "float32"
    FLOAT64 = "float64"

    @classmethod
    def parse(cls, value: str | DType) -> DType:
        """Accept the canonical names plus the short CLI spellings f32/f64."""
        if isinstance(value, DType):
            return value
        aliases = {"f32": cls.FLOAT32, "f64": cls.FLOAT64}
        lowered = value.strip().lower()
        if lowered in aliases:
            return aliases[lowered]
        try:
            return cls(lowered)
        except ValueError as e:
            raise ConfigError(f"dtype must be one of float32, float64, f32, f64; got: {value}") from e


class AblationAxis(str, Enum):
    """Axes the ablation runner can sweep."""

    TOPOLOGY = "topology"
    ALPHA = "alpha"
    GAMMA = "gamma"
    POSITIONAL = "positional"


# ============================================================================
# Model Configuration
# ============================================================================


@dataclass
class DsttConfig:  # pylint: disable=too-many-instance-attributes
    """
    Settings of every disentangled spatiotemporal transformer block.

    Defaults: C_e=128, alpha=1/4 (C_e^S=96, C_e^T=32), 6 spatial heads,
    8 temporal heads, expansion 3, all dropouts 0.

    Attributes:
        c_e: embedding channels, C_e = C_e^S + C_e^T
        alpha: temporal fraction of the embedding channels
        s_heads: attention heads over joint tokens (GSA)
        t_heads: attention heads over frame tokens (GTA)
        gamma: expansion factor of the channel-wise feed forward
        attn_drop: dropout on attention probabilities
        ff_drop: dropout at the end of the channel-wise feed forward
        joint_type: add the learnable joint-type table in the first stage
        frame_order: add the sinusoidal frame encoding in the first stage
    """

    c_e: int = 128
    alpha: float = 0.25
    s_heads: int = 6
    t_heads: int = 8
    gamma: int = 3
    attn_drop: float = 0.0
    ff_drop: float = 0.0
    joint_type: bool = True
    frame_order: bool = True

    def __post_init__(self) -> None:
        """Validate channel arithmetic and head divisibility.

        Raises:
            ConfigError: If C_e^T is not a positive integer smaller than C_e,
                or a head count does not divide its stream width.
        """
        if self.c_e <= 0:
            raise ConfigError(f"dstt.c_e must be positive, got: {self.c_e}")
        temporal = self.alpha * self.c_e
        if abs(temporal - round(temporal)) > 1e-9 or not 0 < round(temporal) < self.c_e:
            raise ConfigError(
                f"dstt.alpha * dstt.c_e must be an integer in (0, c_e); got alpha={self.alpha}, c_e={self.c_e}"
            )
        if self.s_heads <= 0 or self.c_s % self.s_heads != 0:
            raise ConfigError(f"dstt.s_heads={self.s_heads} does not divide C_e^S={self.c_s}")
        if self.t_heads <= 0 or self.c_t % self.t_heads != 0:
            raise ConfigError(f"dstt.t_heads={self.t_heads} does not divide C_e^T={self.c_t}")
        if self.gamma < 1:
            raise ConfigError(f"dstt.gamma must be >= 1, got: {self.gamma}")
        for name in ("attn_drop", "ff_drop"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"dstt.{name} must lie in [0, 1), got: {value}")

    @property
    def c_t(self) -> int:
        """Temporal stream width C_e^T."""
        return round(self.alpha * self.c_e)

    @property
    def c_s(self) -> int:
        """Spatial stream width C_e^S."""
        return self.c_e - self.c_t

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            "c_e": self.c_e,
            "alpha": self.alpha,
            "s_heads": self.s_heads,
            "t_heads": self.t_heads,
            "gamma": self.gamma,
            "attn_drop": self.attn_drop,
            "ff_drop": self.ff_drop,
            "joint_type": self.joint_type,
            "frame_order": self.frame_order,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DsttConfig:
        """Create from dictionary."""
        return cls(
            c_e=int(data.get("c_e", 128)),
            alpha=float(data.get("alpha", 0.25)),
            s_heads=int(data.get("s_heads", 6)),
            t_heads=int(data.get("t_heads", 8)),
            gamma=int(data.get("gamma", 3)),
            attn_drop=float(data.get("attn_drop", 0.0)),
            ff_drop=float(data.get("ff_drop", 0.0)),
            joint_type=bool(data.get("joint_type", True)),
            frame_order=bool(data.get("frame_order", True)),
        )


@dataclass
class ModelConfig:  # pylint: disable=too-many-instance-attributes
    """
    Every architectural hyperparameter of the three-stage model.

    Attributes:
        stage_channels: output width of the STGC blocks of each stage
        stage_blocks: number of STGC blocks in each stage
        dstt: shared transformer block settings
        topology: adjacency mode of every spatial graph convolution
        freeze_epochs: epochs during which A_tilde stays at its initial value
        num_classes: width of the classification head
        num_joints: V, must match the skeleton graph
        in_channels: C_in, 2 or 3 coordinates
        head_dropout: dropout before the classification head
        dilations: dilation rates of the temporal 5x1 branches
        graph: "ntu25" or a path to a graph definition JSON file
    """

    stage_channels: list[int] = field(default_factory=lambda: [128, 128, 128])
    stage_blocks: list[int] = field(default_factory=lambda: [2, 2, 2])
    dstt: DsttConfig = field(default_factory=DsttConfig)
    topology: TopologyMode = TopologyMode.SCALED
    freeze_epochs: int = 5
    num_classes: int = 120
    num_joints: int = 25
    in_channels: int = 3
    head_dropout: float = 0.0
    dilations: list[int] = field(default_factory=lambda: [1, 2])
    graph: str = "ntu25"

    def __post_init__(self) -> None:
        """Validate the stage contract.

        Raises:
            ConfigError: If stage lists are malformed, a stage width differs
                from C_e, or a width is not divisible by the temporal branch count.
        """
        self.topology = TopologyMode(self.topology)
        if len(self.stage_channels) != 3 or len(self.stage_blocks) != 3:
            raise ConfigError(
                f"model.stage_channels and model.stage_blocks need exactly 3 entries, "
                f"got: {self.stage_channels}, {self.stage_blocks}"
            )
        if any(b < 1 for b in self.stage_blocks):
            raise ConfigError(f"model.stage_blocks entries must be >= 1, got: {self.stage_blocks}")
        branches = self.temporal_branches
        for width in self.stage_channels:
            if width != self.dstt.c_e:
                raise ConfigError(
                    f"stage width {width} must equal dstt.c_e={self.dstt.c_e} for the DSTT residual connection"
                )
            if width % branches != 0:
                raise ConfigError(f"stage width {width} is not divisible by {branches} temporal branches")
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise ConfigError(f"model.dilations must be positive integers, got: {self.dilations}")
        if self.in_channels not in (2, 3):
            raise ConfigError(f"model.in_channels must be 2 or 3, got: {self.in_channels}")
        if self.num_classes < 1:
            raise ConfigError(f"model.num_classes must be >= 1, got: {self.num_classes}")
        if self.num_joints < 1:
            raise ConfigError(f"model.num_joints must be >= 1, got: {self.num_joints}")
        if self.freeze_epochs < 0:
            raise ConfigError(f"model.freeze_epochs must be >= 0, got: {self.freeze_epochs}")
        if not 0.0 <= self.head_dropout < 1.0:
            raise ConfigError(f"model.head_dropout must lie in [0, 1), got: {self.head_dropout}")

    @property
    def temporal_branches(self) -> int:
        """Branch count of the multiscale temporal convolution."""
        return len(self.dilations) + 2

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            "stage_channels": list(self.stage_channels),
            "stage_blocks": list(self.stage_blocks),
            "dstt": self.dstt.to_dict(),
            "topology": self.topology.value,
            "freeze_epochs": self.freeze_epochs,
            "num_classes": self.num_classes,
            "num_joints": self.num_joints,
            "in_channels": self.in_channels,
            "head_dropout": self.head_dropout,
            "dilations": list(self.dilations),
            "graph": self.graph,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelConfig:
        """Create from dictionary."""
        return cls(
            stage_channels=[int(c) for c in data.get("stage_channels", [128, 128, 128])],
            stage_blocks=[int(b) for b in data.get("stage_blocks", [2, 2, 2])],
            dstt=DsttConfig.from_dict(data.get("dstt", {})),
            topology=TopologyMode(data.get("topology", "scaled")),
            freeze_epochs=int(data.get("freeze_epochs", 5)),
            num_classes=int(data.get("num_classes", 120)),
            num_joints=int(data.get("num_joints", 25)),
            in_channels=int(data.get("in_channels", 3)),
            head_dropout=float(data.get("head_dropout", 0.0)),
            dilations=[int(d) for d in data.get("dilations", [1, 2])],
            graph=str(data.get("graph", "ntu25")),
        )


# ============================================================================
# Training Configuration
# ============================================================================


@dataclass
class TrainConfig:  # pylint: disable=too-many-instance-attributes
    """
    Optimization hyperparameters.

    Defaults: SGD momentum 0.9, 60 epochs, LR 0.05 divided by 10 at epochs
    40 and 50, 5 warmup epochs, label smoothing 0.1, weight decay 0.0002,
    batch size 64, 64-frame inputs.
    """

    lr0: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 0.0002
    epochs: int = 60
    milestones: list[int] = field(default_factory=lambda: [40, 50])
    decay: float = 0.1
    warmup_epochs: int = 5
    label_smoothing: float = 0.1
    batch_size: int = 64
    seed: int = 0
    dtype: DType = DType.FLOAT32
    frames: int = 64
    modality: Modality = Modality.JOINT
    early_stop_accuracy: float = 0.0  # 0 disables

    def __post_init__(self) -> None:
        """Validate ranges.

        Raises:
            ConfigError: If a value is outside its admissible range.
        """
        self.dtype = DType.parse(self.dtype)
        self.modality = Modality(self.modality)
        if self.lr0 < 0:
            raise ConfigError(f"train.lr0 must be >= 0, got: {self.lr0}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"train.momentum must lie in [0, 1), got: {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"train.weight_decay must be >= 0, got: {self.weight_decay}")
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got: {self.epochs}")
        if sorted(self.milestones) != list(self.milestones):
            raise ConfigError(f"train.milestones must be increasing, got: {self.milestones}")
        if self.warmup_epochs < 0:
            raise ConfigError(f"train.warmup_epochs must be >= 0, got: {self.warmup_epochs}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"train.label_smoothing must lie in [0, 1), got: {self.label_smoothing}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got: {self.batch_size}")
        if self.frames < 1:
            raise ConfigError(f"train.frames must be >= 1, got: {self.frames}")

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            "lr0": self.lr0,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "epochs": self.epochs,
            "milestones": list(self.milestones),
            "decay": self.decay,
            "warmup_epochs": self.warmup_epochs,
            "label_smoothing": self.label_smoothing,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "dtype": self.dtype.value,
            "frames": self.frames,
            "modality": self.modality.value,
            "early_stop_accuracy": self.early_stop_accuracy,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainConfig:
        """Create from dictionary."""
        return cls(
            lr0=float(data.get("lr0", 0.05)),
            momentum=float(data.get("momentum", 0.9)),
            weight_decay=float(data.get("weight_decay", 0.0002)),
            epochs=int(data.get("epochs", 60)),
            milestones=[int(m) for m in data.get("milestones", [40, 50])],
            decay=float(data.get("decay", 0.1)),
            warmup_epochs=int(data.get("warmup_epochs", 5)),
            label_smoothing=float(data.get("label_smoothing", 0.1)),
            batch_size=int(data.get("batch_size", 64)),
            seed=int(data.get("seed", 0)),
            dtype=DType.parse(data.get("dtype", "float32")),
            frames=int(data.get("frames", 64)),
            modality=Modality(data.get("modality", "joint")),
            early_stop_accuracy=float(data.get("early_stop_accuracy", 0.0)),
        )


# ============================================================================
# Run Manifest
# ============================================================================


@dataclass
class RunManifest:
    """Fully-resolved description of one CLI run, written next to its outputs."""

    command: str
    model: ModelConfig
    train: TrainConfig
    data_paths: list[str] = field(default_factory=list)
    seed: int = 0
    tool_version: str = ""
    output_dir: str = ""
    options: dict[str, Any] = field(default_factory=dict)
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            "command": self.command,
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "data_paths": list(self.data_paths),
            "seed": self.seed,
            "tool_version": self.tool_version,
            "output_dir": self.output_dir,
            "options": dict(self.options),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunManifest:
        """Create from dictionary.

        Raises:
            KeyError: If 'command' is missing.
        """
        if "command" not in data:
            raise KeyError("Required key 'command' missing from manifest dict")
        return cls(
            command=data["command"],
            model=ModelConfig.from_dict(data.get("model", {})),
            train=TrainConfig.from_dict(data.get("train", {})),
            data_paths=list(data.get("data_paths", [])),
            seed=int(data.get("seed", 0)),
            tool_version=data.get("tool_version", ""),
            output_dir=data.get("output_dir", ""),
            options=dict(data.get("options", {})),
            created_at=data.get("created_at", datetime.now(timezone.utc).isoformat()),
        )
