"""
Training Loop and Evaluation
============================

One run = build the model from the seed, then per epoch:

1. shuffle the training split (seeded)
2. for each batch: train-mode crop resampling, forward, label-smoothed loss,
   backward, SGD step at the scheduled learning rate
3. evaluate on the test split

All randomness (initialization, shuffling, crops, dropout) is drawn from
generators derived from the run seed, so a run is reproducible from its
configuration alone.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from autodiff import functional as ops
from autodiff.tensor import Tensor, default_dtype, no_grad
from common.exceptions import ConfigError, NumericalError
from common.state import FileRunRepository, RunRepository
from common.types import ModelConfig, RunMode, TrainConfig
from common.utils import derive_rng
from hgct.checkpoint import save_checkpoint
from hgct.model import HgctModel, build_model
from skeleton.data import DatasetSplit
from skeleton.graph import SkeletonGraph, load_graph
from skeleton.preprocess import pad_bodies, prepare_sample, prepare_split, stack_batch
from training.fusion import ScoreSet, accuracy_from_scores, per_class_accuracy, write_scores_csv
from training.loss import label_smoothed_ce
from training.optim import SGD
from training.schedule import lr_at

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "model.ckpt"
REPORT_NAME = "report"
SCORES_FILE = "scores.csv"
EVAL_BATCH_SIZE = 64


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float
    lr: float
    seconds: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "lr": self.lr,
            "seconds": self.seconds,
        }


@dataclass
class RunReport:
    """Metrics of one training run.

    Attributes:
        epochs: One record per completed epoch
        loss_trace: Training loss of every optimizer step
        lr_trace: Learning rate of every optimizer step
        wall_time: Seconds spent in the run
        checkpoint_path: Final checkpoint, empty if none was written
        early_stopped: Whether early_stop_accuracy ended the run
        seed: Run seed
    """

    epochs: list[EpochRecord] = field(default_factory=list)
    loss_trace: list[float] = field(default_factory=list)
    lr_trace: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    checkpoint_path: str = ""
    early_stopped: bool = False
    seed: int = 0

    @property
    def final_test_accuracy(self) -> float:
        return self.epochs[-1].test_accuracy if self.epochs else 0.0

    @property
    def best_test_accuracy(self) -> float:
        return max((e.test_accuracy for e in self.epochs), default=0.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs": [e.to_dict() for e in self.epochs],
            "loss_trace": list(self.loss_trace),
            "lr_trace": list(self.lr_trace),
            "wall_time": self.wall_time,
            "checkpoint_path": self.checkpoint_path,
            "early_stopped": self.early_stopped,
            "seed": self.seed,
            "final_test_accuracy": self.final_test_accuracy,
            "best_test_accuracy": self.best_test_accuracy,
        }


@dataclass
class EvalResult:
    accuracy: float
    per_class: list[float | None]
    scores: ScoreSet

    def to_dict(self) -> dict[str, Any]:
        return {"accuracy": self.accuracy, "per_class_accuracy": self.per_class, "samples": len(self.scores.labels)}


@dataclass
class TrainResult:
    report: RunReport
    model: HgctModel
    evaluation: EvalResult


# ============================================================================
# Private Helper Functions
# ============================================================================


def _as_model_input(batch: np.ndarray) -> Tensor:
    """Drop the body axis when every sample has a single body."""
    return Tensor(batch[..., 0] if batch.shape[-1] == 1 else batch)


def _train_batch(
    split: DatasetSplit,
    indices: np.ndarray,
    graph: SkeletonGraph,
    config: TrainConfig,
    rng: np.random.Generator,
    bodies: int,
    dtype: type[np.floating],
) -> tuple[np.ndarray, np.ndarray]:
    samples = [
        pad_bodies(prepare_sample(split.samples[i], graph, config.modality, config.frames, RunMode.TRAIN, rng), bodies)
        for i in indices
    ]
    return stack_batch(samples, dtype), np.array([split.samples[i].label for i in indices], dtype=np.int64)


def _check_labels(split: DatasetSplit, config: ModelConfig) -> None:
    if len(split) and int(split.labels.max()) >= config.num_classes:
        raise ConfigError(
            f"split '{split.name}' has label {int(split.labels.max())} but model.num_classes={config.num_classes}"
        )


# ============================================================================
# Evaluation
# ============================================================================


def predict_scores(model: HgctModel, x: np.ndarray, batch_size: int = EVAL_BATCH_SIZE) -> np.ndarray:
    """Eval-mode softmax scores [N, K] for prepared inputs [N, C, T, V, M]."""
    was_training = model.training
    model.eval()
    rows: list[np.ndarray] = []
    try:
        with no_grad():
            for start in range(0, len(x), batch_size):
                logits = model(_as_model_input(x[start : start + batch_size]))
                rows.append(ops.softmax(logits, axis=-1).data.astype(np.float64))
    finally:
        model.train(was_training)
    if not rows:
        return np.zeros((0, model.config.num_classes), dtype=np.float64)
    return np.concatenate(rows, axis=0)


def evaluate(
    model: HgctModel,
    split: DatasetSplit,
    config: TrainConfig,
    graph: SkeletonGraph | None = None,
    prepared: tuple[np.ndarray, np.ndarray] | None = None,
) -> EvalResult:
    """Top-1 accuracy, per-class accuracy and softmax scores on a split."""
    graph = graph or model.graph
    if prepared is None:
        prepared = prepare_split(split, graph, config.modality, config.frames, np.dtype(config.dtype.value).type)
    x, labels = prepared
    scores = predict_scores(model, x)
    ids = tuple(s.sample_id or f"{split.name}-{i}" for i, s in enumerate(split.samples))
    score_set = ScoreSet(ids, labels, scores)
    return EvalResult(
        accuracy=accuracy_from_scores(scores, labels),
        per_class=per_class_accuracy(scores, labels, model.config.num_classes),
        scores=score_set,
    )


# ============================================================================
# Training
# ============================================================================


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    train_split: DatasetSplit,
    test_split: DatasetSplit,
    run_dir: Path | None = None,
    graph: SkeletonGraph | None = None,
    repository: RunRepository | None = None,
    max_epochs: int | None = None,
) -> TrainResult:
    """Train from scratch and evaluate after every epoch.

    max_epochs cuts the run short without touching the schedule, which is
    still laid out over train_config.epochs. When run_dir is given, the final
    checkpoint, the run report and the final score matrix are written there.

    Raises:
        ConfigError: If a label does not fit the classifier head.
        NumericalError: If the training loss becomes non-finite.
    """
    graph = graph or load_graph(model_config.graph)
    _check_labels(train_split, model_config)
    _check_labels(test_split, model_config)
    dtype = np.dtype(train_config.dtype.value).type
    started = time.perf_counter()

    with default_dtype(dtype):
        model = build_model(model_config, seed=train_config.seed, graph=graph)
    optimizer = SGD(model.named_parameters(), train_config.momentum, train_config.weight_decay)
    shuffle_rng = derive_rng(train_config.seed, "shuffle")
    crop_rng = derive_rng(train_config.seed, "crop")

    n = len(train_split)
    steps_per_epoch = max(1, math.ceil(n / train_config.batch_size))
    bodies = max((s.bodies for s in train_split.samples), default=1)
    prepared_test = prepare_split(test_split, graph, train_config.modality, train_config.frames, dtype)
    epochs = train_config.epochs if max_epochs is None else min(max_epochs, train_config.epochs)
    report = RunReport(seed=train_config.seed)
    evaluation = EvalResult(0.0, [], ScoreSet((), np.zeros(0, dtype=np.int64), np.zeros((0, 0))))
    logger.info(
        "Training %d parameters on %d samples for %d epochs (%d steps/epoch)",
        model.num_parameters(),
        n,
        epochs,
        steps_per_epoch,
    )

    step = 0
    for epoch in range(epochs):
        epoch_start = time.perf_counter()
        model.train()
        model.set_epoch(epoch)
        order = shuffle_rng.permutation(n)
        losses: list[float] = []
        correct = 0
        lr = 0.0
        for start in range(0, n, train_config.batch_size):
            indices = order[start : start + train_config.batch_size]
            x, labels = _train_batch(train_split, indices, graph, train_config, crop_rng, bodies, dtype)
            lr = lr_at(step, steps_per_epoch, train_config)

            optimizer.zero_grad()
            logits = model(_as_model_input(x))
            loss = label_smoothed_ce(logits, labels, train_config.label_smoothing)
            value = loss.item()
            if not math.isfinite(value):
                logger.error("Non-finite loss %s at epoch %d step %d (lr=%g)", value, epoch, step, lr)
                raise NumericalError(f"training loss became {value} at epoch {epoch}, step {step}")
            loss.backward()
            optimizer.step(lr)

            losses.append(value)
            report.loss_trace.append(value)
            report.lr_trace.append(lr)
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
            step += 1

        evaluation = evaluate(model, test_split, train_config, graph, prepared_test)
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)) if losses else 0.0,
            train_accuracy=correct / n if n else 0.0,
            test_accuracy=evaluation.accuracy,
            lr=lr,
            seconds=time.perf_counter() - epoch_start,
        )
        report.epochs.append(record)
        logger.info(
            "epoch %d/%d loss %.4f train %.3f test %.3f lr %.5f",
            epoch + 1,
            epochs,
            record.train_loss,
            record.train_accuracy,
            record.test_accuracy,
            lr,
        )
        if 0 < train_config.early_stop_accuracy <= evaluation.accuracy:
            report.early_stopped = True
            logger.info("Early stop: test accuracy %.3f reached at epoch %d", evaluation.accuracy, epoch + 1)
            break

    report.wall_time = time.perf_counter() - started
    if run_dir is not None:
        checkpoint = save_checkpoint(
            model, run_dir / CHECKPOINT_FILE, {"epoch": len(report.epochs), "seed": train_config.seed}
        )
        report.checkpoint_path = str(checkpoint)
        write_scores_csv(run_dir / SCORES_FILE, evaluation.scores)
        (repository or FileRunRepository()).save_report(run_dir, REPORT_NAME, report.to_dict())
    return TrainResult(report, model, evaluation)
