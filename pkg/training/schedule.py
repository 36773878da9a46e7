"""
Learning-Rate Schedule
======================

Per-step linear warmup from lr0 / (warmup_epochs * steps_per_epoch) up to lr0,
then step decay: lr0 * decay^(number of milestones <= current epoch).
"""

from __future__ import annotations

from common.exceptions import UsageError
from common.types import TrainConfig


def lr_at(step: int, steps_per_epoch: int, config: TrainConfig) -> float:
    """Learning rate for the 0-based optimizer step.

    Raises:
        UsageError: If step is negative or steps_per_epoch < 1.
    """
    if steps_per_epoch < 1:
        raise UsageError(f"steps_per_epoch must be >= 1, got {steps_per_epoch}")
    if step < 0:
        raise UsageError(f"step must be >= 0, got {step}")
    warmup_steps = config.warmup_epochs * steps_per_epoch
    if step < warmup_steps:
        return config.lr0 * (step + 1) / warmup_steps
    epoch = step // steps_per_epoch
    passed = sum(1 for milestone in config.milestones if milestone <= epoch)
    return config.lr0 * config.decay**passed


def lr_trace(epochs: int, steps_per_epoch: int, config: TrainConfig) -> list[float]:
    """Learning rate of every step of a run."""
    return [lr_at(step, steps_per_epoch, config) for step in range(epochs * steps_per_epoch)]
