"""
SGD with Momentum
=================

Classic heavy-ball update with L2 weight decay folded into the gradient:

    g = grad + weight_decay * p      (only for parameters flagged `decay`)
    v = momentum * v + g
    p = p - lr * v

Frozen parameters and parameters without a gradient are skipped, and their
velocity is left untouched.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

from autodiff.modules import Parameter


class SGD:
    """Momentum SGD over named parameters.

    Attributes:
        params: (name, parameter) pairs in model order
        momentum: Velocity decay
        weight_decay: L2 coefficient for parameters with decay=True
        velocity: Per-name momentum buffers
    """

    def __init__(self, params: Iterable[tuple[str, Parameter]], momentum: float = 0.9, weight_decay: float = 0.0):
        self.params = list(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: dict[str, np.ndarray] = {}

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def step(self, lr: float) -> list[str]:
        """Apply one update in place; returns the names of the parameters updated."""
        updated: list[str] = []
        for name, p in self.params:
            if p.frozen or p.grad is None:
                continue
            g = p.grad.astype(p.dtype, copy=True)
            if p.decay and self.weight_decay:
                g += self.weight_decay * p.data
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(p.data)
                self.velocity[name] = v
            v *= self.momentum
            v += g
            p.data -= lr * v
            updated.append(name)
        return updated

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: v.copy() for name, v in self.velocity.items()}
