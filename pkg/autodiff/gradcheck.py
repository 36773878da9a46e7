"""
Finite-Difference Oracle
========================

Compares reverse-mode gradients with central differences in float64.

Public API:
    finite_difference_check: max relative error for d f(x) / dx
    parameter_gradient_check: same, for a parameter the loss closes over
    relative_error: elementwise error metric shared by both
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from autodiff.tensor import Tensor, no_grad
from common.exceptions import OracleError, UsageError

DEFAULT_STEP = 1e-5
ERROR_FLOOR = 1e-8


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(|a|, |n|, 1e-8) over all coordinates (0.0 when empty)."""
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ERROR_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / scale))


def _evaluate(loss: Tensor) -> float:
    if loss.size != 1:
        raise UsageError(f"finite-difference oracle needs a scalar function, got shape {loss.shape}")
    value = loss.item()
    if not np.isfinite(value):
        raise OracleError(f"function evaluated to a non-finite value: {value}")
    return value


def _central_differences(evaluate: Callable[[], float], values: np.ndarray, h: float) -> np.ndarray:
    """Perturb `values` in place one coordinate at a time; restores every coordinate."""
    if not values.flags.c_contiguous:
        raise UsageError("finite differences need a contiguous buffer to perturb in place")
    numeric = np.zeros(values.shape, dtype=np.float64)
    flat = values.reshape(-1)
    out = numeric.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = evaluate()
        flat[i] = original - h
        minus = evaluate()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return numeric


def finite_difference_check(f: Callable[[Tensor], Tensor], x: Tensor | np.ndarray, h: float = DEFAULT_STEP) -> float:
    """Max relative error between autodiff and central-difference gradients of f at x.

    x is copied to float64; f must map a tensor to a scalar tensor.

    Raises:
        OracleError: If f(x), f(x+h) or f(x-h) is not finite.
        UsageError: If f does not return a scalar.
    """
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    leaf = Tensor(base, requires_grad=True)
    loss = f(leaf)
    _evaluate(loss)
    loss.backward()
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)

    probe = base.copy()

    def evaluate() -> float:
        with no_grad():
            return _evaluate(f(Tensor(probe)))

    return relative_error(analytic, _central_differences(evaluate, probe, h))


def parameter_gradient_check(loss_fn: Callable[[], Tensor], param: Tensor, h: float = DEFAULT_STEP) -> float:
    """Max relative error for a parameter the loss closure reads.

    The parameter must already hold float64 data; it is perturbed in place
    and restored before returning.

    Raises:
        UsageError: If the parameter is not float64 or does not require gradients.
        OracleError: If an evaluation is not finite.
    """
    if param.dtype != np.float64:
        raise UsageError(f"parameter gradient checks run in float64, got {param.dtype}")
    if not param.requires_grad:
        raise UsageError("parameter does not require gradients")
    saved_grad = param.grad
    param.grad = None
    loss = loss_fn()
    _evaluate(loss)
    loss.backward()
    analytic = param.grad if param.grad is not None else np.zeros_like(param.data)
    param.grad = saved_grad

    def evaluate() -> float:
        with no_grad():
            return _evaluate(loss_fn())

    return relative_error(analytic, _central_differences(evaluate, param.data, h))
