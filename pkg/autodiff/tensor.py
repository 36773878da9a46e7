"""
Tensor and Reverse-Mode Graph
=============================

Dense numpy-backed tensors that record the operations producing them.

Every tensor created by a differentiable operation while grad mode is on owns
a Node: a process-wide sequence number (append order), the input tensors and
a backward closure mapping the output gradient to input gradients. backward()
walks the reachable nodes in strictly decreasing sequence order, so every
node's output gradient is complete before its closure runs, and adds each
leaf's summed gradient to ``leaf.grad`` once per pass.
"""

from __future__ import annotations

import itertools
import os
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any

import numpy as np

from common.exceptions import DimensionError, NumericalError, UsageError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_SEQUENCE = itertools.count()
_GRAD_ENABLED: ContextVar[bool] = ContextVar("hgct_grad_enabled", default=True)
_DEFAULT_DTYPE: ContextVar[type[np.floating]] = ContextVar("hgct_default_dtype", default=np.float32)
_DEBUG_NUMERICS: ContextVar[bool | None] = ContextVar("hgct_debug_numerics", default=None)

SUPPORTED_DTYPES = (np.float32, np.float64)


# ============================================================================
# Global Switches
# ============================================================================


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (current context only)."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def get_default_dtype() -> type[np.floating]:
    return _DEFAULT_DTYPE.get()


def set_default_dtype(dtype: Any) -> None:
    """Set the dtype used for new tensors and parameters.

    Raises:
        DimensionError: If dtype is not float32 or float64.
    """
    resolved = np.dtype(dtype).type
    if resolved not in SUPPORTED_DTYPES:
        raise DimensionError(f"Unsupported dtype: {dtype} (expected float32 or float64)")
    _DEFAULT_DTYPE.set(resolved)


@contextmanager
def default_dtype(dtype: Any) -> Iterator[None]:
    """Temporarily switch the default dtype."""
    previous = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _DEFAULT_DTYPE.set(previous)


class KinkProbe:
    """Smallest distance to a non-differentiable point seen by piecewise ops."""

    def __init__(self) -> None:
        self.margin = float("inf")

    def record(self, margin: float) -> None:
        self.margin = min(self.margin, margin)


_KINK_PROBE: ContextVar[KinkProbe | None] = ContextVar("hgct_kink_probe", default=None)


@contextmanager
def kink_probe() -> Iterator[KinkProbe]:
    """Collect kink margins (ReLU inputs, max-pool gaps) of the ops run inside the block."""
    probe = KinkProbe()
    token = _KINK_PROBE.set(probe)
    try:
        yield probe
    finally:
        _KINK_PROBE.reset(token)


def record_kink_margin(margin: float) -> None:
    probe = _KINK_PROBE.get()
    if probe is not None:
        probe.record(margin)


def set_debug_numerics(enabled: bool | None) -> None:
    """Force the finite-value check on or off; None defers to HGCT_DEBUG_NUMERICS."""
    _DEBUG_NUMERICS.set(enabled)


def debug_numerics_enabled() -> bool:
    forced = _DEBUG_NUMERICS.get()
    if forced is not None:
        return forced
    return os.environ.get("HGCT_DEBUG_NUMERICS", "").strip().lower() in ("1", "true", "yes", "on")


# ============================================================================
# Graph Records
# ============================================================================


@dataclass(slots=True)
class Node:
    """One recorded operation."""

    seq: int
    op: str
    inputs: tuple[Tensor, ...]
    backward: BackwardFn


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so that grad matches shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def make_result(data: np.ndarray, op: str, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap an op output, attaching a Node when any input requires gradients.

    Raises:
        NumericalError: If debug numerics are on and the output is not finite.
    """
    if debug_numerics_enabled() and not np.all(np.isfinite(data)):
        raise NumericalError(f"Operation '{op}' produced non-finite values (shape {data.shape})")
    out = Tensor.wrap(data)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._node = Node(next(_SEQUENCE), op, tuple(inputs), backward)
    return out


def as_tensor(value: Any, like: Tensor | None = None) -> Tensor:
    """Return value as a Tensor, matching the dtype of `like` for scalars and arrays."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


# ============================================================================
# Tensor
# ============================================================================


class Tensor:
    """Dense array participating in the reverse-mode graph.

    Attributes:
        data: Row-major numpy buffer (float32 or float64)
        requires_grad: Whether gradients flow to this tensor
        grad: Accumulated gradient of the same shape, or None
    """

    __slots__ = ("data", "requires_grad", "grad", "_node")

    # ndarray <op> Tensor dispatches to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, data: Any, requires_grad: bool = False, dtype: Any = None) -> None:
        if dtype is None:
            is_float_array = isinstance(data, np.ndarray) and data.dtype.type in SUPPORTED_DTYPES
            dtype = data.dtype if is_float_array else get_default_dtype()
        self.data: np.ndarray = np.array(data, dtype=dtype)
        if self.data.dtype.type not in SUPPORTED_DTYPES:
            raise DimensionError(f"Unsupported tensor dtype: {self.data.dtype}")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._node: Node | None = None

    @classmethod
    def wrap(cls, data: np.ndarray) -> Tensor:
        """Wrap an op output without copying."""
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = False
        out.grad = None
        out._node = None
        return out

    # -- introspection -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    @property
    def op(self) -> str | None:
        """Name of the operation that produced this tensor, if recorded."""
        return self._node.op if self._node is not None else None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        """Same values, cut from the graph; gradients never flow through it."""
        return Tensor.wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        suffix = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{suffix})"

    def __len__(self) -> int:
        return len(self.data)

    # -- reverse pass --------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's grad.

        Gradients of repeated calls add up; call zero_grad between steps.

        Raises:
            UsageError: If self is not a scalar or does not require gradients.
        """
        if self.data.size != 1:
            raise UsageError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise UsageError("backward() called on a tensor that does not require gradients")

        producers: dict[int, Tensor] = {}
        stack: list[Tensor] = [self]
        while stack:
            tensor = stack.pop()
            node = tensor._node
            if node is None or node.seq in producers:
                continue
            producers[node.seq] = tensor
            stack.extend(t for t in node.inputs if t.requires_grad)

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        leaves: dict[int, Tensor] = {id(self): self} if self._node is None else {}

        for seq in sorted(producers, reverse=True):
            output = producers[seq]
            upstream = grads.pop(id(output), None)
            if upstream is None:
                continue
            node = output._node
            assert node is not None
            for inp, grad in zip(node.inputs, node.backward(upstream), strict=True):
                if grad is None or not inp.requires_grad:
                    continue
                key = id(inp)
                grads[key] = grads[key] + grad if key in grads else grad
                if inp._node is None:
                    leaves[key] = inp

        for key, leaf in leaves.items():
            grad = np.asarray(grads[key], dtype=leaf.dtype).reshape(leaf.shape)
            leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad

    # -- operators -----------------------------------------------------------

    def __add__(self, other: Any) -> Tensor:
        return add(self, as_tensor(other, self))

    def __radd__(self, other: Any) -> Tensor:
        return add(as_tensor(other, self), self)

    def __sub__(self, other: Any) -> Tensor:
        return sub(self, as_tensor(other, self))

    def __rsub__(self, other: Any) -> Tensor:
        return sub(as_tensor(other, self), self)

    def __mul__(self, other: Any) -> Tensor:
        return mul(self, as_tensor(other, self))

    def __rmul__(self, other: Any) -> Tensor:
        return mul(as_tensor(other, self), self)

    def __truediv__(self, other: Any) -> Tensor:
        return div(self, as_tensor(other, self))

    def __rtruediv__(self, other: Any) -> Tensor:
        return div(as_tensor(other, self), self)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __pow__(self, exponent: float) -> Tensor:
        return power(self, exponent)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        return getitem(self, index)

    def reshape(self, *shape: int) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], tuple | list):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes: int) -> Tensor:
        return transpose(self, axes)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis, keepdims)

    def exp(self) -> Tensor:
        return exp(self)

    def log(self) -> Tensor:
        return log(self)

    def relu(self) -> Tensor:
        return relu(self)


# ============================================================================
# Elementwise and Structural Operations
# ============================================================================


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return make_result(a.data + b.data, "add", (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, "sub", (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, "mul", (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g / b.data, a.shape), unbroadcast(-g * a.data / (b.data * b.data), b.shape)

    return make_result(a.data / b.data, "div", (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, "neg", (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * exponent * a.data ** (exponent - 1),)

    return make_result(a.data**exponent, "pow", (a,), backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_result(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return make_result(np.log(a.data), "log", (a,), lambda g: (g / a.data,))


def relu(a: Tensor) -> Tensor:
    if a.size and _KINK_PROBE.get() is not None:
        # exact zeros come from upstream dead units and stay put under perturbation
        nonzero = np.abs(a.data[a.data != 0])
        if nonzero.size:
            record_kink_margin(float(nonzero.min()))
    mask = a.data > 0
    return make_result(np.where(mask, a.data, 0).astype(a.dtype, copy=False), "relu", (a,), lambda g: (g * mask,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product a[..., m, k] @ b[..., k, n] with broadcast leading dims.

    Raises:
        DimensionError: If inner dimensions differ or leading dims do not broadcast.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as e:
        raise DimensionError(f"matmul batch dimensions do not broadcast: {a.shape} @ {b.shape}") from e

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

    return make_result(np.matmul(a.data, b.data), "matmul", (a, b), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as e:
        raise DimensionError(f"cannot reshape {a.shape} into {tuple(shape)}") from e
    return make_result(out, "reshape", (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    """Permute axes (numpy transpose semantics)."""
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(np.transpose(a.data, axes), "transpose", (a,), lambda g: (np.transpose(g, inverse),))


def _is_basic_index(index: Any) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, int | np.integer | slice) or p is None or p is Ellipsis for p in parts)


def getitem(a: Tensor, index: Any) -> Tensor:
    basic = _is_basic_index(index)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(a.data)
        if basic:
            # basic indexing never repeats an element
            grad[index] += g
        else:
            np.add.at(grad, index, g)
        return (grad,)

    return make_result(a.data[index], "getitem", (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along an existing axis.

    Raises:
        DimensionError: If the non-concatenated extents differ.
    """
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError(f"cannot concatenate shapes {[t.shape for t in tensors]} on axis {axis}") from e
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=axis)

    return make_result(out, "concat", tuple(tensors), backward)


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axis: int | tuple[int, ...] | None, keepdims: bool):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tensor_sum(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.array(_expand_reduced(g, a.shape, axis, keepdims)),)

    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims), dtype=a.dtype)
    return make_result(out, "sum", (a,), backward)


def mean(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[ax] for ax in axes]))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.array(_expand_reduced(g, a.shape, axis, keepdims)) / count,)

    out = np.asarray(a.data.mean(axis=axis, keepdims=keepdims), dtype=a.dtype)
    return make_result(out, "mean", (a,), backward)
