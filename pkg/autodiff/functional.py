"""
Differentiable Layer Operations
===============================

Convolution over (time x joint) grids, softmax, normalization, activations,
pooling, dropout and embedding lookup, each with its analytic backward.

All convolutions use (k_t x 1) kernels on [B, C, T, V] inputs: the joint
axis is never convolved, only carried along.
"""

from __future__ import annotations

import math

import numpy as np

from autodiff.tensor import Tensor, make_result, record_kink_margin
from common.exceptions import ConfigError, DimensionError


LAYER_NORM_EPS = 1e-5
BATCH_NORM_EPS = 1e-5
BATCH_NORM_MOMENTUM = 0.1

_GELU_C = math.sqrt(2.0 / math.pi)


def conv_output_length(t: int, kernel: int, stride: int = 1, dilation: int = 1, padding: int = 0) -> int:
    """T' = floor((T + 2p - d(k-1) - 1) / s) + 1."""
    return (t + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def conv_tv(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    dilation: int = 1,
    groups: int = 1,
    padding: int = 0,
) -> Tensor:
    """Grouped, dilated temporal convolution of [B, C_in, T, V] with a [C_out, C_in/g, k_t, 1] kernel.

    Taps are gathered into a column tensor [B, G, C_in/g * k_t, T'V] and
    contracted per group with one batched matmul.

    Raises:
        ConfigError: If groups does not divide C_in or C_out.
        DimensionError: If ranks, kernel width or channel extents do not match.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv_tv needs a 4-D input and kernel, got {x.shape} and {weight.shape}")
    batch, c_in, t_in, joints = x.shape
    c_out, c_in_group, kernel, kernel_v = weight.shape
    if groups < 1 or c_in % groups != 0 or c_out % groups != 0:
        raise ConfigError(f"groups={groups} must divide C_in={c_in} and C_out={c_out}")
    if kernel_v != 1:
        raise DimensionError(f"conv_tv kernels are (k_t x 1), got k_v={kernel_v}")
    if c_in_group * groups != c_in:
        raise DimensionError(f"kernel expects {c_in_group * groups} input channels, input has {c_in}")
    if bias is not None and bias.shape != (c_out,):
        raise DimensionError(f"bias shape {bias.shape} does not match C_out={c_out}")
    t_out = conv_output_length(t_in, kernel, stride, dilation, padding)
    if t_out < 1:
        raise DimensionError(f"conv_tv output length {t_out} < 1 for T={t_in}, k={kernel}, d={dilation}")

    c_out_group = c_out // groups
    span = stride * (t_out - 1) + 1
    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (0, 0))) if padding else x.data
    if kernel == 1 and stride == 1:
        cols = padded.reshape(batch, groups, c_in_group, t_out * joints)
    else:
        taps = [padded[:, :, j * dilation : j * dilation + span : stride, :] for j in range(kernel)]
        cols = np.stack(taps, axis=2).reshape(batch, groups, c_in_group * kernel, t_out * joints)
    kernels = weight.data.reshape(groups, c_out_group, c_in_group * kernel)
    out = np.matmul(kernels, cols).reshape(batch, c_out, t_out, joints)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def backward(g: np.ndarray) -> list[np.ndarray | None]:
        g_cols = g.reshape(batch, groups, c_out_group, t_out * joints)
        grad_w = np.matmul(g_cols, np.swapaxes(cols, -1, -2)).sum(axis=0).reshape(weight.shape)
        grad_cols = np.matmul(np.swapaxes(kernels, -1, -2), g_cols)
        grad_cols = grad_cols.reshape(batch, c_in, kernel, t_out, joints)
        grad_padded = np.zeros_like(padded)
        for j in range(kernel):
            grad_padded[:, :, j * dilation : j * dilation + span : stride, :] += grad_cols[:, :, j]
        grad_x = grad_padded[:, :, padding : padding + t_in, :] if padding else grad_padded
        grads: list[np.ndarray | None] = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, "conv_tv", inputs, backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax; slices along axis sum to 1."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_result(y, "softmax", (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    y = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return make_result(y, "log_softmax", (x,), backward)


def _affine_shape(ndim: int, axis: int) -> tuple[int, ...]:
    shape = [1] * ndim
    shape[axis] = -1
    return tuple(shape)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, axis: int = -1, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each position over one (channel) axis, then apply gain and bias."""
    axis = axis % x.ndim
    affine = _affine_shape(x.ndim, axis)
    g_b = gain.data.reshape(affine)
    mu = x.data.mean(axis=axis, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=axis, keepdims=True) + eps)
    normalized = centered * inv_std
    out = normalized * g_b + bias.data.reshape(affine)
    reduce_axes = tuple(a for a in range(x.ndim) if a != axis)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_hat = g * g_b
        grad_x = inv_std * (
            g_hat
            - g_hat.mean(axis=axis, keepdims=True)
            - normalized * (g_hat * normalized).mean(axis=axis, keepdims=True)
        )
        return grad_x, (g * normalized).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return make_result(out.astype(x.dtype, copy=False), "layer_norm", (x, gain, bias), backward)


def batch_norm(
    x: Tensor,
    gain: Tensor,
    bias: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BATCH_NORM_MOMENTUM,
    eps: float = BATCH_NORM_EPS,
) -> Tensor:
    """Per-channel normalization over every axis except axis 1.

    In training mode the batch statistics normalize the input and the
    running statistics are updated in place by an exponential moving average
    (the running variance uses the unbiased batch variance). In eval mode the
    running statistics are used.

    Raises:
        DimensionError: If training with fewer than two values per channel.
    """
    if x.ndim < 2:
        raise DimensionError(f"batch_norm needs a channel axis, got shape {x.shape}")
    affine = _affine_shape(x.ndim, 1)
    reduce_axes = tuple(a for a in range(x.ndim) if a != 1)
    g_b = gain.data.reshape(affine)

    if training:
        count = x.size // x.shape[1]
        if count < 2:
            raise DimensionError(f"batch_norm in train mode needs >= 2 values per channel, got {count}")
        mu = x.data.mean(axis=reduce_axes, keepdims=True)
        centered = x.data - mu
        var = (centered * centered).mean(axis=reduce_axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        normalized = centered * inv_std
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.reshape(-1)
        running_var *= 1.0 - momentum
        running_var += momentum * var.reshape(-1) * (count / (count - 1))

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            g_hat = g * g_b
            grad_x = inv_std * (
                g_hat
                - g_hat.mean(axis=reduce_axes, keepdims=True)
                - normalized * (g_hat * normalized).mean(axis=reduce_axes, keepdims=True)
            )
            return grad_x, (g * normalized).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    else:
        inv_std = 1.0 / np.sqrt(running_var.reshape(affine) + eps)
        normalized = (x.data - running_mean.reshape(affine)) * inv_std

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            return g * g_b * inv_std, (g * normalized).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    out = normalized * g_b + bias.data.reshape(affine)
    return make_result(out.astype(x.dtype, copy=False), "batch_norm", (x, gain, bias), backward)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    a = x.data
    inner = _GELU_C * (a + 0.044715 * a**3)
    t = np.tanh(inner)
    out = 0.5 * a * (1.0 + t)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * a * a)
        return (g * (0.5 * (1.0 + t) + 0.5 * a * (1.0 - t * t) * d_inner),)

    return make_result(out, "gelu", (x,), backward)


def max_pool_t(x: Tensor, kernel: int = 3) -> Tensor:
    """Stride-1 temporal max pooling with 'same' (-inf) padding on [B, C, T, V]."""
    if x.ndim != 4:
        raise DimensionError(f"max_pool_t needs a 4-D input, got {x.shape}")
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"max_pool_t kernel must be odd and positive, got {kernel}")
    pad = kernel // 2
    t_in = x.shape[2]
    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (0, 0)), constant_values=-np.inf)
    windows = np.stack([padded[:, :, j : j + t_in, :] for j in range(kernel)], axis=0)
    winner = windows.argmax(axis=0)
    out = np.take_along_axis(windows, winner[None], axis=0)[0]
    if kernel > 1:
        top_two = np.sort(windows, axis=0)[-2:]
        gaps = top_two[1] - top_two[0]
        strict = gaps[(gaps > 0) & np.isfinite(gaps)]
        if strict.size:
            record_kink_margin(float(strict.min()))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        for j in range(kernel):
            grad_padded[:, :, j : j + t_in, :] += np.where(winner == j, g, 0)
        return (grad_padded[:, :, pad : pad + t_in, :],)

    return make_result(out, "max_pool_t", (x,), backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity in eval mode or when p == 0."""
    if not training or p <= 0.0:
        return x
    mask = ((rng.random(x.shape) >= p) / (1.0 - p)).astype(x.dtype)
    return make_result(x.data * mask, "dropout", (x,), lambda g: (g * mask,))


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup table[indices]; gradients scatter-add back into the rows."""
    indices = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise DimensionError(f"embedding table must be 2-D, got {table.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise DimensionError(f"embedding indices out of range for {table.shape[0]} rows")

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(table.data)
        np.add.at(grad, indices, g)
        return (grad,)

    return make_result(table.data[indices], "embedding", (table,), backward)


def sinusoidal_encoding(length: int, channels: int, dtype: type[np.floating] = np.float64) -> np.ndarray:
    """Table [length, channels]: even channel 2i is sin(t / 10000^(2i/C)), odd channel 2i+1 the cosine."""
    positions = np.arange(length, dtype=np.float64)[:, None]
    pair_index = np.arange(0, channels, 2, dtype=np.float64)
    angles = positions / np.power(10000.0, pair_index / channels)
    table = np.zeros((length, channels), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, : channels // 2])
    return table.astype(dtype)
