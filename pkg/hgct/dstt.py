"""
Disentangled Spatiotemporal Transformer
=======================================

Splits a [B, C, T, V] feature map into a wide spatial stream (1x1 conv,
C_S channels) and a narrow temporal stream (3x1 conv, C_T channels):

- spatial stream: joint tokens [B*T, V, C_S] attend over all joints (GSA)
- temporal stream: frame tokens [B*V, T, C_T] attend over all frames (GTA)

Both attentions are pre-norm with a residual. The streams are concatenated
back to C_e = C_S + C_T channels and refined by the channel-wise
feed-forward (CwFF): Y + CwFF(Y).

In the first stage the spatial stream gets a learnable joint-type embedding
and the temporal stream a sinusoidal frame-order encoding.
"""

from __future__ import annotations

import math

import numpy as np

from autodiff import functional as ops
from autodiff.modules import Conv, Dropout, Embedding, LayerNorm, Linear, Module
from autodiff.tensor import Tensor, concat
from common.exceptions import ConfigError, DimensionError
from common.types import DsttConfig

TEMPORAL_EMBED_KERNEL = 3
DEPTHWISE_KERNEL = 3


# ============================================================================
# Token Layouts
# ============================================================================


def joint_tokens(f_s: Tensor) -> Tensor:
    """[B, C, T, V] -> [B*T, V, C]."""
    b, c, t, v = f_s.shape
    return f_s.permute(0, 2, 3, 1).reshape(b * t, v, c)


def from_joint_tokens(tokens: Tensor, batch: int) -> Tensor:
    """Inverse of joint_tokens."""
    rows, v, c = tokens.shape
    return tokens.reshape(batch, rows // batch, v, c).permute(0, 3, 1, 2)


def frame_tokens(f_t: Tensor) -> Tensor:
    """[B, C, T, V] -> [B*V, T, C]."""
    b, c, t, v = f_t.shape
    return f_t.permute(0, 3, 2, 1).reshape(b * v, t, c)


def from_frame_tokens(tokens: Tensor, batch: int) -> Tensor:
    """Inverse of frame_tokens."""
    rows, t, c = tokens.shape
    return tokens.reshape(batch, rows // batch, t, c).permute(0, 3, 2, 1)


# ============================================================================
# Layers
# ============================================================================


class MultiHeadSelfAttention(Module):
    """Scaled dot-product self-attention over [R, L, C] token rows.

    Attributes:
        last_attention: Softmax weights [R, H, L, L] of the most recent forward
    """

    def __init__(self, channels: int, heads: int, rng: np.random.Generator, attn_drop: float = 0.0) -> None:
        super().__init__()
        if heads < 1 or channels % heads:
            raise ConfigError(f"heads={heads} must divide channels={channels}")
        self.channels = channels
        self.heads = heads
        self.head_dim = channels // heads
        self.qkv = Linear(channels, 3 * channels, rng)
        self.proj = Linear(channels, channels, rng)
        self.attn_drop = Dropout(attn_drop, rng)
        self.last_attention: np.ndarray | None = None

    def forward(self, tokens: Tensor) -> Tensor:
        if tokens.ndim != 3 or tokens.shape[-1] != self.channels:
            raise DimensionError(f"Expected [R, L, {self.channels}] tokens, got {tokens.shape}")
        rows, length, _ = tokens.shape
        qkv = self.qkv(tokens).reshape(rows, length, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.permute(0, 1, 3, 2)) * (1.0 / math.sqrt(self.head_dim))
        weights = ops.softmax(scores, axis=-1)
        self.last_attention = weights.data
        mixed = self.attn_drop(weights) @ v
        return self.proj(mixed.permute(0, 2, 1, 3).reshape(rows, length, self.channels))


class GlobalAttention(Module):
    """Pre-norm residual attention: tokens + MHSA(LN(tokens))."""

    def __init__(self, channels: int, heads: int, rng: np.random.Generator, attn_drop: float = 0.0) -> None:
        super().__init__()
        self.norm = LayerNorm(channels)
        self.attention = MultiHeadSelfAttention(channels, heads, rng, attn_drop)

    def forward(self, tokens: Tensor) -> Tensor:
        return tokens + self.attention(self.norm(tokens))


class ChannelwiseFeedForward(Module):
    """LN over channels -> 1x1 expand by gamma -> GELU -> depthwise 3x1 -> GELU -> 1x1 squeeze -> dropout."""

    def __init__(self, channels: int, gamma: int, rng: np.random.Generator, ff_drop: float = 0.0) -> None:
        super().__init__()
        hidden = gamma * channels
        self.norm = LayerNorm(channels, axis=1)
        self.expand = Conv(channels, hidden, rng)
        self.excite = Conv(hidden, hidden, rng, kernel_t=DEPTHWISE_KERNEL, groups=hidden)
        self.squeeze = Conv(hidden, channels, rng)
        self.drop = Dropout(ff_drop, rng)

    def forward(self, f: Tensor) -> Tensor:
        h = ops.gelu(self.expand(self.norm(f)))
        h = ops.gelu(self.excite(h))
        return self.drop(self.squeeze(h))


class Disentangle(Module):
    """(F_S, F_T) = (1x1 conv to C_S, 3x1 conv to C_T)."""

    def __init__(self, in_channels: int, config: DsttConfig, rng: np.random.Generator) -> None:
        super().__init__()
        self.spatial = Conv(in_channels, config.c_s, rng)
        self.temporal = Conv(in_channels, config.c_t, rng, kernel_t=TEMPORAL_EMBED_KERNEL)

    def forward(self, f: Tensor) -> tuple[Tensor, Tensor]:
        return self.spatial(f), self.temporal(f)


class PositionalEncoding(Module):
    """First-stage encodings: joint-type table on F_S, sinusoidal frame order on F_T.

    The table is allocated even when disabled so toggling it leaves the
    parameter count unchanged.
    """

    def __init__(self, num_joints: int, config: DsttConfig, rng: np.random.Generator) -> None:
        super().__init__()
        self.joint_type = Embedding(num_joints, config.c_s, rng)
        self.use_joint_type = config.joint_type
        self.use_frame_order = config.frame_order
        self._cache: dict[tuple[int, int, np.dtype], np.ndarray] = {}

    def frame_encoding(self, frames: int, channels: int, dtype: np.dtype) -> np.ndarray:
        """SinPE laid out [1, C_T, T, 1]."""
        key = (frames, channels, dtype)
        if key not in self._cache:
            table = ops.sinusoidal_encoding(frames, channels, dtype.type)
            self._cache[key] = table.T.reshape(1, channels, frames, 1).copy()
        return self._cache[key]

    def forward(self, f_s: Tensor, f_t: Tensor) -> tuple[Tensor, Tensor]:
        if self.use_joint_type:
            v = f_s.shape[-1]
            table = self.joint_type(np.arange(v))  # [V, C_S]
            f_s = f_s + table.permute(1, 0).reshape(1, f_s.shape[1], 1, v)
        if self.use_frame_order:
            _, c_t, t, _ = f_t.shape
            f_t = f_t + Tensor.wrap(self.frame_encoding(t, c_t, f_t.dtype))
        return f_s, f_t


# ============================================================================
# Block
# ============================================================================


class DsttBlock(Module):
    """Disentangle -> (first stage) positional encoding -> GSA | GTA -> concat -> Y + CwFF(Y).

    With `capture` set, the forward pass keeps the encoded streams and the
    block output as plain arrays (last_spatial, last_temporal, last_output).
    """

    def __init__(
        self,
        in_channels: int,
        config: DsttConfig,
        rng: np.random.Generator,
        stage_index: int = 0,
        num_joints: int = 25,
    ) -> None:
        super().__init__()
        self.config = config
        self.stage_index = stage_index
        self.disentangle = Disentangle(in_channels, config, rng)
        self.encoding = PositionalEncoding(num_joints, config, rng) if stage_index == 0 else None
        self.gsa = GlobalAttention(config.c_s, config.s_heads, rng, config.attn_drop)
        self.gta = GlobalAttention(config.c_t, config.t_heads, rng, config.attn_drop)
        self.cwff = ChannelwiseFeedForward(config.c_e, config.gamma, rng, config.ff_drop)
        self.capture = False
        self.last_spatial: np.ndarray | None = None
        self.last_temporal: np.ndarray | None = None
        self.last_output: np.ndarray | None = None

    def forward(self, f: Tensor) -> Tensor:
        batch = f.shape[0]
        f_s, f_t = self.disentangle(f)
        if self.encoding is not None:
            f_s, f_t = self.encoding(f_s, f_t)
        a_s = from_joint_tokens(self.gsa(joint_tokens(f_s)), batch)
        a_t = from_frame_tokens(self.gta(frame_tokens(f_t)), batch)
        y = concat([a_s, a_t], axis=1)
        out = y + self.cwff(y)
        if self.capture:
            self.last_spatial, self.last_temporal, self.last_output = f_s.data, f_t.data, out.data
        return out
