"""
Layer Modules
=============

Parameter containers around the functional ops.

A Module enumerates its parameters and buffers by walking its attributes in
definition order, so names are stable across processes; checkpoints and the
optimizer both rely on that order.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from typing import Any

import numpy as np

from autodiff import functional as ops
from autodiff.tensor import Tensor, get_default_dtype
from common.exceptions import CheckpointError, ConfigError, DimensionError

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """Trainable leaf tensor.

    Attributes:
        decay: Weight decay applies to this parameter
        frozen: The optimizer skips this parameter
    """

    __slots__ = ("decay", "frozen")

    def __init__(self, data: Any, decay: bool = True, dtype: Any = None) -> None:
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.decay = decay
        self.frozen = False


class Buffer(Tensor):
    """Non-trainable state saved with the model (running statistics)."""

    __slots__ = ()

    def __init__(self, data: Any, dtype: Any = None) -> None:
        super().__init__(data, requires_grad=False, dtype=dtype)


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) in the current default dtype."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(get_default_dtype())


class Module:
    """Base class of every layer and block."""

    def __init__(self) -> None:
        self.training = True

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def children(self) -> Iterator[tuple[str, Module]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{name}", value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, Buffer]]:
        for name, value in vars(self).items():
            if isinstance(value, Buffer):
                yield f"{prefix}{name}", value
            elif isinstance(value, Module):
                yield from value.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def modules(self) -> Iterator[Module]:
        yield self
        for _, child in self.children():
            yield from child.modules()

    def train(self, mode: bool = True) -> Module:
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> Module:
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        """Name -> array for every parameter, then every buffer."""
        state = {name: p.data for name, p in self.named_parameters()}
        state.update({name: b.data for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Copy arrays into the existing tensors.

        Raises:
            CheckpointError: If names differ or a shape does not match.
        """
        targets = dict(self.named_parameters())
        targets.update(dict(self.named_buffers()))
        missing = sorted(set(targets) - set(state))
        unexpected = sorted(set(state) - set(targets))
        if missing or unexpected:
            raise CheckpointError(f"State mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, tensor in targets.items():
            array = np.asarray(state[name])
            if array.shape != tensor.shape:
                raise CheckpointError(f"Shape mismatch for '{name}': checkpoint {array.shape}, model {tensor.shape}")
            tensor.data = array.astype(tensor.dtype, copy=True)
        for module in self.modules():
            if isinstance(module, BatchNorm):
                module.has_statistics = True


class ModuleList(Module):
    """Ordered container; children are named by their index."""

    def __init__(self, modules: list[Module] | None = None) -> None:
        super().__init__()
        self._count = 0
        for module in modules or []:
            self.append(module)

    def append(self, module: Module) -> None:
        setattr(self, str(self._count), module)
        self._count += 1

    def __getitem__(self, index: int) -> Module:
        if index < 0:
            index += self._count
        return getattr(self, str(index))

    def __len__(self) -> int:
        return self._count

    def __iter__(self) -> Iterator[Module]:
        return (getattr(self, str(i)) for i in range(self._count))


class Conv(Module):
    """(k_t x 1) convolution over [B, C, T, V] with bias; padding defaults to 'same'."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        kernel_t: int = 1,
        stride: int = 1,
        dilation: int = 1,
        groups: int = 1,
        padding: int | None = None,
    ) -> None:
        super().__init__()
        if groups < 1 or in_channels % groups or out_channels % groups:
            raise ConfigError(f"groups={groups} must divide in_channels={in_channels} and out_channels={out_channels}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_t = kernel_t
        self.stride = stride
        self.dilation = dilation
        self.groups = groups
        self.padding = dilation * (kernel_t - 1) // 2 if padding is None else padding
        fan_in = in_channels // groups * kernel_t
        self.weight = Parameter(uniform_init(rng, (out_channels, in_channels // groups, kernel_t, 1), fan_in))
        self.bias = Parameter(uniform_init(rng, (out_channels,), fan_in), decay=False)

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv_tv(x, self.weight, self.bias, self.stride, self.dilation, self.groups, self.padding)


class BatchNorm(Module):
    """Batch normalization over channel axis 1 with running statistics."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        dtype = get_default_dtype()
        self.gain = Parameter(np.ones(channels, dtype=dtype), decay=False)
        self.bias = Parameter(np.zeros(channels, dtype=dtype), decay=False)
        self.running_mean = Buffer(np.zeros(channels, dtype=dtype))
        self.running_var = Buffer(np.ones(channels, dtype=dtype))
        self.has_statistics = False
        self._warned = False

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim < 2 or x.shape[1] != self.gain.shape[0]:
            raise DimensionError(f"BatchNorm over {self.gain.shape[0]} channels got input {x.shape}")
        if self.training:
            self.has_statistics = True
        elif not self.has_statistics and not self._warned:
            logger.warning("Batch norm evaluated before any training step; using initial statistics (0, 1)")
            self._warned = True
        return ops.batch_norm(
            x, self.gain, self.bias, self.running_mean.data, self.running_var.data, training=self.training
        )


class LayerNorm(Module):
    """Layer normalization over one axis (default: last)."""

    def __init__(self, channels: int, axis: int = -1) -> None:
        super().__init__()
        dtype = get_default_dtype()
        self.axis = axis
        self.gain = Parameter(np.ones(channels, dtype=dtype), decay=False)
        self.bias = Parameter(np.zeros(channels, dtype=dtype), decay=False)

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, axis=self.axis)


class Linear(Module):
    """Affine map over the last axis; weight is stored [in, out]."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.weight = Parameter(uniform_init(rng, (in_features, out_features), in_features))
        self.bias = Parameter(uniform_init(rng, (out_features,), in_features), decay=False)

    def forward(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class Embedding(Module):
    """Learnable lookup table initialised from N(0, 0.02^2); excluded from weight decay."""

    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        table = rng.normal(0.0, 0.02, size=(num_embeddings, dim)).astype(get_default_dtype())
        self.table = Parameter(table, decay=False)

    def forward(self, indices: np.ndarray) -> Tensor:
        return ops.embedding(self.table, indices)


class Dropout(Module):
    def __init__(self, p: float, rng: np.random.Generator) -> None:
        super().__init__()
        self.p = p
        self.rng = rng

    def forward(self, x: Tensor) -> Tensor:
        return ops.dropout(x, self.p, self.rng, self.training)
