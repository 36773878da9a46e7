"""Autodiff package - numpy tensors with reverse-mode gradients and layer modules."""

# pylint: disable=useless-import-alias
from .gradcheck import finite_difference_check as finite_difference_check
from .gradcheck import parameter_gradient_check as parameter_gradient_check
from .modules import BatchNorm as BatchNorm
from .modules import Buffer as Buffer
from .modules import Conv as Conv
from .modules import Dropout as Dropout
from .modules import Embedding as Embedding
from .modules import LayerNorm as LayerNorm
from .modules import Linear as Linear
from .modules import Module as Module
from .modules import ModuleList as ModuleList
from .modules import Parameter as Parameter
from .tensor import Tensor as Tensor
from .tensor import concat as concat
from .tensor import default_dtype as default_dtype
from .tensor import matmul as matmul
from .tensor import no_grad as no_grad
from .tensor import set_default_dtype as set_default_dtype

# pylint: enable=useless-import-alias

__all__ = [
    "BatchNorm",
    "Buffer",
    "Conv",
    "Dropout",
    "Embedding",
    "LayerNorm",
    "Linear",
    "Module",
    "ModuleList",
    "Parameter",
    "Tensor",
    "concat",
    "default_dtype",
    "finite_difference_check",
    "matmul",
    "no_grad",
    "parameter_gradient_check",
    "set_default_dtype",
]
