from . import tensor as ops
from .gradcheck import grad_check, numerical_grad
from .nn import BatchNorm1d, LayerNorm, Linear, Module
from .optim import AdamState, adam_step
from .tensor import Tensor, backward

__all__ = [
    "AdamState",
    "BatchNorm1d",
    "LayerNorm",
    "Linear",
    "Module",
    "Tensor",
    "adam_step",
    "backward",
    "grad_check",
    "numerical_grad",
    "ops",
]
