"""Parameter containers built on the tensor ops."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import BatchNormState, Tensor


class Module:
    """Minimal registry of named parameters, buffers and child modules."""

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = []
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out.append((prefix + key, val))
            elif isinstance(val, Module):
                out.extend(val.named_parameters(f"{prefix}{key}."))
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{prefix}{key}.{i}."))
        return out

    def named_buffers(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = []
        for key, val in vars(self).items():
            if isinstance(val, BatchNormState):
                out.append((f"{prefix}{key}.running_mean", val.running_mean))
                out.append((f"{prefix}{key}.running_var", val.running_var))
            elif isinstance(val, Module):
                out.extend(val.named_buffers(f"{prefix}{key}."))
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.extend(item.named_buffers(f"{prefix}{key}.{i}."))
        return out

    def load_buffers(self, buffers: dict[str, np.ndarray], prefix: str = "") -> None:
        for key, val in vars(self).items():
            if isinstance(val, BatchNormState):
                val.running_mean = np.array(buffers[f"{prefix}{key}.running_mean"], dtype=np.float64)
                val.running_var = np.array(buffers[f"{prefix}{key}.running_var"], dtype=np.float64)
            elif isinstance(val, Module):
                val.load_buffers(buffers, f"{prefix}{key}.")
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        item.load_buffers(buffers, f"{prefix}{key}.{i}.")


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """``y = x @ weight (+ bias)`` with weight stored as (in, out)."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Tensor(uniform_init(rng, d_in, (d_in, d_out)), requires_grad=True)
        self.bias = Tensor(uniform_init(rng, d_in, (d_out,)), requires_grad=True) if bias else None
        self.d_in, self.d_out = d_in, d_out

    def __call__(self, x) -> Tensor:
        y = T.matmul(x, self.weight)
        return y if self.bias is None else y + self.bias


class BatchNorm1d(Module):
    def __init__(self, width: int, momentum: float = 0.1, eps: float = 1e-5):
        self.weight = Tensor(np.ones(width), requires_grad=True)
        self.bias = Tensor(np.zeros(width), requires_grad=True)
        self.state = BatchNormState(width, momentum, eps)

    def __call__(self, x, mode: str) -> Tensor:
        return T.batch_norm(x, self.weight, self.bias, self.state, mode)


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5):
        self.weight = Tensor(np.ones(width), requires_grad=True)
        self.bias = Tensor(np.zeros(width), requires_grad=True)
        self.eps = eps

    def __call__(self, x) -> Tensor:
        return T.layer_norm(x, self.weight, self.bias, self.eps)
