"""The full retrieval model: text and video encoders under one parameter namespace."""
from __future__ import annotations

import numpy as np

from .autodiff.nn import Module
from .autodiff.tensor import Tensor
from .config import TrainConfig
from .text_encoder import TextEncoder
from .video_encoder import VideoEncoder


class Regada(Module):
    def __init__(self, cfg: TrainConfig, d_theta: int, d_x: int, rng: np.random.Generator):
        self.text = TextEncoder(cfg.text, d_theta, rng)
        self.video = VideoEncoder(cfg.video, d_x, d_theta, cfg.text.d_dim, rng)

    def params(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Parameters and buffers by name, in a fixed order."""
        out = {name: p.data for name, p in self.named_parameters()}
        out.update({f"buffer.{name}": arr for name, arr in self.named_buffers()})
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            if arrays[name].shape != p.data.shape:
                raise ValueError(f"checkpoint tensor {name} has shape {arrays[name].shape}, expected {p.data.shape}")
            p.data = np.array(arrays[name], dtype=np.float64)
        self.load_buffers({k[len("buffer."):]: v for k, v in arrays.items() if k.startswith("buffer.")})

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.grad = None
