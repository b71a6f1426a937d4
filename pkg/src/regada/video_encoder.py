"""Action-focused video embeddings: action-queried multi-head attention pooling
over feature segments, followed by a projection MLP."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import ops
from .autodiff.nn import LayerNorm, Linear, Module
from .autodiff.tensor import Tensor
from .config import VideoEncoderConfig
from .errors import ShapeError

MASK_FILL = -1e9


def pad_sequences(seqs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length (T_i, d_x) sequences into (B, T_max, d_x) plus a validity mask."""
    if any(s.shape[0] == 0 for s in seqs):
        raise ShapeError("feature sequence with T = 0")
    t_max = max(s.shape[0] for s in seqs)
    d_x = seqs[0].shape[1]
    out = np.zeros((len(seqs), t_max, d_x))
    mask = np.zeros((len(seqs), t_max), dtype=bool)
    for i, s in enumerate(seqs):
        if s.shape[1] != d_x:
            raise ShapeError(f"feature width {s.shape[1]} != {d_x}")
        out[i, : s.shape[0]] = s
        mask[i, : s.shape[0]] = True
    return out, mask


class ProjBlock(Module):
    def __init__(self, d: int, drop: float, rng):
        self.linear = Linear(d, d, rng)
        self.norm = LayerNorm(d)
        self.drop = drop

    def __call__(self, x, mode: str, rng) -> Tensor:
        return ops.dropout(ops.relu(self.norm(self.linear(x))), self.drop, mode, rng)


class VideoEncoder(Module):
    def __init__(self, cfg: VideoEncoderConfig, d_x: int, d_theta: int, d_dim: int, rng: np.random.Generator):
        cfg.validate()
        self.cfg = cfg
        inner = cfg.n_heads * cfg.d_head
        self.w_q = Linear(d_theta, inner, rng)
        self.w_k = Linear(d_x, inner, rng, bias=False)  # a key bias cancels in the softmax
        self.w_v = Linear(d_x, inner, rng)
        self.w_attn = Linear(inner, d_dim, rng)
        self.proj = [ProjBlock(d_dim, cfg.drop_proj, rng) for _ in range(cfg.n_proj)]
        self.d_x, self.d_theta, self.d_dim = d_x, d_theta, d_dim

    def attend(self, x: np.ndarray, mask: np.ndarray | None, theta_a, mode: str, rng=None):
        """Return ``(o_attn, weights)`` for padded features ``x`` of shape (B, T, d_x).

        ``weights`` has shape (B, H, T); padded segments receive weight 0.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.d_x:
            raise ShapeError(f"features must be (B, T, {self.d_x}), got {x.shape}")
        if x.shape[1] == 0:
            raise ShapeError("feature sequence with T = 0")
        b, t, _ = x.shape
        h, dh = self.cfg.n_heads, self.cfg.d_head
        q = ops.reshape(self.w_q(theta_a), (b, h, 1, dh))
        k = ops.transpose(ops.reshape(self.w_k(x), (b, t, h, dh)), (0, 2, 3, 1))
        v = ops.transpose(ops.reshape(self.w_v(x), (b, t, h, dh)), (0, 2, 1, 3))
        scores = ops.matmul(q, k) * (1.0 / np.sqrt(dh))
        if mask is not None and not mask.all():
            scores = scores + np.where(mask, 0.0, MASK_FILL)[:, None, None, :]
        weights = ops.softmax(scores, axis=-1)
        dropped = ops.dropout(weights, self.cfg.drop_attn, mode, rng)
        pooled = ops.reshape(ops.matmul(dropped, v), (b, h * dh))
        return self.w_attn(pooled), weights.data[:, :, 0, :]

    def project(self, o_attn, mode: str, rng=None) -> Tensor:
        out = o_attn
        for block in self.proj:
            out = block(out, mode, rng)
        return out

    def __call__(self, x, mask, theta_a, mode: str, rng=None) -> Tensor:
        o_attn, _ = self.attend(x, mask, theta_a, mode, rng)
        return self.project(o_attn, mode, rng)

    def encode_sequences(self, seqs: Sequence[np.ndarray], theta_a, mode: str, rng=None) -> Tensor:
        x, mask = pad_sequences(seqs)
        return self(x, mask, theta_a, mode, rng)
