"""Residually-gated adverb-action composition.

    o_txt = w_g * sigmoid(W_gate([phi_aux, phi_main])) * phi_main
            + w_r * W_res([phi_aux, phi_main])

``phi_main`` is the adverb embedding in the default model; ablations swap in
the action or a directly-embedded adverb-action pair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.nn import BatchNorm1d, Linear, Module
from .autodiff.tensor import Tensor
from .config import TextEncoderConfig
from .errors import ShapeError, ValidationError


@dataclass
class WordTables:
    """Frozen word vectors aligned to a vocabulary."""

    adverbs: np.ndarray  # (V, d_theta)
    actions: np.ndarray  # (A, d_theta)
    pairs: np.ndarray | None = None  # (V, A, d_theta)

    @property
    def d_theta(self) -> int:
        return self.adverbs.shape[1]


class GateMLP(Module):
    """Concat -> batch norm -> n x (linear, dropout, leaky ReLU) -> linear."""

    def __init__(self, d_dim: int, n_layers: int, drop: float, slope: float, rng: np.random.Generator):
        self.bn = BatchNorm1d(2 * d_dim)
        self.layers = [Linear(2 * d_dim if i == 0 else d_dim, d_dim, rng) for i in range(n_layers)]
        self.out = Linear(d_dim, d_dim, rng)
        self.drop = drop
        self.slope = slope

    def __call__(self, x, mode: str, rng) -> Tensor:
        h = self.bn(x, mode)
        for lin in self.layers:
            h = ops.leaky_relu(ops.dropout(lin(h), self.drop, mode, rng), self.slope)
        return self.out(h)


class TextEncoder(Module):
    def __init__(self, cfg: TextEncoderConfig, d_theta: int, rng: np.random.Generator):
        cfg.validate()
        self.cfg = cfg
        d = cfg.d_dim
        self.proj_action = Linear(d_theta, d, rng, bias=False)
        self.proj_adverb = Linear(d_theta, d, rng, bias=False)
        self.proj_pair = Linear(d_theta, d, rng, bias=False) if cfg.main_modality == "pair" else None
        self.gate = GateMLP(d, cfg.n_gate, cfg.drop_g, cfg.leaky_slope, rng)
        self.res = None
        if cfg.use_residual and not cfg.share_gate_res_weights:
            self.res = GateMLP(d, cfg.n_res, cfg.drop_g, cfg.leaky_slope, rng)
        self.omega_g = Tensor(np.array([cfg.gate_init]), requires_grad=True)
        self.omega_r = Tensor(np.array([cfg.res_init]), requires_grad=True) if cfg.use_residual else None
        self.d_theta = d_theta

    def project_words(self, theta_a, theta_v) -> tuple[Tensor, Tensor]:
        for name, th in (("action", theta_a), ("adverb", theta_v)):
            if np.shape(getattr(th, "data", th))[-1] != self.d_theta:
                raise ShapeError(f"{name} word vectors must have width {self.d_theta}")
        return self.proj_action(theta_a), self.proj_adverb(theta_v)

    def compose(self, phi_main, phi_aux, mode: str, rng=None) -> Tensor:
        phi_main, phi_aux = ops.as_tensor(phi_main), ops.as_tensor(phi_aux)
        if phi_main.shape != phi_aux.shape or phi_main.shape[-1] != self.cfg.d_dim:
            raise ShapeError(f"compose inputs must both be (B, {self.cfg.d_dim}), got {phi_main.shape} and {phi_aux.shape}")
        x = ops.concat([phi_aux, phi_main], axis=-1)
        g = self.gate(x, mode, rng)
        gate = ops.sigmoid(g) if self.cfg.use_sigmoid else g
        out = self.omega_g * (gate * phi_main)
        if self.cfg.use_residual:
            r = g if self.cfg.share_gate_res_weights else self.res(x, mode, rng)
            out = out + self.omega_r * r
        return out

    def inputs(self, adverbs: np.ndarray, actions: np.ndarray, words: WordTables) -> tuple[Tensor, Tensor]:
        """Projected (main, auxiliary) embeddings for index arrays of compositions."""
        cfg = self.cfg
        adverbs, actions = np.asarray(adverbs), np.asarray(actions)
        side = {
            "adverb": lambda: self.proj_adverb(words.adverbs[adverbs]),
            "action": lambda: self.proj_action(words.actions[actions]),
        }
        if cfg.main_modality == "pair":
            if words.pairs is None:
                raise ValidationError("main_modality='pair' needs pair embeddings")
            main = self.proj_pair(words.pairs[adverbs, actions])
        else:
            main = side[cfg.main_modality]()
        return main, side[cfg.auxiliary_modality]()

    def __call__(self, adverbs, actions, words: WordTables, mode: str, rng=None) -> Tensor:
        main, aux = self.inputs(adverbs, actions, words)
        return self.compose(main, aux, mode, rng)

    def embed_all_adverbs(self, action: int, words: WordTables) -> np.ndarray:
        """Eval-mode (V, d_dim) matrix; row j composes adverb j with ``action``."""
        v = words.adverbs.shape[0]
        return self(np.arange(v), np.full(v, action), words, "eval").data

    def embed_grid(self, words: WordTables) -> np.ndarray:
        """Eval-mode (A, V, d_dim) embeddings of every composition."""
        v, a = words.adverbs.shape[0], words.actions.shape[0]
        adv = np.tile(np.arange(v), a)
        act = np.repeat(np.arange(a), v)
        return self(adv, act, words, "eval").data.reshape(a, v, -1)
