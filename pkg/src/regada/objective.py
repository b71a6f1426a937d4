"""Training losses: action/adverb triplets, regression, and their weighted sum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.tensor import Tensor
from .config import LossConfig
from .errors import ConfigError, ValidationError


def trip(anchor, positive, negative, margin: float) -> Tensor:
    """Per-row hinge ``max(0, |a - p| - |a - n| + margin)``."""
    d_pos = ops.l2_norm(ops.sub(anchor, positive), axis=-1)
    d_neg = ops.l2_norm(ops.sub(anchor, negative), axis=-1)
    return ops.max0(d_pos - d_neg + margin)


def action_triplet_loss(o_video, positive, negative_action, margin: float) -> Tensor:
    return ops.mean(trip(o_video, positive, negative_action, margin))


def adverb_triplet_loss(o_video, positive, negative_adverb, margin: float) -> Tensor:
    return ops.mean(trip(o_video, positive, negative_adverb, margin))


def regression_loss(o_video, positive) -> Tensor:
    """Batch mean of the squared Euclidean distance (summed over coordinates)."""
    return ops.mean(ops.sum(ops.square(ops.sub(o_video, positive)), axis=-1))


def total_loss(components: dict[str, Tensor], cfg: LossConfig) -> Tensor:
    """Weighted sum; terms with zero weight must be absent or are ignored."""
    weights = {"action": cfg.lambda_action, "adverb": cfg.lambda_adverb, "reg": cfg.lambda_reg}
    total = None
    for key, lam in weights.items():
        if lam == 0:
            continue
        term = components[key] * lam
        total = term if total is None else total + term
    if total is None:
        raise ConfigError("all loss weights are zero")
    return total


# ----------------------------------------------------------------- sampling


def sample_negative_actions(actions: np.ndarray, n_actions: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from all actions except the ground truth, per sample."""
    if n_actions < 2:
        raise ConfigError("the action triplet loss needs at least two actions")
    r = rng.integers(0, n_actions - 1, size=len(actions))
    return r + (r >= actions)


def sample_negative_adverbs(
    adverbs: np.ndarray,
    n_adverbs: int,
    mode: str,
    rng: np.random.Generator,
    antonyms: np.ndarray | None = None,
) -> np.ndarray:
    if mode == "antonym":
        if antonyms is None:
            raise ValidationError("antonym negatives need an antonym map")
        return antonyms[adverbs]
    if n_adverbs < 2:
        raise ConfigError("random adverb negatives need at least two adverbs")
    r = rng.integers(0, n_adverbs - 1, size=len(adverbs))
    return r + (r >= adverbs)


@dataclass
class TripletBatch:
    """Indices for one minibatch; texts are composed by the model at loss time."""

    actions: np.ndarray
    adverbs: np.ndarray
    neg_actions: np.ndarray | None
    neg_adverbs: np.ndarray | None


def make_batch(
    actions: np.ndarray,
    adverbs: np.ndarray,
    cfg: LossConfig,
    n_actions: int,
    n_adverbs: int,
    rng: np.random.Generator,
    antonyms: np.ndarray | None = None,
) -> TripletBatch:
    neg_a = sample_negative_actions(actions, n_actions, rng) if cfg.lambda_action > 0 else None
    neg_v = None
    if cfg.lambda_adverb > 0:
        neg_v = sample_negative_adverbs(adverbs, n_adverbs, cfg.adverb_negative_mode, rng, antonyms)
    return TripletBatch(actions, adverbs, neg_a, neg_v)


def batch_losses(model, o_video: Tensor, batch: TripletBatch, words, cfg: LossConfig, mode: str, rng=None):
    """Loss components for a batch whose video embeddings are already computed.

    Each text set (positive, action negatives, adverb negatives) runs through
    the text encoder as its own batch.
    """
    text = model.text
    positive = text(batch.adverbs, batch.actions, words, mode, rng)
    comps: dict[str, Tensor] = {}
    if cfg.lambda_action > 0:
        neg = text(batch.adverbs, batch.neg_actions, words, mode, rng)
        comps["action"] = action_triplet_loss(o_video, positive, neg, cfg.margin)
    if cfg.lambda_adverb > 0:
        neg = text(batch.neg_adverbs, batch.actions, words, mode, rng)
        comps["adverb"] = adverb_triplet_loss(o_video, positive, neg, cfg.margin)
    if cfg.lambda_reg > 0:
        comps["reg"] = regression_loss(o_video, positive)
    comps["total"] = total_loss(comps, cfg)
    return comps
