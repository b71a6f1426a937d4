"""Finite-difference checks for every differentiable op and the full objective."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import ops
from .autodiff.gradcheck import grad_check
from .autodiff.tensor import BatchNormState, Tensor
from .config import LossConfig, TextEncoderConfig, TrainConfig, VideoEncoderConfig
from .model import Regada
from .objective import batch_losses, make_batch
from .text_encoder import WordTables

TOLERANCE = 1e-4
STEP = 1e-5


def _p(rng, *shape, scale=1.0) -> Tensor:
    return Tensor(scale * rng.standard_normal(shape), requires_grad=True)


def _away_from_zero(rng, *shape) -> Tensor:
    x = rng.standard_normal(shape)
    x = np.where(np.abs(x) < 1e-2, 0.5, x)
    return Tensor(x, requires_grad=True)


def _weights(rng, *shape) -> np.ndarray:
    """Fixed random readout weights turning any tensor into a scalar."""
    return rng.standard_normal(shape)


def _readout(y: Tensor, w: np.ndarray) -> Tensor:
    return ops.sum(ops.mul(y, w))


def _op_case(name: str, rng: np.random.Generator):
    """Return ``(f, params)`` for one random instance of an op."""
    if name == "matmul":
        a, b = _p(rng, 3, 4), _p(rng, 4, 2)
        w = _weights(rng, 3, 2)
        return lambda: _readout(ops.matmul(a, b), w), [a, b]
    if name == "matmul_batched":
        a, b = _p(rng, 2, 3, 1, 4), _p(rng, 2, 3, 4, 5)
        w = _weights(rng, 2, 3, 1, 5)
        return lambda: _readout(ops.matmul(a, b), w), [a, b]
    if name in ("add", "sub", "mul"):
        a, b = _p(rng, 5), _p(rng, 5)
        w = _weights(rng, 5)
        fn = getattr(ops, name)
        return lambda: _readout(fn(a, b), w), [a, b]
    if name == "add_broadcast":
        a, b = _p(rng, 4, 3), _p(rng, 3)
        w = _weights(rng, 4, 3)
        return lambda: _readout(ops.add(a, b), w), [a, b]
    if name in ("sigmoid", "square"):
        x = _p(rng, 6, scale=2.0)
        w = _weights(rng, 6)
        fn = getattr(ops, name)
        return lambda: _readout(fn(x), w), [x]
    if name in ("relu", "max0"):
        x = _away_from_zero(rng, 6)
        w = _weights(rng, 6)
        fn = getattr(ops, name)
        return lambda: _readout(fn(x), w), [x]
    if name == "leaky_relu":
        x = _away_from_zero(rng, 6)
        w = _weights(rng, 6)
        return lambda: _readout(ops.leaky_relu(x, 0.01), w), [x]
    if name == "softmax":
        x = _p(rng, 3, 5)
        w = _weights(rng, 3, 5)
        return lambda: _readout(ops.softmax(x, axis=-1), w), [x]
    if name in ("batch_norm_train", "batch_norm_eval"):
        mode = name.rsplit("_", 1)[1]
        x, g, b = _p(rng, 6, 3), _p(rng, 3), _p(rng, 3)
        w = _weights(rng, 6, 3)
        rm, rv = rng.standard_normal(3), rng.uniform(0.5, 2.0, 3)

        def f():
            state = BatchNormState(3)
            state.running_mean, state.running_var = rm.copy(), rv.copy()
            return _readout(ops.batch_norm(x, g, b, state, mode), w)

        return f, [x, g, b]
    if name == "layer_norm":
        x, g, b = _p(rng, 4, 5), _p(rng, 5), _p(rng, 5)
        w = _weights(rng, 4, 5)
        return lambda: _readout(ops.layer_norm(x, g, b), w), [x, g, b]
    if name == "dropout":
        x = _p(rng, 4, 5)
        w = _weights(rng, 4, 5)
        seed = int(rng.integers(1 << 31))
        return lambda: _readout(ops.dropout(x, 0.3, "train", np.random.default_rng(seed)), w), [x]
    if name in ("sum", "mean"):
        x = _p(rng, 3, 4)
        w = _weights(rng, 4)
        fn = getattr(ops, name)
        return lambda: _readout(fn(x, axis=0), w), [x]
    if name == "l2_norm":
        x = _p(rng, 3, 4)
        w = _weights(rng, 3)
        return lambda: _readout(ops.l2_norm(x, axis=-1), w), [x]
    if name == "concat":
        a, b = _p(rng, 2, 3), _p(rng, 2, 4)
        w = _weights(rng, 2, 7)
        return lambda: _readout(ops.concat([a, b], axis=-1), w), [a, b]
    if name == "reshape_transpose":
        x = _p(rng, 2, 3, 4)
        w = _weights(rng, 4, 2, 3)
        return lambda: _readout(ops.transpose(ops.reshape(x, (2, 3, 4)), (2, 0, 1)), w), [x]
    raise KeyError(name)


OP_NAMES = (
    "matmul",
    "matmul_batched",
    "add",
    "sub",
    "mul",
    "add_broadcast",
    "sigmoid",
    "square",
    "relu",
    "max0",
    "leaky_relu",
    "softmax",
    "batch_norm_train",
    "batch_norm_eval",
    "layer_norm",
    "dropout",
    "sum",
    "mean",
    "l2_norm",
    "concat",
    "reshape_transpose",
)


def tiny_config(**text_overrides) -> TrainConfig:
    text = dict(d_theta=3, d_dim=4, n_gate=2, n_res=2, drop_g=0.3)
    text.update(text_overrides)
    return TrainConfig(
        text=TextEncoderConfig(**text),
        video=VideoEncoderConfig(d_x=4, d_theta=3, n_heads=2, d_head=2, drop_attn=0.2, n_proj=2, drop_proj=0.2),
        loss=LossConfig(lambda_action=1.0, lambda_adverb=2.0, lambda_reg=1.0, margin=0.5),
    )


def full_loss_case(rng: np.random.Generator, cfg: TrainConfig | None = None, batch: int = 4):
    """Random tiny model + batch; ``f`` evaluates the train-mode total loss with
    fixed dropout masks (the rng is re-seeded on every call)."""
    cfg = cfg or tiny_config()
    n_v, n_a, d_theta, d_x = 4, 3, cfg.text.d_theta, cfg.video.d_x
    model = Regada(cfg, d_theta, d_x, rng)
    # move the gate scalars off their init so both branches are exercised generically
    model.text.omega_g.data = rng.uniform(0.5, 1.5, 1)
    if model.text.omega_r is not None:
        model.text.omega_r.data = rng.uniform(0.5, 1.5, 1)
    words = WordTables(
        rng.standard_normal((n_v, d_theta)),
        rng.standard_normal((n_a, d_theta)),
        rng.standard_normal((n_v, n_a, d_theta)),
    )
    x = rng.standard_normal((batch, 3, d_x))
    mask = np.ones((batch, 3), dtype=bool)
    mask[0, 2] = False
    acts = rng.integers(0, n_a, batch)
    advs = rng.integers(0, n_v, batch)
    antonyms = np.array([1, 0, 3, 2])
    tb = make_batch(acts, advs, cfg.loss, n_a, n_v, rng, antonyms)
    seed = int(rng.integers(1 << 31))

    def f():
        r = np.random.default_rng(seed)
        o_video = model.video(x, mask, words.actions[acts], "train", r)
        return batch_losses(model, o_video, tb, words, cfg.loss, "train", r)["total"]

    return f, list(model.params().values()), model


def run_op_checks(points: int = 20, seed: int = 0, h: float = STEP) -> dict[str, float]:
    """Worst relative error per op over ``points`` random instances."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    for name in OP_NAMES:
        errs = []
        for _ in range(points):
            f, params = _op_case(name, rng)
            errs.append(grad_check(f, params, h))
        worst[name] = max(errs)
    return worst


def run_loss_checks(points: int = 20, seed: int = 0, h: float = STEP) -> float:
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(points):
        f, params, _ = full_loss_case(rng)
        errs.append(grad_check(f, params, h))
    return max(errs)


def run_all(points: int = 20, seed: int = 0, report: Callable[[str, float], None] | None = None) -> bool:
    results = run_op_checks(points, seed)
    results["full_loss"] = run_loss_checks(points, seed)
    ok = True
    for name, err in results.items():
        passed = err <= TOLERANCE
        ok &= passed
        if report is not None:
            report(name, err)
    return ok
