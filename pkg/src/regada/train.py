"""Training loop, checkpointing, evaluation schedule and ablation grids."""
from __future__ import annotations

import copy
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .autodiff.optim import AdamState, adam_step
from .autodiff.tensor import backward
from .config import TrainConfig
from .dataio import (
    Dataset,
    FeatureStore,
    Sample,
    best_metrics,
    load_dataset,
    read_bundle,
    read_split,
    write_bundle,
)
from .errors import ConfigError, TrainingError, ValidationError
from .metrics import evaluate_model
from .model import Regada
from .objective import batch_losses, make_batch
from .text_encoder import WordTables
from .video_encoder import pad_sequences

log = logging.getLogger(__name__)

LOSS_KEYS = ("total", "action", "adverb", "reg")


# --------------------------------------------------------------- data helpers


def load_split_data(manifest, vocab, embeddings, split=None) -> tuple[Dataset, list[Sample], list[Sample]]:
    """Dataset plus its train / test partitions (whole manifest is test without a split)."""
    ds = load_dataset(manifest, vocab, embeddings)
    if split is None:
        return ds, [], list(ds.samples)
    parts = read_split(split)
    index = ds.by_id()
    unknown = [i for k in ("train", "test") for i in parts[k] if i not in index]
    if unknown:
        raise ValidationError(f"split references unknown video ids: {unknown[:10]}", unknown)
    return ds, [index[i] for i in parts["train"]], [index[i] for i in parts["test"]]


def word_tables(ds: Dataset, cfg: TrainConfig) -> WordTables:
    need_pairs = cfg.text.main_modality == "pair"
    adv, act, pair = ds.embeddings.bind(ds.vocab, need_pairs=need_pairs)
    return WordTables(adv, act, pair)


def resolve_widths(cfg: TrainConfig, d_theta: int, d_x: int) -> TrainConfig:
    """Fill inferred widths into a copy of ``cfg``; explicit mismatches are errors."""
    cfg = copy.deepcopy(cfg)
    for where, key, actual in (
        (cfg.text, "d_theta", d_theta),
        (cfg.video, "d_theta", d_theta),
        (cfg.video, "d_x", d_x),
    ):
        given = getattr(where, key)
        if given is not None and given != actual:
            raise ValidationError(f"config {key}={given} but data has width {actual}")
        setattr(where, key, actual)
    return cfg


# ----------------------------------------------------------------- checkpoints


def save_checkpoint(path, model: Regada, adam: AdamState, epoch: int, cfg: TrainConfig, rng: np.random.Generator) -> None:
    tensors = dict(model.state_arrays())
    for name in sorted(adam.m):
        tensors[f"adam.m.{name}"] = adam.m[name]
        tensors[f"adam.v.{name}"] = adam.v[name]
    tensors = {k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()}
    header = {
        "kind": "checkpoint",
        "epoch": epoch,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "rng_state": rng.bit_generator.state,
        "adam_step": adam.step,
    }
    write_bundle(path, header, tensors)


def load_checkpoint(path, expect: TrainConfig | None = None):
    """Return ``(model, adam, epoch, cfg, rng)``; ``expect`` must hash-match if given."""
    header, tensors = read_bundle(path)
    if header.get("kind") != "checkpoint":
        raise ValidationError(f"{path} is not a checkpoint")
    cfg = TrainConfig.from_dict(header["config"])
    if expect is not None:
        expect = resolve_widths(expect, cfg.text.d_theta, cfg.video.d_x)
    if expect is not None and expect.hash() != header["config_hash"]:
        raise ValidationError(
            f"checkpoint config hash {header['config_hash']} does not match loading config {expect.hash()}"
        )
    model = Regada(cfg, cfg.text.d_theta, cfg.video.d_x, np.random.default_rng(0))
    model.load_state_arrays(tensors)
    adam = AdamState(
        lr=cfg.lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
        decoupled=cfg.decoupled_weight_decay,
        step=header["adam_step"],
    )
    for key, arr in tensors.items():
        if key.startswith("adam.m."):
            adam.m[key[len("adam.m."):]] = np.array(arr)
        elif key.startswith("adam.v."):
            adam.v[key[len("adam.v."):]] = np.array(arr)
    rng = np.random.default_rng()
    rng.bit_generator.state = header["rng_state"]
    return model, adam, header["epoch"], cfg, rng


# ------------------------------------------------------------------- training


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        if len(idx) >= 2:
            yield idx


def train(
    cfg: TrainConfig,
    ds: Dataset,
    train_samples: list[Sample],
    test_samples: list[Sample],
    out_dir=None,
    on_eval: Callable[[dict[str, Any]], None] | None = None,
):
    """Train from scratch; returns ``(model, report)``.

    The report holds per-epoch loss components, the evaluation series and the
    per-metric maxima (each with the epoch it came from).
    """
    cfg.validate()
    if len(train_samples) < 2:
        raise ValidationError("need at least two training samples")
    vocab = ds.vocab
    features = FeatureStore()
    for s in train_samples + test_samples:
        features.get(s.feature)
    d_x = features.get(train_samples[0].feature).shape[1]
    cfg = resolve_widths(cfg, ds.embeddings.d_theta, d_x)
    words = word_tables(ds, cfg)
    antonyms = vocab.antonym_indices() if vocab.has_antonyms else None
    if cfg.loss.adverb_negative_mode == "antonym" and cfg.loss.lambda_adverb > 0 and antonyms is None:
        raise ValidationError("antonym negatives requested but the vocabulary has no antonym map")
    if cfg.loss.lambda_action > 0 and vocab.n_actions < 2:
        raise ConfigError("the action triplet loss needs at least two actions")

    init_seq, run_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    model = Regada(cfg, words.d_theta, d_x, np.random.default_rng(init_seq))
    rng = np.random.default_rng(run_seq)
    adam = AdamState(
        lr=cfg.lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
        decoupled=cfg.decoupled_weight_decay,
    )
    params = model.params()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    tr_actions = np.array([s.action for s in train_samples])
    tr_adverbs = np.array([s.adverb for s in train_samples])
    tr_seqs = [features.get(s.feature) for s in train_samples]
    epochs_log: list[dict[str, Any]] = []
    series: list[dict[str, Any]] = []

    for epoch in range(1, cfg.epochs + 1):
        sums = dict.fromkeys(LOSS_KEYS, 0.0)
        seen = 0
        for bi, idx in enumerate(_minibatches(len(train_samples), cfg.batch_size, rng)):
            x, mask = pad_sequences([tr_seqs[i] for i in idx])
            acts, advs = tr_actions[idx], tr_adverbs[idx]
            o_video = model.video(x, mask, words.actions[acts], "train", rng)
            batch = make_batch(acts, advs, cfg.loss, vocab.n_actions, vocab.n_adverbs, rng, antonyms)
            comps = batch_losses(model, o_video, batch, words, cfg.loss, "train", rng)
            values = {k: float(v.data) for k, v in comps.items()}
            if not all(math.isfinite(v) for v in values.values()):
                _dump_diagnostic(out, epoch, bi, values, params)
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}: {values}")
            backward(comps["total"])
            adam_step(params, adam)
            model.zero_grad()
            for k, v in values.items():
                sums[k] += v * len(idx)
            seen += len(idx)
        epochs_log.append({"epoch": epoch, **{k: sums[k] / seen for k in LOSS_KEYS if k in values}})

        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            rep = evaluate_model(model, test_samples, words, features, antonyms) if test_samples else None
            row = {
                "epoch": epoch,
                "mAP_W": rep.mAP_W if rep else None,
                "mAP_M": rep.mAP_M if rep else None,
                "Acc_A": rep.Acc_A if rep else None,
            }
            series.append(row)
            log.info("epoch %d loss %.4f %s", epoch, epochs_log[-1]["total"], row)
            if on_eval is not None:
                on_eval(row)
            if out is not None:
                save_checkpoint(out / "checkpoint.rgdb", model, adam, epoch, cfg, rng)
                if cfg.keep_all_checkpoints:
                    save_checkpoint(out / f"checkpoint_{epoch:05d}.rgdb", model, adam, epoch, cfg, rng)

    report = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "counts": {"train": len(train_samples), "test": len(test_samples), **ds.counts},
        "epochs": epochs_log,
        "series": series,
        "best": best_metrics(series),
    }
    if out is not None:
        with open(out / "report.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return model, report


def _dump_diagnostic(out, epoch, batch, values, params) -> None:
    if out is None:
        return
    diag = {
        "epoch": epoch,
        "batch": batch,
        "losses": {k: repr(v) for k, v in values.items()},
        "nonfinite_params": [k for k, p in params.items() if not np.isfinite(p.data).all()],
        "param_max_abs": {k: float(np.nanmax(np.abs(p.data))) for k, p in params.items()},
    }
    with open(Path(out) / "diagnostic.json", "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)


# ------------------------------------------------------------------- ablation

ABLATION_AXES = {
    # main / auxiliary modality pairs
    "text-input": [
        {"text.main_modality": "action", "text.auxiliary_modality": "adverb"},
        {"text.main_modality": "pair", "text.auxiliary_modality": "adverb"},
        {"text.main_modality": "pair", "text.auxiliary_modality": "action"},
        {"text.main_modality": "adverb", "text.auxiliary_modality": "action"},
    ],
    # (action triplet, adverb triplet, regression) on/off
    "losses": [
        {"loss.action": True, "loss.adverb": False, "loss.reg": False},
        {"loss.action": False, "loss.adverb": True, "loss.reg": False},
        {"loss.action": False, "loss.adverb": False, "loss.reg": True},
        {"loss.action": True, "loss.adverb": True, "loss.reg": False},
        {"loss.action": True, "loss.adverb": True, "loss.reg": True},
    ],
    # (residual, sigmoid, shared weights)
    "gate-components": [
        {"text.use_residual": True, "text.use_sigmoid": True, "text.share_gate_res_weights": True},
        {"text.use_residual": True, "text.use_sigmoid": False, "text.share_gate_res_weights": False},
        {"text.use_residual": False, "text.use_sigmoid": True, "text.share_gate_res_weights": False},
        {"text.use_residual": True, "text.use_sigmoid": True, "text.share_gate_res_weights": False},
    ],
}


def ablation_config(cfg: TrainConfig, flags: dict[str, Any]) -> TrainConfig:
    """Copy of ``cfg`` with one ablation row applied."""
    cfg = copy.deepcopy(cfg)
    lam = {"action": "lambda_action", "adverb": "lambda_adverb", "reg": "lambda_reg"}
    for key, val in flags.items():
        section, name = key.split(".")
        if section == "loss":
            if not val:
                setattr(cfg.loss, lam[name], 0.0)
        else:
            setattr(getattr(cfg, section), name, val)
    return cfg


def run_ablation(cfg: TrainConfig, axis: str, ds: Dataset, train_samples, test_samples, out_dir=None):
    if axis not in ABLATION_AXES:
        raise ConfigError(f"unknown ablation axis {axis!r}; choose from {sorted(ABLATION_AXES)}")
    rows = []
    for i, flags in enumerate(ABLATION_AXES[axis]):
        row_cfg = ablation_config(cfg, flags)
        sub = Path(out_dir) / f"row{i}" if out_dir is not None else None
        _, report = train(row_cfg, ds, train_samples, test_samples, sub)
        rows.append({"flags": flags, "config_hash": report["config_hash"], "best": report["best"]})
    table = {"axis": axis, "rows": rows}
    if out_dir is not None:
        with open(Path(out_dir) / "ablation.json", "w") as fh:
            json.dump(table, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return table
