"""Synthetic video-adverb datasets with a known compositional ground truth.

Word vectors are random unit vectors. A hidden bilinear map sends each
(adverb, action) composition to a d_x target; every video carries noisy copies
of its composition's target ("signal" segments) mixed with distractor segments
taken from compositions of *other* actions, so action-queried attention has
something to filter out.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataio import (
    EmbeddingTable,
    Sample,
    Vocabulary,
    write_embeddings,
    write_feature_file,
    write_manifest,
    write_split,
    write_vocabulary,
)
from .errors import ConfigError


@dataclass
class SynthConfig:
    n_adverbs: int = 6
    n_actions: int = 12
    n_train: int = 2000
    n_test: int = 500
    d_theta: int = 32
    d_x: int = 64
    t_min: int = 1  # signal segments per video, drawn uniformly from [t_min, t_max]
    t_max: int = 1
    distractors: int = 2
    noise: float = 0.1
    antonym_skew: float = 0.5  # probability of the even adverb within its antonym pair
    pair_embeddings: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.n_adverbs < 2 or self.n_adverbs % 2:
            raise ConfigError("n_adverbs must be even and >= 2 (antonym pairing)")
        for name in ("n_actions", "n_train", "n_test", "d_theta", "d_x", "t_min"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.t_max < self.t_min:
            raise ConfigError("t_max must be >= t_min")
        if self.distractors < 0 or self.noise < 0:
            raise ConfigError("distractors and noise must be non-negative")
        if self.distractors and self.n_actions < 2:
            raise ConfigError("distractors need at least two actions")
        if not 0.0 < self.antonym_skew < 1.0:
            raise ConfigError("antonym_skew must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SynthData:
    config: SynthConfig
    vocab: Vocabulary
    embeddings: EmbeddingTable
    train: list[Sample]
    test: list[Sample]
    features: dict[str, np.ndarray]  # video_id -> (T, d_x) float32
    targets: np.ndarray  # (V, A, d_x) hidden composition targets


def _unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _draw_compositions(rng, cfg: SynthConfig, n: int) -> list[tuple[int, int]]:
    v, a = cfg.n_adverbs, cfg.n_actions
    comps: list[tuple[int, int]] = []
    if n >= v * a:
        comps = [(j, k) for k in range(a) for j in range(v)]
        comps = [comps[i] for i in rng.permutation(len(comps))]
    for _ in range(n - len(comps)):
        act = int(rng.integers(a))
        pair = int(rng.integers(v // 2))
        adv = 2 * pair + (0 if rng.random() < cfg.antonym_skew else 1)
        comps.append((adv, act))
    return comps


def generate(cfg: SynthConfig) -> SynthData:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    V, A = cfg.n_adverbs, cfg.n_actions
    adverbs = [f"adv{j}" for j in range(V)]
    actions = [f"act{k}" for k in range(A)]
    vocab = Vocabulary(adverbs, actions, {adverbs[2 * p]: adverbs[2 * p + 1] for p in range(V // 2)})
    theta_v = _unit_rows(rng, V, cfg.d_theta)
    theta_a = _unit_rows(rng, A, cfg.d_theta)
    bilinear = rng.standard_normal((cfg.d_x, cfg.d_theta, cfg.d_theta))
    targets = np.einsum("vi,kij,aj->vak", theta_v, bilinear, theta_a)
    f32 = lambda m: m.astype(np.float32).astype(np.float64)  # noqa: E731
    pairs = {}
    if cfg.pair_embeddings:
        # a phrase embedding sits between its two words
        mixed = theta_v[:, None, :] + theta_a[None, :, :] + 0.1 * rng.standard_normal((V, A, cfg.d_theta))
        mixed /= np.linalg.norm(mixed, axis=-1, keepdims=True)
        pairs = {(adverbs[j], actions[k]): f32(mixed[j, k]) for j in range(V) for k in range(A)}
    table = EmbeddingTable(
        d_theta=cfg.d_theta,
        adverbs=dict(zip(adverbs, f32(theta_v))),
        actions=dict(zip(actions, f32(theta_a))),
        pairs=pairs,
    )

    features: dict[str, np.ndarray] = {}

    def make(prefix: str, n: int) -> list[Sample]:
        out = []
        for i, (adv, act) in enumerate(_draw_compositions(rng, cfg, n)):
            vid = f"{prefix}_{i:05d}"
            n_sig = int(rng.integers(cfg.t_min, cfg.t_max + 1))
            segs = [targets[adv, act] + cfg.noise * rng.standard_normal(cfg.d_x) for _ in range(n_sig)]
            for _ in range(cfg.distractors):
                other = int(rng.integers(A - 1))
                other += other >= act
                segs.append(targets[int(rng.integers(V)), other] + cfg.noise * rng.standard_normal(cfg.d_x))
            segs = [segs[t] for t in rng.permutation(len(segs))]
            features[vid] = np.stack(segs).astype(np.float32)
            out.append(Sample(vid, act, adv, f"features/{vid}.rgdf"))
        return out

    train = make("train", cfg.n_train)
    test = make("test", cfg.n_test)
    return SynthData(cfg, vocab, table, train, test, features, targets)


def write(data: SynthData, out_dir) -> dict[str, str]:
    """Emit the standard on-disk layout; returns the written paths."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    for vid, seq in data.features.items():
        write_feature_file(out / "features" / f"{vid}.rgdf", seq)
    paths = {
        "vocab": out / "vocab.json",
        "embeddings": out / "embeddings.rgdb",
        "manifest": out / "manifest.jsonl",
        "train_manifest": out / "train.jsonl",
        "test_manifest": out / "test.jsonl",
        "split": out / "split.json",
        "config": out / "synth_config.json",
    }
    write_vocabulary(paths["vocab"], data.vocab)
    write_embeddings(paths["embeddings"], data.embeddings)
    write_manifest(paths["manifest"], data.train + data.test, data.vocab)
    write_manifest(paths["train_manifest"], data.train, data.vocab)
    write_manifest(paths["test_manifest"], data.test, data.vocab)
    write_split(
        paths["split"],
        {"train": [s.video_id for s in data.train], "test": [s.video_id for s in data.test], "unlabelled": []},
    )
    with open(paths["config"], "w") as fh:
        json.dump(asdict(data.config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {k: str(v) for k, v in paths.items()}


def nearest_target_scores(data: SynthData, samples: list[Sample]) -> np.ndarray:
    """Oracle score matrix (N, V): negative distance from the closest segment of
    each video to the hidden target of every adverb under the video's action."""
    out = np.empty((len(samples), data.config.n_adverbs))
    for i, s in enumerate(samples):
        seq = data.features[s.video_id].astype(np.float64)
        tgt = data.targets[:, s.action]  # (V, d_x)
        dist = np.linalg.norm(seq[:, None, :] - tgt[None, :, :], axis=-1)
        out[i] = -dist.min(axis=0)
    return out
