"""Retrieval in both directions, mAP (macro / support-weighted), antonym
accuracy, and the training-free priors baseline.

All metrics are computed from a score matrix ``S`` of shape (N_test, V) where
``S[i, j]`` scores adverb ``j`` composed with the ground-truth action of test
video ``i``. For the model this is a cosine similarity; for the baseline it is
an action-conditional adverb frequency.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np


@dataclass
class RankedList:
    ids: list
    scores: np.ndarray


def stable_rank(scores: np.ndarray) -> np.ndarray:
    """Descending order; ties keep ascending original index."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def cosine_similarity(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise cosine between (n, d) and (m, d); any zero-norm row scores -1."""
    u, w = np.atleast_2d(u), np.atleast_2d(w)
    nu = np.linalg.norm(u, axis=1)
    nw = np.linalg.norm(w, axis=1)
    dots = u @ w.T
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = dots / np.outer(nu, nw)
    return np.where(np.outer(nu > 0, nw > 0), sim, -1.0)


def video_to_adverb(o_video: np.ndarray, o_txt: np.ndarray, labels: Sequence | None = None) -> RankedList:
    """Rank the V composed text embeddings ``o_txt`` (V, d) against one video."""
    sims = cosine_similarity(o_video, o_txt)[0]
    order = stable_rank(sims)
    ids = list(range(len(sims))) if labels is None else list(labels)
    return RankedList([ids[i] for i in order], sims[order])


def adverb_to_video(o_txt: np.ndarray, videos: np.ndarray, ids: Sequence) -> RankedList:
    """Rank the videos of one action pool (rows of ``videos``) against a composition."""
    if len(ids) == 0:
        raise ValueError("empty video pool")
    sims = cosine_similarity(o_txt, videos)[0]
    order = stable_rank(sims)
    return RankedList([ids[i] for i in order], sims[order])


def average_precision(relevance: Sequence) -> float:
    """AP of a binary relevance list in ranked order."""
    rel = np.asarray(relevance, dtype=bool)
    n_rel = int(rel.sum())
    if n_rel == 0:
        raise ValueError("average precision needs at least one relevant item")
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float((hits[rel] / ranks[rel]).sum() / n_rel)


@dataclass
class MetricReport:
    mAP_W: float
    mAP_M: float
    Acc_A: float | None
    per_adverb_ap: dict[int, float]
    n_queries: int
    n_skipped: int = 0
    provenance: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, adverb_labels: Sequence[str] | None = None) -> dict[str, Any]:
        d = asdict(self)
        if adverb_labels is not None:
            d["per_adverb_ap"] = {adverb_labels[k]: v for k, v in self.per_adverb_ap.items()}
        else:
            d["per_adverb_ap"] = {str(k): v for k, v in self.per_adverb_ap.items()}
        return d


def map_metrics(scores: np.ndarray, actions: np.ndarray, adverbs: np.ndarray) -> tuple[float, float, dict[int, float], int, int]:
    """Adverb-to-video mAP from a score matrix.

    One query per distinct (adverb, action) composition in the test set; each
    ranks the test videos of that action. APs are averaged per adverb first;
    mAP_M is the plain mean over adverbs, mAP_W weights adverb ``v`` by its
    share of test samples.
    """
    scores = np.asarray(scores, dtype=np.float64)
    actions, adverbs = np.asarray(actions), np.asarray(adverbs)
    n = len(actions)
    if n == 0:
        raise ValueError("empty test set")
    per_adverb: dict[int, list[float]] = {}
    n_queries = n_skipped = 0
    for v, a in sorted({(int(v), int(a)) for v, a in zip(adverbs, actions)}):
        pool = np.flatnonzero(actions == a)
        rel = adverbs[pool] == v
        if pool.size == 0 or not rel.any():
            n_skipped += 1
            continue
        order = stable_rank(scores[pool, v])
        per_adverb.setdefault(v, []).append(average_precision(rel[order]))
        n_queries += 1
    ap = {v: float(np.mean(vals)) for v, vals in sorted(per_adverb.items())}
    map_m = float(np.mean(list(ap.values())))
    support = {v: int((adverbs == v).sum()) for v in ap}
    map_w = float(sum(ap[v] * support[v] for v in ap) / n)
    return map_w, map_m, ap, n_queries, n_skipped


def antonym_accuracy(scores: np.ndarray, adverbs: np.ndarray, antonyms: np.ndarray) -> float:
    """Fraction of videos scoring the true adverb strictly above its antonym."""
    idx = np.arange(len(adverbs))
    adverbs = np.asarray(adverbs)
    return float(np.mean(scores[idx, adverbs] > scores[idx, antonyms[adverbs]]))


def evaluate_scores(
    scores: np.ndarray,
    actions: np.ndarray,
    adverbs: np.ndarray,
    antonyms: np.ndarray | None,
    provenance: dict[str, Any] | None = None,
) -> MetricReport:
    map_w, map_m, ap, nq, ns = map_metrics(scores, actions, adverbs)
    acc = antonym_accuracy(scores, adverbs, antonyms) if antonyms is not None else None
    return MetricReport(map_w, map_m, acc, ap, nq, ns, dict(provenance or {}))


# ---------------------------------------------------------------- model side


def model_scores(model, samples, words, features, batch_size: int = 256) -> np.ndarray:
    """Cosine score matrix (N, V) of an eval-mode model over ``samples``."""
    grid = model.text.embed_grid(words)  # (A, V, d)
    actions = np.array([s.action for s in samples])
    out = np.empty((len(samples), grid.shape[1]))
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        seqs = [features.get(s.feature) for s in chunk]
        acts = actions[start : start + len(chunk)]
        o_video = model.video.encode_sequences(seqs, words.actions[acts], "eval").data
        for k, a in enumerate(acts):
            out[start + k] = cosine_similarity(o_video[k], grid[a])[0]
    return out


def evaluate_model(model, samples, words, features, antonyms, provenance=None) -> MetricReport:
    scores = model_scores(model, samples, words, features)
    actions = np.array([s.action for s in samples])
    adverbs = np.array([s.adverb for s in samples])
    return evaluate_scores(scores, actions, adverbs, antonyms, provenance)


# ------------------------------------------------------------------- priors


def prior_table(train_actions, train_adverbs, n_actions: int, n_adverbs: int) -> np.ndarray:
    """(A, V) Laplace-smoothed p(adverb | action); unseen actions fall back to
    the smoothed global adverb frequency."""
    counts = np.zeros((n_actions, n_adverbs))
    np.add.at(counts, (np.asarray(train_actions), np.asarray(train_adverbs)), 1.0)
    per_action = counts.sum(axis=1, keepdims=True)
    table = (counts + 1.0) / (per_action + n_adverbs)
    glob = (counts.sum(axis=0) + 1.0) / (counts.sum() + n_adverbs)
    table[per_action[:, 0] == 0] = glob
    return table


def priors_baseline(train, test, n_actions: int, n_adverbs: int, antonyms: np.ndarray | None) -> MetricReport:
    table = prior_table([s.action for s in train], [s.adverb for s in train], n_actions, n_adverbs)
    actions = np.array([s.action for s in test])
    adverbs = np.array([s.adverb for s in test])
    return evaluate_scores(table[actions], actions, adverbs, antonyms, {"model": "priors"})
