"""Unseen-composition splits.

Compositions are grouped into units ``(action, {adverb, antonym})`` so that
antonym-action compositions always land on the same side. Units are two-coloured
such that every adverb and every action sees both colours; colour 0 becomes the
training set, colour 1 is halved per composition into test and unlabelled.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .dataio import Sample, Vocabulary
from .errors import InfeasibleSplitError, ValidationError

MAX_REPAIRS = 10_000
MAX_RESTARTS = 100
NOISE = 0.1  # random-walk probability in the repair step


@dataclass
class SplitStats:
    train_samples: int
    test_samples: int
    unlabelled_samples: int
    train_pairs: int
    test_pairs: int
    unlabelled_pairs: int

    def to_dict(self) -> dict[str, int]:
        return asdict(self)


def _units(samples: list[Sample], vocab: Vocabulary):
    antonyms = vocab.antonym_indices() if vocab.has_antonyms else None
    units: dict[tuple[int, tuple[int, ...]], list[Sample]] = defaultdict(list)
    for s in samples:
        pair = (s.adverb,) if antonyms is None else tuple(sorted((s.adverb, int(antonyms[s.adverb]))))
        units[(s.action, pair)].append(s)
    return dict(sorted(units.items()))


def _unit_vertices(units) -> list[list[tuple[str, int]]]:
    """Labels each unit actually touches: its action and every adverb with samples in it."""
    out = []
    for (action, _), members in units.items():
        out.append([("action", action)] + [("adverb", v) for v in sorted({s.adverb for s in members})])
    return out


def _check_feasible(touches, vocab: Vocabulary) -> None:
    count: dict[tuple[str, int], int] = defaultdict(int)
    for labels in touches:
        for lab in labels:
            count[lab] += 1
    names = {"adverb": vocab.adverbs, "action": vocab.actions}
    bad = [f"{kind}:{names[kind][i]}" for (kind, i), n in sorted(count.items()) if n < 2]
    if bad:
        raise InfeasibleSplitError(
            f"labels occurring in fewer than two composition units cannot appear on both sides: {bad}", bad
        )


def _colour_units(touches, rng: np.random.Generator) -> np.ndarray:
    """Two-colour the units so every label they touch sees both colours.
    Random start, min-conflicts repair, bounded restarts."""
    vertices: dict[tuple[str, int], list[int]] = defaultdict(list)
    for e, labels in enumerate(touches):
        for lab in labels:
            vertices[lab].append(e)
    order = sorted(vertices)

    def sees_both(v, colour) -> bool:
        c = colour[vertices[v]]
        return bool(c.min() != c.max())

    for _ in range(MAX_RESTARTS):
        colour = rng.integers(0, 2, size=len(touches))
        for _ in range(MAX_REPAIRS):
            broken = [v for v in order if not sees_both(v, colour)]
            if not broken:
                return colour
            edges = vertices[broken[rng.integers(len(broken))]]
            if rng.random() < NOISE:
                pick = edges[rng.integers(len(edges))]
            else:
                # min-conflicts: flip the unit that leaves the fewest of its labels uncovered
                costs = []
                for e in edges:
                    colour[e] ^= 1
                    costs.append(sum(not sees_both(u, colour) for u in touches[e]))
                    colour[e] ^= 1
                best = [e for e, c in zip(edges, costs) if c == min(costs)]
                pick = best[rng.integers(len(best))]
            colour[pick] ^= 1
    raise InfeasibleSplitError("could not find a valid composition assignment", [])


def generate_split(samples: list[Sample], vocab: Vocabulary, seed: int = 0):
    """Return ``(split, stats)``; ``split`` maps train/test/unlabelled to video ids."""
    rng = np.random.default_rng(seed)
    samples = sorted(samples, key=lambda s: s.video_id)
    units = _units(samples, vocab)
    keys = list(units)
    touches = _unit_vertices(units)
    _check_feasible(touches, vocab)
    colour = _colour_units(touches, rng)
    train: list[str] = []
    test: list[str] = []
    unlabelled: list[str] = []
    for key, c in zip(keys, colour):
        if c == 0:
            train.extend(s.video_id for s in units[key])
            continue
        by_comp: dict[int, list[str]] = defaultdict(list)
        for s in units[key]:
            by_comp[s.adverb].append(s.video_id)
        for v in sorted(by_comp):
            ids = by_comp[v]
            perm = [ids[i] for i in rng.permutation(len(ids))]
            half = math.ceil(len(ids) / 2)
            test.extend(perm[:half])
            unlabelled.extend(perm[half:])
    split = {"train": sorted(train), "test": sorted(test), "unlabelled": sorted(unlabelled)}
    return split, split_stats(split, samples)


def _compositions(ids, index) -> set[tuple[int, int]]:
    return {(index[i].adverb, index[i].action) for i in ids}


def split_stats(split: dict[str, list[str]], samples: list[Sample]) -> SplitStats:
    index = {s.video_id: s for s in samples}
    return SplitStats(
        train_samples=len(split["train"]),
        test_samples=len(split["test"]),
        unlabelled_samples=len(split.get("unlabelled", [])),
        train_pairs=len(_compositions(split["train"], index)),
        test_pairs=len(_compositions(split["test"], index)),
        unlabelled_pairs=len(_compositions(split.get("unlabelled", []), index)),
    )


def validate_split(split: dict[str, list[str]], samples: list[Sample], vocab: Vocabulary) -> dict[str, bool]:
    """Check every split constraint; returns ``{constraint: passed}`` plus ``"passed"``."""
    index = {s.video_id: s for s in samples}
    parts = {k: list(split.get(k, [])) for k in ("train", "test", "unlabelled")}
    unknown = [i for ids in parts.values() for i in ids if i not in index]
    if unknown:
        raise ValidationError(f"split references unknown video ids: {unknown[:10]}", unknown)

    all_ids = [i for ids in parts.values() for i in ids]
    side1 = _compositions(parts["train"], index)
    side2_ids = parts["test"] + parts["unlabelled"]
    side2 = _compositions(side2_ids, index)
    report = {"ids_disjoint": len(all_ids) == len(set(all_ids))}
    report["compositions_disjoint"] = not (side1 & side2)
    for kind, pos in (("adverb", 0), ("action", 1)):
        present = {c[pos] for c in side1 | side2}
        report[f"{kind}_coverage"] = all(
            any(c[pos] == x for c in side1) and any(c[pos] == x for c in side2) for x in present
        )
    if vocab.has_antonyms:
        ant = vocab.antonym_indices()
        closed = True
        for side, other in ((side1, side2), (side2, side1)):
            for v, a in side:
                if (int(ant[v]), a) in other:
                    closed = False
        report["antonym_closure"] = closed
    else:
        report["antonym_closure"] = True
    test_n: dict[tuple[int, int], int] = defaultdict(int)
    unl_n: dict[tuple[int, int], int] = defaultdict(int)
    for i in parts["test"]:
        test_n[(index[i].adverb, index[i].action)] += 1
    for i in parts["unlabelled"]:
        unl_n[(index[i].adverb, index[i].action)] += 1
    report["half_partition"] = all(
        test_n[c] == math.ceil((test_n[c] + unl_n[c]) / 2) and unl_n[c] == (test_n[c] + unl_n[c]) // 2
        for c in side2
    )
    report["passed"] = all(report.values())
    return report
