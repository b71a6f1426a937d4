"""On-disk formats and loaders.

Binary tensor record ("RGDF"), all integers little-endian u32::

    magic  b"RGDF"
    version = 1
    dtype      1 = float32, 2 = float64
    rank
    dims[rank]
    payload    row-major values

Bundles ("RGDB") hold several named records behind a JSON header and back both
the word-embedding tables and model checkpoints::

    magic  b"RGDB"
    version = 1
    header_len
    header     UTF-8 JSON, sorted keys; header["tensors"] lists record names
    records    one RGDF record per name, in header order

Manifests are JSON lines ``{"video_id", "feature", "action", "adverb"}`` with
feature paths relative to the manifest. Vocabularies, splits and metric
reports are single JSON objects.
"""
from __future__ import annotations

import io
import json
import math
import os
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Iterable

import numpy as np

from .errors import FormatError, ValidationError

TENSOR_MAGIC = b"RGDF"
BUNDLE_MAGIC = b"RGDB"
FORMAT_VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}


# ------------------------------------------------------------------ tensors


def write_tensor(fh: BinaryIO, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    code = _CODES.get(arr.dtype)
    if code is None:
        raise FormatError(f"unsupported dtype {arr.dtype}")
    if arr.ndim == 0 or any(n < 1 for n in arr.shape):
        raise FormatError(f"tensor extents must be positive, got shape {arr.shape}")
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<III", FORMAT_VERSION, code, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    offset = fh.tell()
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what} at offset {offset}: wanted {n} bytes, got {len(buf)}")
    return buf


def read_tensor(fh: BinaryIO) -> np.ndarray:
    start = fh.tell()
    magic = _read_exact(fh, 4, "magic")
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset {start}")
    version, code, rank = struct.unpack("<III", _read_exact(fh, 12, "header"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version} at offset {start + 4}")
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code} at offset {start + 8}")
    if rank < 1:
        raise FormatError(f"rank must be >= 1 at offset {start + 12}")
    dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "dims"))
    if any(d < 1 for d in dims):
        raise FormatError(f"zero extent in dims {dims} at offset {start + 16}")
    dtype = _DTYPES[code]
    payload_at = fh.tell()
    n = math.prod(dims)
    arr = np.frombuffer(_read_exact(fh, n * dtype.itemsize, "payload"), dtype=dtype).reshape(dims)
    bad = ~np.isfinite(arr)
    if bad.any():
        first = int(np.flatnonzero(bad.reshape(-1))[0])
        raise FormatError(f"non-finite value at offset {payload_at + first * dtype.itemsize}")
    return arr.astype(dtype.newbyteorder("="))


def write_feature_file(path, seq: np.ndarray) -> None:
    """Store a (T, d_x) feature sequence as float32."""
    seq = np.asarray(seq)
    if seq.ndim != 2:
        raise FormatError(f"feature sequence must be rank 2, got shape {seq.shape}")
    with open(path, "wb") as fh:
        write_tensor(fh, seq.astype(np.float32))


def read_feature_file(path) -> np.ndarray:
    """Load a feature sequence, upcast to float64 (values are the stored float32s)."""
    with open(path, "rb") as fh:
        arr = read_tensor(fh)
        trailing = fh.read(1)
    if trailing:
        raise FormatError(f"{path}: trailing bytes after payload")
    if arr.ndim != 2:
        raise FormatError(f"{path}: feature sequence must be rank 2, got {arr.shape}")
    if arr.dtype != np.float32:
        raise FormatError(f"{path}: feature payload must be float32")
    return arr.astype(np.float64)


def read_feature_header(path) -> tuple[int, ...]:
    with open(path, "rb") as fh:
        if fh.read(4) != TENSOR_MAGIC:
            raise FormatError(f"{path}: bad magic at offset 0")
        _, _, rank = struct.unpack("<III", _read_exact(fh, 12, "header"))
        return struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "dims"))


# ------------------------------------------------------------------ bundles


def encode_bundle(header: dict[str, Any], tensors: dict[str, np.ndarray]) -> bytes:
    header = dict(header)
    header["tensors"] = list(tensors)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(BUNDLE_MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
    buf.write(blob)
    for arr in tensors.values():
        write_tensor(buf, arr)
    return buf.getvalue()


def write_bundle(path, header: dict[str, Any], tensors: dict[str, np.ndarray]) -> None:
    data = encode_bundle(header, tensors)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_bundle(path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != BUNDLE_MAGIC:
            raise FormatError(f"{path}: bad bundle magic {magic!r} at offset 0")
        version, hlen = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported bundle version {version}")
        try:
            header = json.loads(_read_exact(fh, hlen, "bundle header"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bundle header is not JSON: {exc}") from None
        tensors = {name: read_tensor(fh) for name in header.get("tensors", [])}
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after last record")
    return header, tensors


# --------------------------------------------------------------- vocabulary


@dataclass
class Vocabulary:
    adverbs: list[str]
    actions: list[str]
    antonyms: dict[str, str] | None = None

    def __post_init__(self):
        for kind, labels in (("adverb", self.adverbs), ("action", self.actions)):
            dupes = sorted({x for x in labels if labels.count(x) > 1})
            if dupes:
                raise ValidationError(f"duplicate {kind} labels: {dupes}", dupes)
        self._adv = {v: i for i, v in enumerate(self.adverbs)}
        self._act = {a: i for i, a in enumerate(self.actions)}
        if self.antonyms is not None:
            self.antonyms = complete_antonyms(self.antonyms, self.adverbs)

    @property
    def n_adverbs(self) -> int:
        return len(self.adverbs)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def has_antonyms(self) -> bool:
        return self.antonyms is not None

    def adverb_index(self, label: str) -> int:
        return self._adv[label]

    def action_index(self, label: str) -> int:
        return self._act[label]

    def antonym_indices(self) -> np.ndarray:
        """``out[j]`` is the index of the antonym of adverb ``j``."""
        if self.antonyms is None:
            raise ValidationError("vocabulary has no antonym map")
        return np.array([self._adv[self.antonyms[v]] for v in self.adverbs])

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {"adverbs": self.adverbs, "actions": self.actions}
        if self.antonyms is not None:
            seen, pairs = set(), {}
            for v in self.adverbs:
                if v not in seen:
                    pairs[v] = self.antonyms[v]
                    seen.update((v, self.antonyms[v]))
            d["antonyms"] = pairs
        return d


def complete_antonyms(pairs: dict[str, str], adverbs: Iterable[str]) -> dict[str, str]:
    """Close a one-directional antonym listing into a full involution."""
    adverbs = list(adverbs)
    known = set(adverbs)
    full: dict[str, str] = {}
    offenders = []
    for v, w in pairs.items():
        for x in (v, w):
            if x not in known:
                offenders.append(x)
        if v == w:
            offenders.append(v)
        for x, y in ((v, w), (w, v)):
            if full.get(x, y) != y:
                offenders.append(x)
            full[x] = y
    offenders.extend(v for v in adverbs if v not in full)
    if offenders:
        uniq = list(dict.fromkeys(offenders))
        raise ValidationError(f"antonym map is not a fixed-point-free involution over the adverbs: {uniq}", uniq)
    return {v: full[v] for v in adverbs}


def read_vocabulary(path) -> Vocabulary:
    with open(path) as fh:
        d = json.load(fh)
    try:
        return Vocabulary(list(d["adverbs"]), list(d["actions"]), d.get("antonyms"))
    except KeyError as exc:
        raise FormatError(f"{path}: missing key {exc}") from None


def write_vocabulary(path, vocab: Vocabulary) -> None:
    _write_json(path, vocab.to_json())


# --------------------------------------------------------------- embeddings


@dataclass
class EmbeddingTable:
    d_theta: int
    adverbs: dict[str, np.ndarray]
    actions: dict[str, np.ndarray]
    pairs: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def bind(self, vocab: Vocabulary, need_pairs: bool = False):
        """Matrices aligned to ``vocab``: (V, d), (A, d) and optionally (V, A, d)."""
        missing = [v for v in vocab.adverbs if v not in self.adverbs]
        missing += [a for a in vocab.actions if a not in self.actions]
        if missing:
            raise ValidationError(f"missing word embeddings for: {missing}", missing)
        adv = np.stack([self.adverbs[v] for v in vocab.adverbs]).astype(np.float64)
        act = np.stack([self.actions[a] for a in vocab.actions]).astype(np.float64)
        pair = None
        if need_pairs:
            absent = [
                f"{v}|{a}" for v in vocab.adverbs for a in vocab.actions if (v, a) not in self.pairs
            ]
            if absent:
                raise ValidationError(f"missing pair embeddings for: {absent[:10]}", absent)
            pair = np.stack(
                [np.stack([self.pairs[(v, a)] for a in vocab.actions]) for v in vocab.adverbs]
            ).astype(np.float64)
        return adv, act, pair


def write_embeddings(path, table: EmbeddingTable) -> None:
    header: dict[str, Any] = {
        "kind": "embeddings",
        "adverbs": list(table.adverbs),
        "actions": list(table.actions),
        "pairs": [list(k) for k in table.pairs],
    }
    tensors = {
        "adverbs": np.stack(list(table.adverbs.values())).astype(np.float32),
        "actions": np.stack(list(table.actions.values())).astype(np.float32),
    }
    if table.pairs:
        tensors["pairs"] = np.stack(list(table.pairs.values())).astype(np.float32)
    write_bundle(path, header, tensors)


def read_embeddings(path) -> EmbeddingTable:
    header, tensors = read_bundle(path)
    if header.get("kind") != "embeddings":
        raise FormatError(f"{path}: not an embeddings bundle")
    adv, act = tensors["adverbs"].astype(np.float64), tensors["actions"].astype(np.float64)
    widths = {adv.shape[1], act.shape[1]}
    pairs = {}
    if header.get("pairs"):
        pv = tensors["pairs"].astype(np.float64)
        widths.add(pv.shape[1])
        pairs = {(v, a): pv[i] for i, (v, a) in enumerate(header["pairs"])}
    if len(widths) != 1:
        raise FormatError(f"{path}: embedding widths differ: {sorted(widths)}")
    if len(header["adverbs"]) != adv.shape[0] or len(header["actions"]) != act.shape[0]:
        raise FormatError(f"{path}: label count does not match tensor rows")
    return EmbeddingTable(
        d_theta=widths.pop(),
        adverbs=dict(zip(header["adverbs"], adv)),
        actions=dict(zip(header["actions"], act)),
        pairs=pairs,
    )


# ----------------------------------------------------------------- manifests


@dataclass(frozen=True)
class Sample:
    video_id: str
    action: int
    adverb: int
    feature: str  # absolute or manifest-relative path


def read_manifest_rows(path) -> list[dict[str, Any]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            missing = {"video_id", "feature", "action", "adverb"} - set(row)
            if missing:
                raise FormatError(f"{path}:{lineno}: missing keys {sorted(missing)}")
            rows.append(row)
    return rows


def write_manifest(path, samples: Iterable[Sample], vocab: Vocabulary) -> None:
    with open(path, "w") as fh:
        for s in samples:
            row = {
                "video_id": s.video_id,
                "feature": s.feature,
                "action": vocab.actions[s.action],
                "adverb": vocab.adverbs[s.adverb],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


@dataclass
class Dataset:
    vocab: Vocabulary
    embeddings: EmbeddingTable
    samples: list[Sample]

    @property
    def counts(self) -> dict[str, int]:
        return {"N": len(self.samples), "A": self.vocab.n_actions, "V": self.vocab.n_adverbs}

    def by_id(self) -> dict[str, Sample]:
        return {s.video_id: s for s in self.samples}

    def subset(self, ids: Iterable[str]) -> list[Sample]:
        index = self.by_id()
        return [index[i] for i in ids]


def resolve_samples(rows, vocab: Vocabulary, base_dir) -> list[Sample]:
    unknown: list[str] = []
    samples = []
    for row in rows:
        adv, act = row["adverb"], row["action"]
        if adv not in vocab.adverbs:
            unknown.append(f"adverb:{adv}")
        if act not in vocab.actions:
            unknown.append(f"action:{act}")
        if adv in vocab.adverbs and act in vocab.actions:
            feat = row["feature"]
            if not os.path.isabs(feat):
                feat = str(Path(base_dir) / feat)
            samples.append(Sample(str(row["video_id"]), vocab.action_index(act), vocab.adverb_index(adv), feat))
    if unknown:
        uniq = list(dict.fromkeys(unknown))
        raise ValidationError(f"manifest references unknown labels: {uniq}", uniq)
    return samples


def load_dataset(manifest_path, vocab_path, embeddings_path, check_features: bool = True) -> Dataset:
    """Load and cross-validate a manifest, its vocabulary and word embeddings."""
    vocab = read_vocabulary(vocab_path)
    table = read_embeddings(embeddings_path)
    table.bind(vocab)
    samples = resolve_samples(read_manifest_rows(manifest_path), vocab, Path(manifest_path).parent)
    dupes = sorted(i for i, n in Counter(s.video_id for s in samples).items() if n > 1)
    if dupes:
        raise ValidationError(f"duplicate video ids: {dupes[:10]}", dupes)
    if check_features:
        missing = [s.feature for s in samples if not os.path.exists(s.feature)]
        if missing:
            raise ValidationError(f"missing feature files: {missing[:10]}", missing)
        widths = {}
        for s in samples:
            dims = read_feature_header(s.feature)
            if len(dims) != 2:
                raise ValidationError(f"{s.feature}: feature file must be rank 2", [s.feature])
            widths.setdefault(dims[1], s.feature)
        if len(widths) > 1:
            raise ValidationError(f"feature widths disagree: {sorted(widths)}", list(widths.values()))
    return Dataset(vocab, table, samples)


class FeatureStore:
    """Lazy, cached access to per-video feature sequences."""

    def __init__(self):
        self._cache: dict[str, np.ndarray] = {}

    def get(self, path: str) -> np.ndarray:
        arr = self._cache.get(path)
        if arr is None:
            arr = read_feature_file(path)
            if arr.shape[0] < 1:
                raise FormatError(f"{path}: empty feature sequence")
            self._cache[path] = arr
        return arr


# ------------------------------------------------------------ splits, reports


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_split(path) -> dict[str, list[str]]:
    with open(path) as fh:
        d = json.load(fh)
    split = {k: [str(x) for x in d.get(k, [])] for k in ("train", "test", "unlabelled")}
    seen: dict[str, str] = {}
    clashes = []
    for part, ids in split.items():
        for i in ids:
            if i in seen:
                clashes.append(i)
            seen[i] = part
    if clashes:
        raise ValidationError(f"split lists overlap: {clashes[:10]}", clashes)
    return split


def write_split(path, split: dict[str, list[str]]) -> None:
    _write_json(path, {k: list(split.get(k, [])) for k in ("train", "test", "unlabelled")})


METRIC_KEYS = ("mAP_W", "mAP_M", "Acc_A")


def best_metrics(series: list[dict[str, Any]]) -> dict[str, Any]:
    """Per-metric maxima over an evaluation series, each with its own epoch."""
    if not series:
        raise ValueError("metric series is empty")
    best: dict[str, Any] = {}
    for key in METRIC_KEYS:
        vals = [(row[key], row.get("epoch")) for row in series if row.get(key) is not None]
        if not vals:
            best[key] = None
            continue
        value, epoch = max(vals, key=lambda ve: ve[0])  # first epoch wins ties
        best[key] = {"value": value, "epoch": epoch}
    return best


def save_metrics(path, series: list[dict[str, Any]], extra: dict[str, Any] | None = None) -> dict[str, Any]:
    report = {"series": series, "best": best_metrics(series)}
    if extra:
        report.update(extra)
    _write_json(path, report)
    return report
