"""Configuration dataclasses, JSON (de)serialization and presets."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any

from .errors import ConfigError

CONFIG_VERSION = 1
MODALITIES = ("adverb", "action", "pair")


@dataclass
class TextEncoderConfig:
    d_theta: int | None = None  # None: inferred from the embedding table
    d_dim: int = 400
    n_gate: int = 2
    n_res: int = 2
    drop_g: float = 0.6
    use_residual: bool = True
    use_sigmoid: bool = True
    share_gate_res_weights: bool = False
    main_modality: str = "adverb"
    auxiliary_modality: str = "action"
    leaky_slope: float = 0.01
    gate_init: float = 1.0
    res_init: float = 1.0

    def validate(self) -> None:
        if self.n_gate < 1 or self.n_res < 1:
            raise ConfigError("n_gate and n_res must be >= 1")
        if not 0.0 <= self.drop_g < 1.0:
            raise ConfigError(f"drop_g must lie in [0, 1), got {self.drop_g}")
        if self.d_dim < 1 or (self.d_theta is not None and self.d_theta < 1):
            raise ConfigError("embedding widths must be positive")
        if self.main_modality not in MODALITIES:
            raise ConfigError(f"main_modality must be one of {MODALITIES}")
        if self.auxiliary_modality not in ("adverb", "action"):
            raise ConfigError("auxiliary_modality must be 'adverb' or 'action'")
        if self.main_modality == self.auxiliary_modality:
            raise ConfigError("main and auxiliary modality must differ")


@dataclass
class VideoEncoderConfig:
    d_x: int | None = None  # None: inferred from the feature files
    d_theta: int | None = None
    n_heads: int = 4
    d_head: int = 64
    drop_attn: float = 0.1
    n_proj: int = 2
    drop_proj: float = 0.3

    def validate(self) -> None:
        for name in ("n_heads", "d_head", "n_proj"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("d_x", "d_theta"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("drop_attn", "drop_proj"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {p}")


@dataclass
class LossConfig:
    lambda_action: float = 1.0
    lambda_adverb: float = 2.0
    lambda_reg: float = 1.0
    margin: float = 0.5
    adverb_negative_mode: str = "antonym"

    def validate(self) -> None:
        lams = (self.lambda_action, self.lambda_adverb, self.lambda_reg)
        if any(x < 0 for x in lams):
            raise ConfigError("loss weights must be non-negative")
        if not any(x > 0 for x in lams):
            raise ConfigError("at least one loss weight must be positive")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        if self.adverb_negative_mode not in ("antonym", "random_nonmatching"):
            raise ConfigError("adverb_negative_mode must be 'antonym' or 'random_nonmatching'")


@dataclass
class TrainConfig:
    text: TextEncoderConfig = field(default_factory=TextEncoderConfig)
    video: VideoEncoderConfig = field(default_factory=VideoEncoderConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    batch_size: int = 512
    epochs: int = 2000
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-5
    decoupled_weight_decay: bool = False
    eval_every: int = 10
    seed: int = 0
    antonym_training: bool = True
    keep_all_checkpoints: bool = False

    def validate(self) -> None:
        self.text.validate()
        self.video.validate()
        self.loss.validate()
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch norm)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if not self.antonym_training and self.loss.adverb_negative_mode == "antonym":
            raise ConfigError("antonym_training=false requires adverb_negative_mode='random_nonmatching'")

    def to_dict(self) -> dict[str, Any]:
        return {"version": CONFIG_VERSION, **asdict(self)}

    def hash(self) -> str:
        """Digest of the model-defining fields; run-length fields are excluded."""
        d = self.to_dict()
        for key in ("epochs", "eval_every", "keep_all_checkpoints"):
            d.pop(key)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainConfig":
        d = dict(d)
        version = d.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        d.pop("preset_notes", None)
        sub = {
            "text": TextEncoderConfig,
            "video": VideoEncoderConfig,
            "loss": LossConfig,
        }
        kwargs = {}
        known = {f.name for f in dataclasses.fields(cls)}
        for key, val in d.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in sub:
                kwargs[key] = _build(sub[key], val, key)
            else:
                kwargs[key] = val
        return cls(**kwargs)


def _build(klass, values: dict[str, Any], where: str):
    known = {f.name for f in dataclasses.fields(klass)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return klass(**values)


def apply_override(cfg_dict: dict[str, Any], assignment: str) -> None:
    """Apply ``a.b.c=value`` to a nested config dict; value parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override must look like key=value, got {assignment!r}")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg_dict
    keys = path.strip().split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override into non-object at {k!r}")
    node[keys[-1]] = value


def merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, val in update.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], val)
        else:
            out[key] = val
    return out


def preset_names() -> list[str]:
    files = resources.files("regada.presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_preset(name: str) -> dict[str, Any]:
    try:
        text = resources.files("regada.presets").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}") from None
    return json.loads(text)


def resolve_config(
    preset: str | None = None,
    config_path: str | None = None,
    overrides: list[str] | None = None,
) -> TrainConfig:
    d = TrainConfig().to_dict()
    if preset:
        d = merge(d, load_preset(preset))
    if config_path:
        with open(config_path) as fh:
            d = merge(d, json.load(fh))
    for item in overrides or []:
        apply_override(d, item)
    cfg = TrainConfig.from_dict(d)
    cfg.validate()
    return cfg
