"""Command-line entry point: ``regada <subcommand> ...``.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, synth
from .checks import TOLERANCE, run_all
from .config import TrainConfig, apply_override, merge, resolve_config
from .dataio import (
    FeatureStore,
    read_manifest_rows,
    read_split,
    read_vocabulary,
    resolve_samples,
    write_split,
)
from .errors import ConfigError, RegadaError
from .metrics import evaluate_model, priors_baseline
from .splits import generate_split, split_stats, validate_split
from .train import (
    ABLATION_AXES,
    load_checkpoint,
    load_split_data,
    run_ablation,
    train,
    word_tables,
)

log = logging.getLogger("regada")


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ------------------------------------------------------------------ arguments


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file merged over the defaults")
    p.add_argument("--preset", help="named bundled preset applied before --config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted override, value parsed as JSON (repeatable)")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="directory in the standard layout written by `synth`")
    p.add_argument("--manifest")
    p.add_argument("--vocab")
    p.add_argument("--embeddings")
    p.add_argument("--split")


def _data_paths(args) -> dict[str, str | None]:
    paths = {"manifest": args.manifest, "vocab": args.vocab, "embeddings": args.embeddings, "split": args.split}
    if args.data:
        base = Path(args.data)
        defaults = {"manifest": "manifest.jsonl", "vocab": "vocab.json", "embeddings": "embeddings.rgdb", "split": "split.json"}
        for key, name in defaults.items():
            if paths[key] is None and (base / name).exists():
                paths[key] = str(base / name)
    missing = [k for k in ("manifest", "vocab", "embeddings") if paths[k] is None]
    if missing:
        raise ConfigError(f"missing data inputs: {', '.join('--' + m for m in missing)} (or pass --data)")
    return paths


def _train_config(args) -> TrainConfig:
    return resolve_config(args.preset, args.config, args.overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regada", description="Video-adverb retrieval with gated text composition.")
    parser.add_argument("--version", action="store_true", help="print build info and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="train a model and write checkpoint + report")
    _config_args(p)
    _data_args(p)
    p.add_argument("--synthetic", metavar="NAME", help="generate a bundled synthetic dataset (tiny, reference) into OUT/data")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _config_args(p)
    p.add_argument("--checkpoint", required=True)
    _data_args(p)
    p.add_argument("--out")

    p = sub.add_parser("splitgen", help="generate or check an unseen-composition split")
    _config_args(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="split JSON to write (stats go next to it)")
    p.add_argument("--check", metavar="SPLIT", help="validate an existing split instead of generating one")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--config", help="synthetic-data JSON config")
    p.add_argument("--preset", help="bundled synthetic preset (tiny, reference)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", required=True)

    p = sub.add_parser("gradcheck", help="finite-difference checks of every op and the full loss")
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("baseline", help="Priors baseline metrics")
    _data_args(p)
    p.add_argument("--out")

    p = sub.add_parser("ablate", help="run one ablation grid")
    _config_args(p)
    _data_args(p)
    p.add_argument("--axis", required=True, choices=sorted(ABLATION_AXES))
    p.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------- subcommands


def _synth_config(args) -> synth.SynthConfig:
    d = asdict(synth.SynthConfig())
    if args.preset:
        try:
            text = resources.files("regada.presets.synth").joinpath(f"{args.preset}.json").read_text()
        except FileNotFoundError:
            raise ConfigError(f"unknown synthetic preset {args.preset!r}") from None
        d = merge(d, json.loads(text))
    if args.config:
        with open(args.config) as fh:
            d = merge(d, json.load(fh))
    for item in args.overrides:
        apply_override(d, item)
    cfg = synth.SynthConfig.from_dict(d)
    cfg.validate()
    return cfg


def cmd_synth(args) -> int:
    data = synth.generate(_synth_config(args))
    _emit(synth.write(data, args.out))
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    if args.synthetic:
        ns = argparse.Namespace(preset=args.synthetic, config=None, overrides=[])
        synth.write(synth.generate(_synth_config(ns)), out / "data")
        args.data = args.data or str(out / "data")
        if not args.preset and not args.config:
            args.preset = f"synthetic_{args.synthetic}"
    cfg = _train_config(args)
    paths = _data_paths(args)
    if paths["split"] is None:
        raise ConfigError("training needs --split (or a --data directory containing split.json)")
    ds, tr, te = load_split_data(paths["manifest"], paths["vocab"], paths["embeddings"], paths["split"])
    _, report = train(cfg, ds, tr, te, out)
    _emit({"report": str(out / "report.json"), "checkpoint": str(out / "checkpoint.rgdb"), "best": report["best"]})
    return 0


def cmd_eval(args) -> int:
    expect = _train_config(args) if (args.config or args.preset or args.overrides) else None
    model, _, epoch, cfg, _ = load_checkpoint(args.checkpoint, expect)
    paths = _data_paths(args)
    ds, _, te = load_split_data(paths["manifest"], paths["vocab"], paths["embeddings"], paths["split"])
    words = word_tables(ds, cfg)
    antonyms = ds.vocab.antonym_indices() if ds.vocab.has_antonyms else None
    rep = evaluate_model(model, te, words, FeatureStore(), antonyms,
                         {"checkpoint": str(args.checkpoint), "epoch": epoch, "config_hash": cfg.hash()})
    result = rep.to_dict(ds.vocab.adverbs)
    if args.out:
        _write_json(args.out, result)
    _emit(result)
    return 0


def cmd_splitgen(args) -> int:
    vocab = read_vocabulary(args.vocab)
    samples = resolve_samples(read_manifest_rows(args.manifest), vocab, Path(args.manifest).parent)
    if args.check:
        split = read_split(args.check)
        checks = validate_split(split, samples, vocab)
        _emit({"stats": split_stats(split, samples).to_dict(), "checks": checks})
        return 0 if checks["passed"] else 1
    if not args.out:
        raise ConfigError("splitgen needs --out (or --check SPLIT)")
    split, stats = generate_split(samples, vocab, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_split(out, split)
    stats_path = out.with_name(out.stem + ".stats.json")
    _write_json(stats_path, {"seed": args.seed, **stats.to_dict()})
    _emit({"split": str(out), "stats": str(stats_path), **stats.to_dict()})
    return 0


def cmd_gradcheck(args) -> int:
    def report(name, err):
        print(f"{'ok  ' if err <= TOLERANCE else 'FAIL'} {name:<20} {err:.3e}")

    return 0 if run_all(args.points, args.seed, report) else 1


def cmd_baseline(args) -> int:
    paths = _data_paths(args)
    if paths["split"] is None:
        raise ConfigError("the priors baseline needs --split")
    ds, tr, te = load_split_data(paths["manifest"], paths["vocab"], paths["embeddings"], paths["split"])
    antonyms = ds.vocab.antonym_indices() if ds.vocab.has_antonyms else None
    result = priors_baseline(tr, te, ds.vocab.n_actions, ds.vocab.n_adverbs, antonyms).to_dict(ds.vocab.adverbs)
    if args.out:
        _write_json(args.out, result)
    _emit(result)
    return 0


def cmd_ablate(args) -> int:
    cfg = _train_config(args)
    paths = _data_paths(args)
    ds, tr, te = load_split_data(paths["manifest"], paths["vocab"], paths["embeddings"], paths["split"])
    _emit(run_ablation(cfg, args.axis, ds, tr, te, args.out))
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "splitgen": cmd_splitgen,
    "synth": cmd_synth,
    "gradcheck": cmd_gradcheck,
    "baseline": cmd_baseline,
    "ablate": cmd_ablate,
}


def build_info() -> str:
    return f"regada {__version__} (python {platform.python_version()}, numpy {np.__version__}, pure-python backend)"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.version:
        print(build_info())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RegadaError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
