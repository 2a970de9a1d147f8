"""Command-line entry point wiring the pipeline stages together.

Subcommands: pretrain-style, curate cull, curate styles, train, extract,
evaluate, cyclic-eval, export-embeddings, config-dump. Settings resolve as
flags > config file > built-in defaults; progress goes to stderr, machine
output to the declared files. Exit codes: 0 success, 1 domain error, 2 usage
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from . import losses
from .errors import ConfigError, RefSketchError
from .style_pretrain import PretrainConfig
from .training import TrainConfig

logger = logging.getLogger("refsketch")

CONFIG_SECTIONS = {
    "train": TrainConfig,
    "pretrain": PretrainConfig,
}

# Fields that name input paths rather than hyperparameters; flags only.
TRAIN_PATH_FLAGS = ("color_dir", "sketch_dir", "style_encoder", "resume")


def load_config_file(path) -> dict:
    """Parse the TOML config file, rejecting unknown sections and keys."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for section, values in raw.items():
        schema = CONFIG_SECTIONS.get(section)
        if schema is None:
            raise ConfigError(f"unknown config section [{section}]")
        known = {f.name for f in dataclasses.fields(schema)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
            )
    return raw


def resolve_config(schema, file_section: dict, overrides: dict):
    """defaults < config file < command-line flags."""
    merged = dict(file_section)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return schema(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_dump(train_cfg: TrainConfig, pretrain_cfg: PretrainConfig) -> str:
    """Canonical sorted-key rendering of every effective setting."""
    lines = []
    for section, cfg in (("train", train_cfg), ("pretrain", pretrain_cfg)):
        for f in dataclasses.fields(cfg):
            lines.append(f"{section}.{f.name} = {getattr(cfg, f.name)!r}")
    lines.append(f"loss.lambda_adv = {losses.LAMBDA_ADV!r}")
    lines.append(f"loss.lambda_cyc = {losses.LAMBDA_CYC!r}")
    lines.append(f"loss.lambda_style_line_decay = {losses.LAMBDA_STYLE_LINE_DECAY!r}")
    lines.append(f"loss.lambda_style_line_start = {losses.LAMBDA_STYLE_LINE_START!r}")
    return "\n".join(sorted(lines)) + "\n"


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--device", default="cpu", help="compute device (cpu)")
    parser.add_argument("--out-dir", default=None)
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch", type=int, default=None)
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--beta1", type=float, default=None)
    parser.add_argument("--beta2", type=float, default=None)
    parser.add_argument("--resolution", type=int, default=None)
    parser.add_argument("--base-channels", type=int, default=None)
    parser.add_argument("--checkpoint-every", type=int, default=None)
    parser.add_argument("--clip-norm", type=float, default=None)
    parser.add_argument("--hed-weights", default=None)
    parser.add_argument("--vgg-weights", default=None)
    # store_true with default=None so "flag not given" is distinguishable
    # from "flag off" when merging with the config file
    for flag in ("no-attention", "no-style", "no-line", "no-cyc", "saturating"):
        parser.add_argument(f"--{flag}", action="store_true", default=None)


def _train_overrides(args) -> dict:
    return {
        "epochs": args.epochs,
        "batch": args.batch,
        "lr": args.lr,
        "beta1": args.beta1,
        "beta2": args.beta2,
        "resolution": args.resolution,
        "base_channels": args.base_channels,
        "checkpoint_every": args.checkpoint_every,
        "seed": args.seed,
        "no_attention": args.no_attention,
        "no_style": args.no_style,
        "no_line": args.no_line,
        "no_cyc": args.no_cyc,
        "saturating": args.saturating,
        "clip_norm": args.clip_norm,
        "hed_weights": args.hed_weights,
        "vgg_weights": args.vgg_weights,
        "out_dir": args.out_dir,
    }


def _file_sections(args) -> dict:
    return load_config_file(args.config) if args.config else {}


def _progress(message: str) -> None:
    logger.info(message)


def cmd_pretrain_style(args) -> int:
    from .style_pretrain import StyleCorpus, pretrain_style_encoder

    sections = _file_sections(args)
    overrides = {
        "epochs": args.epochs,
        "batch": args.batch,
        "lr": args.lr,
        "margin": args.margin,
        "resolution": args.resolution,
        "base_channels": args.base_channels,
        "steps_per_epoch": args.steps_per_epoch,
        "seed": args.seed,
    }
    config = resolve_config(PretrainConfig, sections.get("pretrain", {}), overrides)
    corpus = StyleCorpus.from_manifest(args.corpus)
    _progress(f"pretraining on {len(corpus.entries)} sketches, {config.epochs} epochs")
    pretrain_style_encoder(corpus, config, out_path=args.out, log=_progress)
    _progress(f"wrote {args.out}")
    return 0


def cmd_curate_cull(args) -> int:
    from .curation import cull_improper, list_images
    from .imaging import load_image, resize

    backbone, feature_size = _cluster_backbone(args)
    paths = list_images(args.images)
    images = [resize(load_image(p, mode="sketch"), feature_size, feature_size)
              for p in paths]
    keep = _parse_keep(args.keep, args.rounds)
    _progress(f"culling {len(images)} images, K={args.k}, {args.rounds} round(s)")
    _kept, kept_paths = cull_improper(
        images, backbone, keep, paths=paths, k=args.k, rounds=args.rounds,
        seed=args.seed if args.seed is not None else 0, out_dir=args.out_dir or "curation",
    )
    out_csv = args.out
    with open(out_csv, "w") as fh:
        fh.write("path\n")
        for p in kept_paths:
            fh.write(f"{p}\n")
    _progress(f"{len(kept_paths)} image(s) kept -> {out_csv}")
    return 0


def cmd_curate_styles(args) -> int:
    from .curation import identify_styles, list_images, write_cluster_manifest
    from .imaging import load_image, resize

    backbone, feature_size = _cluster_backbone(args)
    paths = list_images(args.images)
    images = [resize(load_image(p, mode="sketch"), feature_size, feature_size)
              for p in paths]
    _progress(f"clustering {len(images)} sketches into {args.k} styles")
    assignment = identify_styles(
        images, backbone, k=args.k, paths=paths,
        seed=args.seed if args.seed is not None else 0,
        out_dir=args.out_dir or "curation",
    )
    write_cluster_manifest(paths, assignment.labels, args.out)
    _progress(f"style labels -> {args.out}")
    return 0


def _cluster_backbone(args):
    from .extractors import ink_stats_extractor, vgg16_extractor

    if args.vgg_weights:
        from .extractors import VGG16_CLUSTER_TAP

        backbone = vgg16_extractor(args.vgg_weights, taps=(VGG16_CLUSTER_TAP,),
                                   name="vgg16-cluster")
        return backbone, args.feature_size or 224
    return ink_stats_extractor(), args.feature_size or 64


def _parse_keep(spec: str, rounds: int) -> list[list[int]]:
    groups = [g for g in spec.split(";")]
    if len(groups) != rounds:
        raise ConfigError(f"--keep needs {rounds} ';'-separated groups, got {len(groups)}")
    try:
        return [[int(x) for x in g.split(",") if x.strip() != ""] for g in groups]
    except ValueError as exc:
        raise ConfigError(f"bad --keep value: {exc}") from exc


def cmd_train(args) -> int:
    from .style_pretrain import load_style_encoder
    from .training import train

    sections = _file_sections(args)
    config = resolve_config(TrainConfig, sections.get("train", {}), _train_overrides(args))
    encoder = None
    if args.style_encoder is not None:
        encoder = load_style_encoder(args.style_encoder)
    elif not config.no_style:
        raise ConfigError("--style-encoder is required unless --no-style is set")
    result = train(config, args.color_dir, args.sketch_dir, style_encoder=encoder,
                   resume=args.resume, log=_progress)
    _progress(f"final checkpoint {result.checkpoint_path}; loss log {result.log_path}")
    return 0


def cmd_extract(args) -> int:
    from .training import extract

    extract(args.ckpt, args.content, args.reference, args.out)
    _progress(f"wrote {args.out}")
    return 0


def _eval_backbones(args):
    from .evaluation import EvalBackbones
    from .extractors import torchscript_extractor

    kwargs = {}
    if args.lpips_weights:
        kwargs["lpips_net"] = torchscript_extractor(args.lpips_weights, name="lpips-net")
    if args.fid_weights:
        kwargs["fid_net"] = torchscript_extractor(args.fid_weights, name="fid-net")
    return EvalBackbones(**kwargs)


def cmd_evaluate(args) -> int:
    from .curation import load_4skst
    from .evaluation import checkpoint_model, evaluate_extraction, write_report

    dataset = load_4skst(args.dataset)
    model = checkpoint_model(args.ckpt)
    report = evaluate_extraction(model, dataset, _eval_backbones(args),
                                 resolution=args.resolution)
    write_report(report, json_path=args.out, csv_path=args.csv)
    _progress(f"psnr {report.psnr:.3f} dB, fid {report.fid:.4f}, lpips {report.lpips:.5f}")
    return 0


def cmd_cyclic_eval(args) -> int:
    from .curation import load_4skst
    from .evaluation import checkpoint_model, cyclic_evaluate, write_report

    dataset = load_4skst(args.dataset)
    model = checkpoint_model(args.ckpt)
    report = cyclic_evaluate(model, dataset, _eval_backbones(args),
                             resolution=args.resolution, against=args.against)
    write_report(report, json_path=args.out, csv_path=args.csv)
    _progress(
        f"cyclic psnr {report.cyclic.psnr:.3f} dB, fid {report.cyclic.fid:.4f}, "
        f"lpips {report.cyclic.lpips:.5f}"
    )
    return 0


def cmd_export_embeddings(args) -> int:
    from .style_pretrain import StyleCorpus, export_embeddings, load_style_encoder

    encoder = load_style_encoder(args.weights)
    corpus = StyleCorpus.from_manifest(args.corpus)
    rows = export_embeddings(encoder, corpus.entries, args.out, resolution=args.resolution)
    _progress(f"{rows} embedding row(s) -> {args.out}")
    return 0


def cmd_config_dump(args) -> int:
    sections = _file_sections(args)
    train_cfg = resolve_config(TrainConfig, sections.get("train", {}), _train_overrides(args))
    pretrain_cfg = resolve_config(PretrainConfig, sections.get("pretrain", {}),
                                  {"seed": args.seed})
    text = config_dump(train_cfg, pretrain_cfg)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refsketch",
        description="Reference-styled sketch extraction from color images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain-style", help="contrastively pretrain the style encoder")
    _add_global_flags(p)
    p.add_argument("--corpus", required=True, help="manifest CSV (path,shape_id,style_id)")
    p.add_argument("--out", required=True, help="output weights file")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--margin", type=float, default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--steps-per-epoch", type=int, default=None)
    p.set_defaults(func=cmd_pretrain_style)

    curate = sub.add_parser("curate", help="corpus culling and style discovery")
    curate_sub = curate.add_subparsers(dest="curate_command", required=True)

    p = curate_sub.add_parser("cull", help="k-means culling of improper images")
    _add_global_flags(p)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="CSV of surviving paths")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--keep", required=True,
                   help="kept labels per round, e.g. '0,1,2;0,3;1'")
    p.add_argument("--vgg-weights", default=None)
    p.add_argument("--feature-size", type=int, default=None,
                   help="resize before feature extraction (224 with VGG, else 64)")
    p.set_defaults(func=cmd_curate_cull)

    p = curate_sub.add_parser("styles", help="cluster sketches into drawing styles")
    _add_global_flags(p)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="CSV of (path,label)")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--vgg-weights", default=None)
    p.add_argument("--feature-size", type=int, default=None,
                   help="resize before feature extraction (224 with VGG, else 64)")
    p.set_defaults(func=cmd_curate_styles)

    p = sub.add_parser("train", help="adversarial training")
    _add_global_flags(p)
    _add_train_flags(p)
    p.add_argument("--color-dir", required=True)
    p.add_argument("--sketch-dir", required=True)
    p.add_argument("--style-encoder", default=None, help="pretrained style weights")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="extract one sketch")
    _add_global_flags(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--content", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    for name, func in (("evaluate", cmd_evaluate), ("cyclic-eval", cmd_cyclic_eval)):
        p = sub.add_parser(name, help=f"{name} on the paired evaluation set")
        _add_global_flags(p)
        p.add_argument("--ckpt", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--out", required=True, help="JSON report path")
        p.add_argument("--csv", default=None, help="optional flat CSV report")
        p.add_argument("--resolution", type=int, default=512)
        p.add_argument("--lpips-weights", default=None)
        p.add_argument("--fid-weights", default=None)
        if name == "cyclic-eval":
            p.add_argument("--against", default="first-output",
                           choices=["first-output", "ground-truth"])
        p.set_defaults(func=func)

    p = sub.add_parser("export-embeddings", help="style embeddings to CSV")
    _add_global_flags(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=None)
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("config-dump", help="canonical dump of effective settings")
    _add_global_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_config_dump)

    return parser


def dispatch(argv) -> int:
    """Run one subcommand; 0 success, 1 domain error, 2 usage error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper()),
        format="%(message)s",
    )
    if args.device != "cpu":
        print(f"error: unsupported device {args.device!r} (cpu only)", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except RefSketchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
