"""Command-line entry points; thin argument plumbing over the library modules.

Exit codes: 0 success, 2 configuration/usage error, 3 pipeline stage failure,
1 any other toolkit error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, MorphkitError, ParseError, StageError
from .features import parse_profile, save_features
from .image import read_png, write_png
from .landmarks import delaunay_triangulate, parse_landmarks, save_mesh
from .manifest import load_manifest, render_summary, save_manifest, split_holdout
from .metrics import evaluate, load_report_json, render_table, report_to_json, save_curves
from .morph import MorphSpec, morph_pair
from .pipeline import load_pipeline_config, run_pipeline, STAGES, _extract_features
from .scorer import load_scores, save_scores, score_manifest
from .trainer import TrainConfig, build_dataset, save_model, save_train_log, train
from .manifest import Split
from .features import load_features


def _cmd_dataset_summarize(args) -> int:
    manifest = load_manifest(args.manifest)
    print(render_summary(manifest), end="")
    return 0


def _cmd_dataset_split(args) -> int:
    manifest = load_manifest(args.manifest)
    out = split_holdout(manifest, args.holdout, args.seed)
    save_manifest(out, args.output)
    return 0


def _cmd_landmarks_triangulate(args) -> int:
    points = parse_landmarks(args.points, expected_count=None)
    mesh = delaunay_triangulate(points)
    save_mesh(mesh, args.output)
    return 0


def _cmd_morph(args) -> int:
    if args.pairs:
        if not args.manifest:
            raise ConfigError("--pairs requires --manifest for landmark lookup")
        return _morph_batch(args)
    needed = {"--a": args.a, "--b": args.b, "--lm-a": args.lm_a,
              "--lm-b": args.lm_b, "-o": args.output}
    missing = [flag for flag, value in needed.items() if not value]
    if missing:
        raise ConfigError(f"single morph needs {', '.join(missing)}")
    img_a, img_b = read_png(args.a), read_png(args.b)
    lm_a = parse_landmarks(args.lm_a, expected_count=None)
    lm_b = parse_landmarks(args.lm_b, expected_count=len(lm_a.points))
    spec = _morph_spec(args.alpha, args.a, args.b)
    write_png(morph_pair(img_a, img_b, lm_a, lm_b, spec), args.output)
    return 0


def _morph_spec(alpha: float, source_a: str, source_b: str) -> MorphSpec:
    try:
        return MorphSpec(alpha=alpha, source_a=source_a, source_b=source_b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _morph_batch(args) -> int:
    manifest = load_manifest(args.manifest)
    root = Path(args.root)
    with open(args.pairs, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh
                            if line.strip() and not line.startswith("#"))
        header = next(reader, None)
        if header != ["sample_a", "sample_b", "alpha", "out_path"]:
            raise ParseError(f"bad pairs header {header!r}", line=1)
        for row in reader:
            id_a, id_b, alpha_s, out_path = row
            rec_a, rec_b = manifest.by_id(id_a), manifest.by_id(id_b)
            img_a = read_png(root / rec_a.image_path)
            img_b = read_png(root / rec_b.image_path)
            lm_a = parse_landmarks(root / rec_a.landmarks_path, expected_count=None)
            lm_b = parse_landmarks(root / rec_b.landmarks_path,
                                   expected_count=len(lm_a.points))
            spec = _morph_spec(float(alpha_s), id_a, id_b)
            write_png(morph_pair(img_a, img_b, lm_a, lm_b, spec), out_path)
    return 0


def _cmd_features_extract(args) -> int:
    from .pipeline import PipelineConfig
    manifest = load_manifest(args.manifest)
    profile = parse_profile(args.profile)
    # reuse the pipeline's extraction loop via a minimal config shim
    config = PipelineConfig(out_dir=args.root, profile=args.profile)
    entries = _extract_features(config, manifest, with_flips=args.flips)
    save_features(entries, args.output)
    return 0


def _parse_train_config(path: str) -> TrainConfig:
    config = TrainConfig()
    field_types = {"learning_rate": float, "epochs": int, "batch_size": int,
                   "adam_beta1": float, "adam_beta2": float, "adam_eps": float,
                   "hidden_dim": int, "holdout_fraction": float,
                   "augment_flip": bool, "seed": int}
    bools = {"true": True, "false": False, "1": True, "0": False}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in field_types:
            raise ConfigError(f"line {line_no}: unknown train config key {key!r}")
        try:
            parsed = (bools[value.lower()] if field_types[key] is bool
                      else field_types[key](value))
        except (ValueError, KeyError):
            raise ConfigError(f"line {line_no}: bad value {value!r}") from None
        config = replace(config, **{key: parsed})
    return config


def _cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    features = load_features(args.features)
    config = _parse_train_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    descriptor = args.descriptor or _infer_descriptor(features)
    if not manifest.records_in(Split.HOLDOUT):
        manifest = split_holdout(manifest, config.holdout_fraction, config.seed)
    _, train_x, train_y = build_dataset(manifest.records_in(Split.TRAIN),
                                        features, augment_flip=config.augment_flip)
    _, hold_x, hold_y = build_dataset(manifest.records_in(Split.HOLDOUT),
                                      features, augment_flip=False)
    result = train(train_x, train_y, hold_x, hold_y, config, descriptor)
    save_model(result, args.output)
    if args.log:
        save_train_log(result, args.log)
    best = result.log[result.best_epoch - 1]
    print(f"best epoch {result.best_epoch}: holdout accuracy {best.holdout_acc:.4f}")
    return 0


def _infer_descriptor(features) -> str:
    dim = len(next(iter(features.values())))
    return f"dim-{dim}"


def _cmd_score(args) -> int:
    from .trainer import load_model
    model, _ = load_model(args.model)
    manifest = load_manifest(args.manifest)
    profile = parse_profile(args.profile)
    records = score_manifest(model, manifest, profile, root=args.root,
                             mode=args.mode)
    save_scores(records, args.output)
    return 0


def _cmd_eval(args) -> int:
    records = load_scores(args.scores)
    if args.invert:
        records = [replace(r, score=1.0 - r.score) for r in records]
    report = evaluate(records, group_by_method=args.by_method,
                      dataset=args.dataset, detector=args.detector)
    print(render_table([report]), end="")
    if args.output:
        Path(args.output).write_text(report_to_json(report), encoding="utf-8")
    if args.curves:
        save_curves(records, args.curves)
    return 0


def _cmd_report(args) -> int:
    reports = [load_report_json(p) for p in args.reports]
    if args.format != "table":
        raise ConfigError(f"unknown report format {args.format!r}")
    text = render_table(reports)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def _cmd_run(args) -> int:
    config = load_pipeline_config(args.config)
    stages = [args.stage] if args.stage else None
    run_pipeline(config, stages=stages)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morphkit",
                                     description="Morphing attack detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    dataset = sub.add_parser("dataset", help="manifest operations")
    dsub = dataset.add_subparsers(dest="subcommand", required=True)
    p = dsub.add_parser("summarize", help="print per-class/per-split counts")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_dataset_summarize)
    p = dsub.add_parser("split", help="carve a seeded holdout from Train")
    p.add_argument("manifest")
    p.add_argument("--holdout", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_dataset_split)

    landmarks = sub.add_parser("landmarks", help="landmark geometry")
    lsub = landmarks.add_subparsers(dest="subcommand", required=True)
    p = lsub.add_parser("triangulate", help="Delaunay mesh for a point file")
    p.add_argument("points")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_landmarks_triangulate)

    p = sub.add_parser("morph", help="blend two images along shared landmarks")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--lm-a", dest="lm_a")
    p.add_argument("--lm-b", dest="lm_b")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("-o", "--output")
    p.add_argument("--pairs", help="CSV sample_a,sample_b,alpha,out_path")
    p.add_argument("--manifest", help="manifest for batch landmark lookup")
    p.add_argument("--root", default=".")
    p.set_defaults(func=_cmd_morph)

    features = sub.add_parser("features", help="descriptor extraction")
    fsub = features.add_subparsers(dest="subcommand", required=True)
    p = fsub.add_parser("extract", help="write a binary feature file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--profile", default="lbp-4x4")
    p.add_argument("--root", default=".")
    p.add_argument("--flips", action="store_true",
                   help="also store horizontally flipped rows")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_features_extract)

    p = sub.add_parser("train", help="fit the detector head")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="flat key=value training config")
    p.add_argument("--seed", type=int)
    p.add_argument("--descriptor", help="descriptor id recorded in the model")
    p.add_argument("--log", help="write the per-epoch training log CSV here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("score", help="score a manifest's Test split")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--root", default=".")
    p.add_argument("--mode", choices=("serial", "thread"), default="serial")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="metrics from a score file")
    p.add_argument("scores")
    p.add_argument("--by-method", action="store_true")
    p.add_argument("--invert", action="store_true",
                   help="ingest bona-high scores by flipping polarity")
    p.add_argument("--dataset", default="")
    p.add_argument("--detector", default="")
    p.add_argument("-o", "--output", help="write the report JSON here")
    p.add_argument("--curves", help="write threshold,apcer,bpcer rows here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="render report JSONs as a table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--format", default="table")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="run the file-based pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--stage", choices=STAGES)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except MorphkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
