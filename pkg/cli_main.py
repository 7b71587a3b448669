"""Command-line entry: synth, extract, train, evaluate, print-config."""
from __future__ import annotations

import argparse
import csv
from io import StringIO
import logging
from pathlib import Path
import sys
from typing import Sequence

from cli_constants import (
    CONFUSION_CSV,
    CONFUSION_TXT,
    DISTANCES_CSV,
    EIGENVALUES_SUFFIX,
    EXIT_FAILURE,
    EXIT_OK,
    LOG_FORMAT,
    METRICS_CSV,
    SUMMARY_CSV,
    SUMMARY_HEADER,
    SUMMARY_TXT,
)
from services.classifier import (
    METHOD_NAMES,
    render_confusion_table,
    render_performance_summary,
    percent_text,
    summary_line,
    write_confusion_csv,
    write_distance_csv,
    write_metrics_csv,
)
from services.dataset import class_labels, load_manifest, split
from services.feature_io import BINARY_SUFFIXES, MODALITIES, read_feature_csv, save_feature_table
from services.media import atomic_write_text
from services.pca import load_model, save_model, write_eigenvalues_csv
from services.pipeline import evaluate_model, extract_features, resolve_workers, train_model
from services.pipeline_config import (
    PipelineConfig,
    load_pipeline_config,
    render_config,
    save_pipeline_config,
    with_overrides,
)
from services.synth import synth_corpus

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _components(value: str) -> int | str:
    if value == "all":
        return value
    try:
        count = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("must be 'all' or a non-negative integer") from exc
    if count < 0:
        raise argparse.ArgumentTypeError("must be 'all' or a non-negative integer")
    return count


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON pipeline config; defaults apply when omitted.")
    common.add_argument("--seed", type=int, help="Seed for the split and the synthetic corpus.")
    common.add_argument("--workers", type=int, help="Worker processes (0 = all CPUs).")
    noise = common.add_mutually_exclusive_group()
    noise.add_argument("--verbose", action="store_true", help="Log debug messages.")
    noise.add_argument("--quiet", action="store_true", help="Log warnings and errors only.")

    parser = argparse.ArgumentParser(
        prog="lipreader",
        description="Isolated-word recognition from lip images (Zernike + PCA) and audio (MFCC).",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="Generate a synthetic corpus.")
    synth.add_argument("--out", type=Path, required=True, help="Corpus directory.")
    synth.add_argument("--classes", type=int, default=12)
    synth.add_argument("--per-class", type=int, default=10)
    synth.add_argument("--noise", type=float, default=0.0, help="Jitter and noise level.")
    synth.add_argument("--frames", type=int, default=52)
    synth.add_argument("--width", type=int, default=720)
    synth.add_argument("--height", type=int, default=576)
    synth.add_argument("--sample-rate", type=int, default=16000)
    synth.add_argument("--duration", type=float, default=2.0, help="Utterance length in seconds.")
    synth.set_defaults(handler=cmd_synth)

    extract = commands.add_parser("extract", parents=[common], help="Extract utterance features.")
    extract.add_argument("--manifest", type=Path, required=True)
    extract.add_argument("--modality", choices=MODALITIES, required=True)
    extract.add_argument("--out", type=Path, required=True, help="Feature CSV path.")
    extract.add_argument("--masks", type=Path, help="Dump preprocessed lip masks here.")
    extract.add_argument("--descriptors", type=Path, help="Write per-frame Zernike descriptor CSVs here.")
    extract.set_defaults(handler=cmd_extract)

    train = commands.add_parser("train", parents=[common], help="Fit the eigenspace model.")
    train.add_argument("--manifest", type=Path, required=True, help="Manifest defining the split.")
    train.add_argument("--features", type=Path, required=True)
    train.add_argument("--modality", choices=MODALITIES)
    train.add_argument("--components", type=_components, help="'all' or a component count.")
    train.add_argument("--model", "--out", dest="model", type=Path, required=True)
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("evaluate", parents=[common], help="Classify the test split.")
    evaluate.add_argument("--manifest", type=Path, required=True, help="Manifest defining the split.")
    evaluate.add_argument("--features", type=Path, required=True)
    evaluate.add_argument("--modality", choices=MODALITIES)
    evaluate.add_argument("--model", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, help="Report directory (default: paths.out_dir).")
    evaluate.set_defaults(handler=cmd_evaluate)

    show = commands.add_parser("print-config", parents=[common], help="Print the effective config.")
    show.add_argument("--components", type=_components)
    show.add_argument("--out", type=Path, help="Also save the effective config to this file.")
    show.set_defaults(handler=cmd_print_config)
    return parser


def effective_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_pipeline_config(args.config)
    return with_overrides(
        cfg,
        seed=args.seed,
        components=getattr(args, "components", None),
        workers=args.workers,
    )


def _infer_modality(features: Path, given: str | None) -> str:
    if given:
        return given
    found = [m for m in MODALITIES if features.with_suffix(BINARY_SUFFIXES[m]).exists()]
    if len(found) != 1:
        raise ValueError(f"{features}: cannot tell the modality; pass --modality.")
    return found[0]


def cmd_synth(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    manifest = synth_corpus(
        args.out,
        n_classes=args.classes,
        n_per_class=args.per_class,
        seed=cfg.split.seed,
        noise_level=args.noise,
        frames=args.frames,
        frame_size=(args.width, args.height),
        sample_rate=args.sample_rate,
        duration_s=args.duration,
        workers=resolve_workers(cfg.workers),
    )
    print(manifest)
    return EXIT_OK


def cmd_extract(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    records = load_manifest(args.manifest)
    if args.descriptors is not None and args.modality != "visual":
        logger.warning("--descriptors applies to visual extraction only; ignoring it")
    mask_dir = args.masks
    if mask_dir is None and cfg.paths.masks_dir:
        mask_dir = Path(cfg.paths.masks_dir)
    result = extract_features(
        records, cfg, args.modality, mask_dir=mask_dir, descriptor_dir=args.descriptors
    )
    companion = save_feature_table(args.out, result.table)
    logger.info("Wrote %d %s rows to %s and %s", len(result.table), args.modality, args.out, companion)
    if result.errors:
        for record_id, message in result.errors.items():
            print(f"{record_id}: {message}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _split_ids(manifest: Path, cfg: PipelineConfig) -> tuple[list[str], list[str], list[str]]:
    records = load_manifest(manifest)
    train, test = split(records, cfg.split)
    return [r.id for r in train], [r.id for r in test], class_labels(records)


def cmd_train(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    modality = _infer_modality(args.features, args.modality)
    table = read_feature_csv(args.features, modality)
    train_ids, _, _ = _split_ids(args.manifest, cfg)
    model = train_model(table, train_ids, cfg.pca.components)
    save_model(args.model, model)
    write_eigenvalues_csv(args.model.with_suffix(EIGENVALUES_SUFFIX), model)
    return EXIT_OK


def _read_summary(path: Path) -> dict[str, tuple[int, int]]:
    if not path.exists():
        return {}
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    return {row["modality"]: (int(row["correct"]), int(row["total"])) for row in rows}


def _write_summary(out_dir: Path, modality: str, correct: int, total: int) -> None:
    results = _read_summary(out_dir / SUMMARY_CSV)
    results[modality] = (correct, total)
    ordered = {m: results[m] for m in [*MODALITIES, *results] if m in results}
    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for name, (ok, count) in ordered.items():
        writer.writerow([name, ok, count, percent_text(ok, count)])
    atomic_write_text(out_dir / SUMMARY_CSV, buffer.getvalue())
    atomic_write_text(out_dir / SUMMARY_TXT, render_performance_summary(ordered))


def cmd_evaluate(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    modality = _infer_modality(args.features, args.modality)
    table = read_feature_csv(args.features, modality)
    model = load_model(args.model)
    if table.dim != model.dim:
        raise ValueError(
            f"{args.features}: feature dimension {table.dim} does not match "
            f"{args.model} dimension {model.dim}."
        )
    _, test_ids, classes = _split_ids(args.manifest, cfg)
    _, report, distances = evaluate_model(model, table, test_ids, classes)

    out_dir: Path = args.out or Path(cfg.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_text = render_confusion_table(report, METHOD_NAMES[modality])
    write_confusion_csv(out_dir / CONFUSION_CSV.format(modality=modality), report)
    atomic_write_text(out_dir / CONFUSION_TXT.format(modality=modality), table_text)
    write_metrics_csv(out_dir / METRICS_CSV.format(modality=modality), report)
    available = set(table.ids)
    tested = [i for i in test_ids if i in available]
    write_distance_csv(out_dir / DISTANCES_CSV.format(modality=modality), distances, tested, model.labels)
    _write_summary(out_dir, modality, report.correct, report.total)

    print(table_text, end="")
    print(summary_line(modality, report))
    return EXIT_OK


def cmd_print_config(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    print(render_config(cfg), end="")
    if args.out is not None:
        save_pipeline_config(args.out, cfg)
        logger.info("Saved config to %s", args.out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        cfg = effective_config(args)
        return args.handler(args, cfg)
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE
