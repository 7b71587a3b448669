"""Orchestration shared by the CLI commands: extract, train, evaluate."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from services.classifier import EvaluationReport, Prediction, classify, distance_matrix, evaluate, nearest
from services.dataset import UtteranceRecord
from services.feature_io import FeatureTable, select_rows
from services.media import read_frame_sequence, read_wav, write_mask_pgm
from services.mfcc import MfccExtractor
from services.pca import PcaModel, TrainingMatrix, fit, project, reconstruct
from services.pipeline_config import PipelineConfig
from services.roi import BoundingBox, feature_frame, preprocess_frame
from services.zernike import descriptors, utterance_vector, write_descriptor_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionResult:
    table: FeatureTable
    skipped: tuple[str, ...] = ()
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def visual_features(
    record: UtteranceRecord,
    cfg: PipelineConfig,
    mask_dir: Path | None = None,
    descriptor_dir: Path | None = None,
) -> np.ndarray:
    if record.frames_dir is None:
        raise ValueError(f"Utterance {record.id} has no frames_dir.")
    frames = read_frame_sequence(record.frames_dir)
    height, width = frames[0].shape[:2]
    box = record.mouth_box or BoundingBox.full(width, height)
    if not box.fits(width, height):
        raise ValueError(
            f"Utterance {record.id}: mouth_box {box.as_list()} lies outside the {width}x{height} frames."
        )
    roi_cfg = cfg.roi
    crops = [feature_frame(frame, box, roi_cfg) for frame in frames]
    if mask_dir is not None:
        target = Path(mask_dir) / record.id
        for idx, (frame, crop) in enumerate(zip(frames, crops), start=1):
            mask = crop if roi_cfg.feature_source == "binary" else preprocess_frame(frame, box, roi_cfg)
            write_mask_pgm(target / f"mask_{idx:04d}.pgm", mask)
    if descriptor_dir is not None:
        rows = descriptors(crops, cfg.zernike)
        write_descriptor_csv(Path(descriptor_dir) / f"{record.id}.csv", rows, record.label)
    return utterance_vector(crops, cfg.zernike)


def audio_features(record: UtteranceRecord, cfg: PipelineConfig) -> np.ndarray:
    if record.audio_path is None:
        raise ValueError(f"Utterance {record.id} has no audio_path.")
    return MfccExtractor(cfg.mfcc).utterance_features(read_wav(record.audio_path))


def feature_dim(cfg: PipelineConfig, modality: str) -> int:
    return cfg.zernike.utterance_dim if modality == "visual" else cfg.mfcc.utterance_dim


def _extract_one(
    job: tuple[UtteranceRecord, PipelineConfig, str, Path | None, Path | None],
) -> tuple[str, np.ndarray | None, str | None]:
    record, cfg, modality, mask_dir, descriptor_dir = job
    try:
        if modality == "visual":
            vector = visual_features(record, cfg, mask_dir, descriptor_dir)
        else:
            vector = audio_features(record, cfg)
    except (ValueError, OSError) as exc:
        return record.id, None, str(exc)
    return record.id, vector, None


def resolve_workers(workers: int) -> int:
    if workers == 0:
        return os.cpu_count() or 1
    return max(1, workers)


def extract_features(
    records: Sequence[UtteranceRecord],
    cfg: PipelineConfig,
    modality: str,
    workers: int | None = None,
    mask_dir: Path | None = None,
    descriptor_dir: Path | None = None,
) -> ExtractionResult:
    """Feature rows in manifest order; records lacking the modality are skipped."""
    if modality not in ("visual", "audio"):
        raise ValueError(f"Unknown modality {modality!r}.")
    usable = [r for r in records if r.has_modality(modality)]
    skipped = tuple(r.id for r in records if not r.has_modality(modality))
    for record_id in skipped:
        logger.warning("%s: no %s media, skipping", record_id, modality)

    jobs = [(record, cfg, modality, mask_dir, descriptor_dir) for record in usable]
    n_workers = min(resolve_workers(cfg.workers if workers is None else workers), max(1, len(jobs)))
    logger.info("Extracting %s features for %d records with %d worker(s)", modality, len(jobs), n_workers)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(_extract_one, jobs))
    else:
        outcomes = [_extract_one(job) for job in jobs]

    labels_by_id = {r.id: r.label for r in usable}
    ids: list[str] = []
    rows: list[np.ndarray] = []
    errors: dict[str, str] = {}
    for record_id, vector, error in outcomes:
        if error is not None:
            logger.error("%s: %s", record_id, error)
            errors[record_id] = error
            continue
        ids.append(record_id)
        rows.append(vector)

    dim = feature_dim(cfg, modality)
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    table = FeatureTable(tuple(ids), tuple(labels_by_id[i] for i in ids), matrix, modality)
    return ExtractionResult(table, skipped, errors)


def train_model(table: FeatureTable, train_ids: Sequence[str], components: int | str = "all") -> PcaModel:
    subset = select_rows(table, train_ids)
    if len(subset) < 2:
        raise ValueError(f"Training needs at least 2 feature rows, found {len(subset)}.")
    model = fit(TrainingMatrix.from_rows(subset.matrix, subset.labels), components)
    logger.info(
        "Trained %s model: %d vectors of dim %d, %d components",
        table.modality,
        model.n_train,
        model.dim,
        model.n_components,
    )
    columns = subset.matrix.T
    residual = np.linalg.norm(columns - reconstruct(model.train_projections, model), axis=0)
    logger.info("Mean training reconstruction error %.6g", float(residual.mean()))
    return model


def evaluate_model(
    model: PcaModel,
    table: FeatureTable,
    test_ids: Sequence[str],
    classes: Sequence[str] | None = None,
) -> tuple[list[Prediction], EvaluationReport, np.ndarray]:
    if table.dim != model.dim:
        raise ValueError(
            f"Feature dimension {table.dim} does not match model dimension {model.dim}."
        )
    subset = select_rows(table, test_ids)
    if classes is None:
        classes = list(dict.fromkeys([*model.labels, *subset.labels]))
    if model.n_components == 0:
        predictions = [classify(row, model) for row in subset.matrix]
        # every training vector projects to the origin, so all share the raw distance
        distances = np.tile(np.array([p.distance for p in predictions])[:, None], (1, model.n_train))
    else:
        projections = project(subset.matrix.T, model)
        predictions = [nearest(projections[:, j], model) for j in range(len(subset))]
        distances = distance_matrix(projections, model)
    report = evaluate(predictions, subset.labels, classes)
    logger.info(
        "Evaluated %d %s test vectors: %d correct",
        report.total,
        table.modality,
        report.correct,
    )
    return predictions, report, distances