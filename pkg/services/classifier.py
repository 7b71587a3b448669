"""Nearest-neighbour matching in eigenspace and recognition reports."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from services.media import atomic_write_text
from services.pca import PcaModel, project

logger = logging.getLogger(__name__)

METHOD_NAMES = {
    "visual": "Visual speech recognition (Zernike + PCA)",
    "audio": "Acoustic speech recognition (MFCC)",
}


@dataclass(frozen=True)
class Prediction:
    predicted_label: str
    nearest_index: int
    distance: float


def euclidean(a: np.ndarray, b: np.ndarray) -> float:
    u = np.asarray(a, dtype=np.float64)
    v = np.asarray(b, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"Cannot compare vectors of shapes {u.shape} and {v.shape}.")
    diff = u - v
    return float(np.sqrt(np.sum(diff * diff)))


def _column_distances(test_proj: np.ndarray, model: PcaModel) -> np.ndarray:
    x = np.asarray(test_proj, dtype=np.float64)
    if x.shape != (model.n_components,):
        raise ValueError(
            f"Projection has shape {x.shape}; the model expects {model.n_components} components."
        )
    diff = model.train_projections - x[:, None]
    return np.sqrt(np.sum(diff * diff, axis=0))


def nearest(test_proj: np.ndarray, model: PcaModel) -> Prediction:
    """Closest training column; ties go to the lowest training index."""
    if model.n_train == 0:
        raise ValueError("The model holds no training vectors.")
    distances = _column_distances(test_proj, model)
    # argmin returns the first occurrence of the minimum
    best = int(np.argmin(distances))
    return Prediction(model.labels[best], best, float(distances[best]))


def classify(x: np.ndarray, model: PcaModel) -> Prediction:
    """Project a raw feature vector and match it.

    A model without components falls back to the raw distance to the mean, shared
    by every training vector, so the first training label wins.
    """
    if model.n_components == 0:
        if model.n_train == 0:
            raise ValueError("The model holds no training vectors.")
        raw = np.asarray(x, dtype=np.float64)
        if raw.shape != model.mean.shape:
            raise ValueError(
                f"Vector dimension {raw.shape[0]} does not match model dimension {model.dim}."
            )
        return Prediction(model.labels[0], 0, euclidean(raw, model.mean))
    return nearest(project(x, model), model)


def distance_matrix(test_projections: np.ndarray, model: PcaModel) -> np.ndarray:
    """Test x train Euclidean distances; test projections are the columns of a k x M array."""
    tests = np.asarray(test_projections, dtype=np.float64)
    if tests.ndim != 2 or tests.shape[0] != model.n_components:
        raise ValueError("Test projections must be a k x M array matching the model.")
    diff = tests.T[:, :, None] - model.train_projections[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass(frozen=True)
class EvaluationReport:
    classes: tuple[str, ...]
    counts: np.ndarray = field(repr=False)

    @property
    def recognized(self) -> np.ndarray:
        return np.diag(self.counts).copy()

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def missed(self) -> np.ndarray:
        return self.row_totals - self.recognized

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def per_class_accuracy(self) -> np.ndarray:
        totals = self.row_totals
        acc = np.zeros(len(self.classes))
        nonzero = totals > 0
        acc[nonzero] = self.recognized[nonzero] / totals[nonzero]
        return acc

    @property
    def overall_accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


def evaluate(
    predictions: Sequence[Prediction],
    truths: Sequence[str],
    classes: Sequence[str],
) -> EvaluationReport:
    if len(predictions) != len(truths):
        raise ValueError("Predictions and ground-truth labels must have the same length.")
    order = {label: pos for pos, label in enumerate(classes)}
    counts = np.zeros((len(order), len(order)), dtype=np.int64)
    for pred, truth in zip(predictions, truths):
        for label in (truth, pred.predicted_label):
            if label not in order:
                raise ValueError(f"Unknown class label {label!r}.")
        counts[order[truth], order[pred.predicted_label]] += 1
    return EvaluationReport(tuple(classes), counts)


def percent_text(correct: int, total: int) -> str:
    """Percentage truncated to two decimals: 23/36 -> '63.88%', 36/36 -> '100%'."""
    if total <= 0:
        return "0%"
    hundredths = (int(correct) * 10000) // int(total)
    whole, frac = divmod(hundredths, 100)
    if frac == 0:
        return f"{whole}%"
    return f"{whole}.{frac:02d}%"


def _table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(row[col]) for row in rows) for col in range(len(rows[0]))]
    return [
        " | ".join(cell.ljust(w) if col == 1 else cell.rjust(w) for col, (cell, w) in enumerate(zip(row, widths)))
        for row in rows
    ]


def render_confusion_table(report: EvaluationReport, title: str = "") -> str:
    """ASCII confusion matrix: tested count, class, predicted counts, Recognized / Missed / Accuracy."""
    classes = list(report.classes)
    rows = [
        ["Tested", "Utterance", *classes, "Recognized", "Missed", "Accuracy"],
        ["", "", *(str(pos) for pos in range(1, len(classes) + 1)), "", "", ""],
    ]
    for idx, label in enumerate(classes):
        tested = int(report.row_totals[idx])
        recognized = int(report.recognized[idx])
        rows.append(
            [
                str(tested),
                label,
                *(str(int(v)) for v in report.counts[idx]),
                str(recognized),
                str(tested - recognized),
                percent_text(recognized, tested),
            ]
        )
    body = _table(rows)
    rule = "-" * len(body[0])
    lines = [title] if title else []
    lines += [body[0], body[1], rule, *body[2:], rule]
    lines.append(f"Total: recognized {report.correct}, missed {report.total - report.correct}")
    lines.append(f"Final Result: {percent_text(report.correct, report.total)}")
    return "\n".join(lines) + "\n"


def write_confusion_csv(path: Path | str, report: EvaluationReport) -> None:
    lines = [",".join(["true\\predicted", *report.classes])]
    for label, row in zip(report.classes, report.counts):
        lines.append(",".join([label, *(str(int(v)) for v in row)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_metrics_csv(path: Path | str, report: EvaluationReport) -> None:
    lines = ["class,tested,recognized,missed,accuracy"]
    for idx, label in enumerate(report.classes):
        lines.append(
            f"{label},{int(report.row_totals[idx])},{int(report.recognized[idx])},"
            f"{int(report.missed[idx])},{float(report.per_class_accuracy[idx])!r}"
        )
    lines.append(
        f"overall,{report.total},{report.correct},{report.total - report.correct},"
        f"{float(report.overall_accuracy)!r}"
    )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_distance_csv(
    path: Path | str,
    distances: np.ndarray,
    test_ids: Sequence[str],
    train_labels: Sequence[str],
) -> None:
    lines = [",".join(["test_id", *train_labels])]
    for test_id, row in zip(test_ids, distances):
        lines.append(",".join([test_id, *(repr(float(v)) for v in row)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def summary_line(modality: str, report: EvaluationReport) -> str:
    return (
        f"{modality}: overall accuracy {percent_text(report.correct, report.total)} "
        f"({report.correct}/{report.total})"
    )


def render_performance_summary(results: dict[str, tuple[int, int]]) -> str:
    """Method | Result table over modalities; values are (correct, total)."""
    labels = [METHOD_NAMES.get(modality, modality) for modality in results]
    width = max([len("Method")] + [len(label) for label in labels])
    lines = [f"{'Method'.ljust(width)} | Result", "-" * (width + 9)]
    for label, (correct, total) in zip(labels, results.values()):
        lines.append(f"{label.ljust(width)} | {percent_text(correct, total)}")
    return "\n".join(lines) + "\n"
