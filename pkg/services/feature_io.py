"""Utterance feature tables: CSV (id, values, label last) and the ZVF1/ZAF1 binary layout."""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
from io import StringIO
import logging
from pathlib import Path
import struct
from typing import Sequence

import numpy as np

from services.media import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

MODALITIES = ("visual", "audio")
BINARY_MAGICS = {"visual": b"ZVF1", "audio": b"ZAF1"}
BINARY_SUFFIXES = {"visual": ".zvf", "audio": ".zaf"}


@dataclass(frozen=True)
class FeatureTable:
    ids: tuple[str, ...]
    labels: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)
    modality: str = "visual"

    def __post_init__(self) -> None:
        if self.modality not in MODALITIES:
            raise ValueError(f"Modality must be one of {', '.join(MODALITIES)}.")
        if len(self.ids) != len(self.labels) or len(self.ids) != self.matrix.shape[0]:
            raise ValueError("Feature ids, labels and rows must line up.")

    @classmethod
    def empty(cls, modality: str, dim: int = 0) -> "FeatureTable":
        return cls((), (), np.zeros((0, dim)), modality)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1]) if self.matrix.ndim == 2 else 0

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, utterance_id: str) -> np.ndarray:
        return self.matrix[self.ids.index(utterance_id)]


def write_feature_csv(path: Path | str, table: FeatureTable) -> None:
    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["id", *(f"f{k + 1:04d}" for k in range(table.dim)), "label"])
    for utt_id, label, row in zip(table.ids, table.labels, table.matrix):
        writer.writerow([utt_id, *(repr(float(v)) for v in row), label])
    atomic_write_text(path, buffer.getvalue())


def read_feature_csv(path: Path | str, modality: str = "visual") -> FeatureTable:
    source = Path(path)
    with source.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ValueError(f"{source}: feature file has no header row.")
    header = rows[0]
    if len(header) < 2 or header[0] != "id" or header[-1] != "label":
        raise ValueError(f"{source}: header must start with 'id' and end with 'label'.")
    dim = len(header) - 2
    ids: list[str] = []
    labels: list[str] = []
    values: list[list[float]] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{source}: line {line_no} has {len(row)} fields, expected {len(header)}.")
        try:
            values.append([float(v) for v in row[1:-1]])
        except ValueError as exc:
            raise ValueError(f"{source}: line {line_no} holds a non-numeric feature.") from exc
        ids.append(row[0])
        labels.append(row[-1])
    matrix = np.asarray(values, dtype=np.float64).reshape(len(values), dim)
    return FeatureTable(tuple(ids), tuple(labels), matrix, modality)


def write_feature_binary(path: Path | str, matrix: np.ndarray, magic: bytes) -> None:
    data = np.atleast_2d(np.asarray(matrix, dtype="<f8"))
    if len(magic) != 4:
        raise ValueError("Binary feature magic must be 4 bytes.")
    rows, dim = (0, 0) if data.size == 0 else data.shape
    header = magic + struct.pack("<II", rows, dim)
    atomic_write_bytes(path, header + data.tobytes(order="C"))


def read_feature_binary(path: Path | str) -> tuple[bytes, np.ndarray]:
    source = Path(path)
    raw = source.read_bytes()
    if len(raw) < 12:
        raise ValueError(f"{source}: binary feature header is truncated.")
    magic = raw[:4]
    if magic not in BINARY_MAGICS.values():
        raise ValueError(f"{source}: unknown feature magic {magic!r}.")
    rows, dim = struct.unpack("<II", raw[4:12])
    expected = 12 + 8 * rows * dim
    if len(raw) != expected:
        raise ValueError(f"{source}: expected {expected} bytes, found {len(raw)}.")
    matrix = np.frombuffer(raw[12:], dtype="<f8").reshape(rows, dim).astype(np.float64)
    return magic, matrix


def binary_path_for(csv_path: Path | str, modality: str) -> Path:
    return Path(csv_path).with_suffix(BINARY_SUFFIXES[modality])


def save_feature_table(path: Path | str, table: FeatureTable) -> Path:
    """CSV at ``path`` plus the binary companion; returns the binary path."""
    write_feature_csv(path, table)
    companion = binary_path_for(path, table.modality)
    write_feature_binary(companion, table.matrix, BINARY_MAGICS[table.modality])
    return companion


def select_rows(table: FeatureTable, ids: Sequence[str]) -> FeatureTable:
    positions = {utt_id: pos for pos, utt_id in enumerate(table.ids)}
    missing = [utt_id for utt_id in ids if utt_id not in positions]
    if missing:
        logger.warning("%d ids have no feature row (first: %s)", len(missing), missing[0])
    keep = [positions[utt_id] for utt_id in ids if utt_id in positions]
    return FeatureTable(
        tuple(table.ids[pos] for pos in keep),
        tuple(table.labels[pos] for pos in keep),
        table.matrix[keep].reshape(len(keep), table.dim),
        table.modality,
    )
