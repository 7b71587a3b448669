"""Eigenspace model over utterance feature vectors (snapshot PCA)."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
from pathlib import Path
import struct
from typing import Sequence

import numpy as np

from services.media import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"PCA1"
RELATIVE_EIGEN_FLOOR = 1e-10


@dataclass(frozen=True)
class TrainingMatrix:
    columns: np.ndarray = field(repr=False)
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.ndim != 2:
            raise ValueError("Training matrix must be two-dimensional (D x N).")
        if cols.shape[1] < 2:
            raise ValueError(f"Training needs at least 2 vectors, got {cols.shape[1]}.")
        if len(self.labels) != cols.shape[1]:
            raise ValueError("Every training column needs exactly one label.")
        if any(not str(label).strip() for label in self.labels):
            raise ValueError("Training labels must be non-empty strings.")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "labels", tuple(str(label) for label in self.labels))

    @classmethod
    def from_rows(cls, rows: np.ndarray, labels: Sequence[str]) -> "TrainingMatrix":
        return cls(np.asarray(rows, dtype=np.float64).T, tuple(labels))

    @property
    def dim(self) -> int:
        return int(self.columns.shape[0])

    @property
    def count(self) -> int:
        return int(self.columns.shape[1])


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    train_projections: np.ndarray = field(repr=False)
    labels: tuple[str, ...]

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def n_train(self) -> int:
        return len(self.labels)

    @property
    def n_components(self) -> int:
        return int(self.eigenvalues.shape[0])


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each eigenvector is made positive
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def fit(training: TrainingMatrix, components: int | str = "all") -> PcaModel:
    """Mean, centred data, eigenpairs of A A' via the N x N Gram matrix, projections."""
    T = training.columns
    n = training.count
    if isinstance(components, str):
        if components != "all":
            raise ValueError(f"Component count must be an integer or 'all', got {components!r}.")
        requested = None
    else:
        requested = int(components)
        if not 0 <= requested <= n - 1:
            raise ValueError(f"Component count {requested} must be between 0 and {n - 1}.")

    mean = T.mean(axis=1)
    A = T - mean[:, None]
    gram = A.T @ A
    values, vectors = np.linalg.eigh(gram)
    order = np.argsort(values, kind="stable")[::-1]
    values = values[order]
    vectors = vectors[:, order]

    lam_max = float(values[0]) if values.size else 0.0
    if lam_max <= 0.0:
        available = 0
    else:
        available = int(np.count_nonzero(values > RELATIVE_EIGEN_FLOOR * lam_max))
    available = min(available, n - 1)
    k = available if requested is None else min(requested, available)
    if requested is not None and requested > available:
        if available == 0 and requested >= 1:
            raise ValueError("Training vectors are degenerate: no non-zero principal component exists.")
        logger.warning("Requested %d components but only %d are non-zero; keeping %d", requested, available, k)
    if available == 0:
        logger.warning("Training vectors span no variance; the model keeps 0 components")
    elif k == 0:
        logger.warning("0 components requested; matching falls back to the distance to the mean")

    values = values[:k]
    eig = A @ vectors[:, :k]
    norms = np.linalg.norm(eig, axis=0)
    eig = _fix_signs(eig / norms) if k else np.zeros((training.dim, 0))
    projections = eig.T @ A
    return PcaModel(
        mean=mean,
        eigenvalues=values.copy(),
        eigenvectors=eig,
        train_projections=projections,
        labels=training.labels,
    )


def project(x: np.ndarray, model: PcaModel) -> np.ndarray:
    """E'(x - m) for one D-vector, or column-wise for a D x M matrix."""
    data = np.asarray(x, dtype=np.float64)
    if data.shape[0] != model.dim:
        raise ValueError(f"Vector dimension {data.shape[0]} does not match model dimension {model.dim}.")
    centred = data - (model.mean if data.ndim == 1 else model.mean[:, None])
    return model.eigenvectors.T @ centred


def reconstruct(coefficients: np.ndarray, model: PcaModel) -> np.ndarray:
    coeffs = np.asarray(coefficients, dtype=np.float64)
    if coeffs.shape[0] != model.n_components:
        raise ValueError("Coefficient count does not match the model's component count.")
    base = model.eigenvectors @ coeffs
    return base + (model.mean if coeffs.ndim == 1 else model.mean[:, None])


def _f64(array: np.ndarray) -> bytes:
    return np.asarray(array, dtype="<f8").tobytes(order="F")


def save_model(path: Path | str, model: PcaModel) -> None:
    parts = [
        MODEL_MAGIC,
        struct.pack("<III", model.dim, model.n_train, model.n_components),
        _f64(model.mean),
        _f64(model.eigenvalues),
        _f64(model.eigenvectors),
        _f64(model.train_projections),
    ]
    for label in model.labels:
        encoded = label.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
    atomic_write_bytes(path, b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ValueError(f"{self.path}: model file is truncated.")
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def floats(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = np.frombuffer(self.take(8 * count), dtype="<f8")
        return raw.reshape(shape, order="F").astype(np.float64)


def load_model(path: Path | str) -> PcaModel:
    source = Path(path)
    reader = _Reader(source.read_bytes(), source)
    if reader.take(4) != MODEL_MAGIC:
        raise ValueError(f"{source}: not a PCA1 model file.")
    dim, n_train, k = struct.unpack("<III", reader.take(12))
    mean = reader.floats((dim,))
    eigenvalues = reader.floats((k,))
    eigenvectors = reader.floats((dim, k))
    projections = reader.floats((k, n_train))
    labels = []
    for _ in range(n_train):
        (size,) = struct.unpack("<I", reader.take(4))
        labels.append(reader.take(size).decode("utf-8"))
    if reader.pos != len(reader.data):
        raise ValueError(f"{source}: trailing bytes after the model payload.")
    return PcaModel(mean, eigenvalues, eigenvectors, projections, tuple(labels))


def write_eigenvalues_csv(path: Path | str, model: PcaModel) -> None:
    total = float(model.eigenvalues.sum()) if model.n_components else 0.0
    lines = ["component,eigenvalue,explained_ratio"]
    for idx, value in enumerate(model.eigenvalues, start=1):
        ratio = float(value) / total if total > 0 else 0.0
        lines.append(f"{idx},{float(value)!r},{ratio!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
