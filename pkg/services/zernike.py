"""Zernike moment descriptors for preprocessed mouth frames."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from services.media import atomic_write_text
from services.temporal import resample_indices

logger = logging.getLogger(__name__)

DISK_MAPPINGS = ("circumscribed", "inscribed")
DEFAULT_INDICES: tuple[tuple[int, int], ...] = (
    (1, 1), (2, 0), (3, 1), (4, 0), (5, 1), (6, 0), (7, 1), (8, 0), (9, 1),
)
FRAMES_PER_UTTERANCE = 52


@dataclass(frozen=True)
class MomentIndex:
    m: int
    n: int

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError(f"Moment order must be non-negative, got m={self.m}.")
        if abs(self.n) > self.m or (self.m - abs(self.n)) % 2:
            raise ValueError(
                f"Invalid Zernike index (m={self.m}, n={self.n}): need |n| <= m and m - |n| even."
            )


def valid_indices(max_order: int) -> list[MomentIndex]:
    """Every (m, n >= 0) pair up to ``max_order``, ordered by m then n."""
    return [
        MomentIndex(m, n)
        for m in range(max_order + 1)
        for n in range(m % 2, m + 1, 2)
    ]


@lru_cache(maxsize=None)
def _radial_terms(m: int, n: int) -> tuple[tuple[int, int], ...]:
    # (power, integer coefficient); exact integer factorials keep m <= 20 overflow-free
    a = abs(n)
    terms = []
    for s in range((m - a) // 2 + 1):
        coeff = (-1) ** s * math.factorial(m - s) // (
            math.factorial(s)
            * math.factorial((m + a) // 2 - s)
            * math.factorial((m - a) // 2 - s)
        )
        terms.append((m - 2 * s, coeff))
    return tuple(terms)


def radial_polynomial(idx: MomentIndex, r: float | np.ndarray) -> float | np.ndarray:
    rho = np.asarray(r, dtype=np.float64)
    if np.any(rho < 0) or np.any(rho > 1 + 1e-12):
        raise ValueError("Radial polynomial is defined on 0 <= r <= 1.")
    total = np.zeros_like(rho)
    for power, coeff in _radial_terms(idx.m, idx.n):
        total = total + float(coeff) * rho**power
    if total.ndim == 0:
        return float(total)
    return total


@dataclass(frozen=True)
class UnitDiskGrid:
    """Polar coordinates of the pixels kept on the unit disk, in row-major order."""

    width: int
    height: int
    mapping: str
    keep: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    area: float

    @property
    def size(self) -> int:
        return int(self.r.size)


def make_grid(width: int, height: int, mapping: str = "circumscribed") -> UnitDiskGrid:
    """Map pixel centres onto the unit disk around the frame centre.

    ``circumscribed`` scales by the half-diagonal so every pixel is kept;
    ``inscribed`` scales by half the shorter side and drops pixels with r > 1.
    """
    if width < 1 or height < 1:
        raise ValueError("Grid width and height must be at least 1.")
    if mapping not in DISK_MAPPINGS:
        raise ValueError(f"Unknown disk mapping {mapping!r}.")
    if mapping == "circumscribed":
        scale = math.hypot(width / 2.0, height / 2.0)
    else:
        scale = min(width, height) / 2.0
    cols = (np.arange(width) + 0.5 - width / 2.0) / scale
    rows = (height / 2.0 - np.arange(height) - 0.5) / scale
    y, x = np.meshgrid(rows, cols, indexing="ij")
    r = np.hypot(x, y).ravel()
    theta = np.arctan2(y, x).ravel()
    keep = np.flatnonzero(r <= 1.0)
    return UnitDiskGrid(
        width=width,
        height=height,
        mapping=mapping,
        keep=keep,
        r=np.minimum(r[keep], 1.0),
        theta=theta[keep],
        area=1.0 / (scale * scale),
    )


def _pixels_on_grid(frame: np.ndarray, grid: UnitDiskGrid) -> np.ndarray:
    data = np.asarray(frame, dtype=np.float64)
    if data.shape != (grid.height, grid.width):
        raise ValueError(
            f"Frame shape {data.shape} does not match the {grid.height}x{grid.width} grid."
        )
    return data.ravel()[grid.keep]


def basis_field(idx: MomentIndex, grid: UnitDiskGrid) -> np.ndarray:
    """conj(V_mn) sampled on the grid with the (m+1)/pi and pixel-area factors folded in."""
    radial = radial_polynomial(idx, grid.r)
    # V_mn = R_mn(r) e^{-j n theta}; the moment integrates against its conjugate
    weight = (idx.m + 1) / math.pi * grid.area
    return weight * radial * np.exp(1j * idx.n * grid.theta)


def zernike_moment(frame: np.ndarray, idx: MomentIndex, grid: UnitDiskGrid) -> complex:
    pixels = _pixels_on_grid(frame, grid)
    return complex(np.dot(basis_field(idx, grid), pixels))


@dataclass(frozen=True)
class ZernikeConfig:
    indices: tuple[tuple[int, int], ...] = DEFAULT_INDICES
    frames_per_utterance: int = FRAMES_PER_UTTERANCE
    disk_mapping: str = "circumscribed"

    def __post_init__(self) -> None:
        if not self.indices:
            raise ValueError("zernike.indices must list at least one (m, n) pair.")
        for m, n in self.indices:
            MomentIndex(int(m), int(n))
        allowed = set(valid_indices(max(int(m) for m, _ in self.indices)))
        for m, n in self.indices:
            if MomentIndex(int(m), int(n)) not in allowed:
                raise ValueError(
                    f"zernike.indices entry ({m}, {n}) needs a non-negative repetition; "
                    f"its magnitude equals that of ({m}, {-int(n)})."
                )
        if self.frames_per_utterance < 1:
            raise ValueError("zernike.frames_per_utterance must be at least 1.")
        if self.disk_mapping not in DISK_MAPPINGS:
            raise ValueError(f"zernike.disk_mapping must be one of {', '.join(DISK_MAPPINGS)}.")

    @property
    def moment_indices(self) -> tuple[MomentIndex, ...]:
        return tuple(MomentIndex(int(m), int(n)) for m, n in self.indices)

    @property
    def descriptor_len(self) -> int:
        return len(self.indices)

    @property
    def utterance_dim(self) -> int:
        return self.descriptor_len * self.frames_per_utterance


class ZernikeBasis:
    """Precomputed basis fields for one grid and index list; read-only once built."""

    def __init__(self, grid: UnitDiskGrid, indices: Sequence[MomentIndex]):
        self.grid = grid
        self.indices = tuple(indices)
        fields = np.stack([basis_field(idx, grid) for idx in self.indices])
        fields.setflags(write=False)
        self._fields = fields

    def moments(self, frame: np.ndarray) -> np.ndarray:
        return self._fields @ _pixels_on_grid(frame, self.grid)

    def descriptor(self, frame: np.ndarray) -> np.ndarray:
        return np.abs(self.moments(frame))


@lru_cache(maxsize=16)
def basis_for(
    width: int,
    height: int,
    indices: tuple[tuple[int, int], ...],
    mapping: str = "circumscribed",
) -> ZernikeBasis:
    logger.debug("Building %dx%d Zernike basis for %d moments", width, height, len(indices))
    grid = make_grid(width, height, mapping)
    return ZernikeBasis(grid, [MomentIndex(m, n) for m, n in indices])


def _basis_for_frame(frame: np.ndarray, cfg: ZernikeConfig) -> ZernikeBasis:
    height, width = np.shape(frame)
    indices = tuple((int(m), int(n)) for m, n in cfg.indices)
    return basis_for(width, height, indices, cfg.disk_mapping)


def descriptor(frame: np.ndarray, cfg: ZernikeConfig | None = None) -> np.ndarray:
    cfg = cfg or ZernikeConfig()
    return _basis_for_frame(frame, cfg).descriptor(frame)


def descriptors(frames: Iterable[np.ndarray], cfg: ZernikeConfig | None = None) -> np.ndarray:
    """One descriptor row per frame, in frame order."""
    cfg = cfg or ZernikeConfig()
    rows = [descriptor(frame, cfg) for frame in frames]
    if not rows:
        return np.zeros((0, cfg.descriptor_len))
    return np.vstack(rows)


def utterance_vector(frames: Sequence[np.ndarray], cfg: ZernikeConfig | None = None) -> np.ndarray:
    cfg = cfg or ZernikeConfig()
    if len(frames) == 0:
        raise ValueError("An utterance needs at least one frame.")
    picks = resample_indices(len(frames), cfg.frames_per_utterance)
    # descriptors of repeated frames are computed once
    cache: dict[int, np.ndarray] = {}
    parts = []
    for pick in picks:
        key = int(pick)
        if key not in cache:
            cache[key] = descriptor(frames[key], cfg)
        parts.append(cache[key])
    return np.concatenate(parts)


def write_descriptor_csv(path: Path | str, rows: np.ndarray, label: str) -> None:
    table = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    header = ["frame"] + [f"moment_{k + 1}" for k in range(table.shape[1])] + ["label"]
    lines = [",".join(header)]
    for frame_no, row in enumerate(table, start=1):
        lines.append(",".join([str(frame_no), *(repr(float(v)) for v in row), label]))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
