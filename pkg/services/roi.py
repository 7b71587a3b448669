"""Mouth-region preprocessing: RGB frame -> 120x120 binary lip mask."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

ROI_SIZE = 120
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
FEATURE_SOURCES = ("binary", "gray")


@dataclass(frozen=True)
class BoundingBox:
    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError("Bounding box width and height must be at least 1.")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("Bounding box origin must be non-negative.")

    @classmethod
    def full(cls, width: int, height: int) -> "BoundingBox":
        return cls(0, 0, int(width), int(height))

    def fits(self, width: int, height: int) -> bool:
        return self.x0 + self.w <= width and self.y0 + self.h <= height

    def as_list(self) -> list[int]:
        return [self.x0, self.y0, self.w, self.h]


@dataclass(frozen=True)
class RoiConfig:
    filter_radius: int = 1
    feature_source: str = "binary"
    output_size: int = ROI_SIZE

    def __post_init__(self) -> None:
        if self.filter_radius < 0:
            raise ValueError("roi.filter_radius must be zero or greater.")
        if self.feature_source not in FEATURE_SOURCES:
            raise ValueError(f"roi.feature_source must be one of {', '.join(FEATURE_SOURCES)}.")
        if self.output_size < 1:
            raise ValueError("roi.output_size must be at least 1.")


def _check_rgb(frame: np.ndarray) -> np.ndarray:
    rgb = np.asarray(frame, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] < 1 or rgb.shape[1] < 1:
        raise ValueError(f"Expected an HxWx3 RGB frame, got shape {rgb.shape}.")
    return rgb


def to_grayscale(frame: np.ndarray) -> np.ndarray:
    rgb = _check_rgb(frame)
    r, g, b = LUMA_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def lip_emphasis(frame: np.ndarray) -> np.ndarray:
    """|gray - R| per pixel; red-dominant lip pixels light up against skin."""
    rgb = _check_rgb(frame)
    return np.clip(np.abs(to_grayscale(rgb) - rgb[..., 0]), 0.0, 255.0)


def median_filter(frame: np.ndarray, radius: int) -> np.ndarray:
    if radius < 0:
        raise ValueError("Median filter radius must be zero or greater.")
    gray = np.asarray(frame, dtype=np.float64)
    if radius == 0:
        return gray.copy()
    # mode="nearest" replicates the border pixels
    return ndimage.median_filter(gray, size=2 * radius + 1, mode="nearest")


def otsu_threshold(frame: np.ndarray) -> int | None:
    """Otsu threshold over a 256-bin histogram, or None for a single-level frame.

    When several thresholds tie for the maximal between-class variance the middle
    of that plateau is returned, so well-separated modes split halfway.
    """
    levels = _histogram_levels(frame)
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        return None
    prob = hist / hist.sum()
    omega = np.cumsum(prob)
    mu = np.cumsum(prob * np.arange(256))
    mu_total = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_total * omega - mu) ** 2 / denom, 0.0)
    best = sigma_b.max()
    plateau = np.flatnonzero(sigma_b >= best * (1.0 - 1e-12))
    return int(plateau.sum() // plateau.size)


def _histogram_levels(frame: np.ndarray) -> np.ndarray:
    gray = np.asarray(frame, dtype=np.float64)
    if gray.size == 0:
        raise ValueError("Cannot binarize an empty frame.")
    return np.clip(np.floor(gray), 0, 255).astype(np.int64)


def binarize_otsu(frame: np.ndarray) -> np.ndarray:
    threshold = otsu_threshold(frame)
    levels = _histogram_levels(frame)
    if threshold is None:
        return np.zeros(levels.shape, dtype=np.uint8)
    return (levels > threshold).astype(np.uint8)


def crop_resize(
    frame: np.ndarray, box: BoundingBox, size: int = ROI_SIZE, *, binary: bool = False
) -> np.ndarray:
    """Crop ``box`` and resample it bilinearly to ``size`` x ``size``.

    With ``binary`` the result is re-thresholded at 0.5 and returned as uint8 {0,1};
    otherwise it is a float64 gray crop.
    """
    data = np.asarray(frame)
    if data.ndim != 2:
        raise ValueError(f"Expected a single-channel frame, got shape {data.shape}.")
    height, width = data.shape
    if not box.fits(width, height):
        raise ValueError(
            f"Bounding box {box.as_list()} lies outside the {width}x{height} frame."
        )
    crop = data[box.y0 : box.y0 + box.h, box.x0 : box.x0 + box.w].astype(np.float64)
    if box.w == size and box.h == size:
        resized = crop
    else:
        # pixel-centre alignment: output centre i maps to (i + 0.5) * scale - 0.5
        ys = (np.arange(size) + 0.5) * (box.h / size) - 0.5
        xs = (np.arange(size) + 0.5) * (box.w / size) - 0.5
        ys = np.clip(ys, 0.0, box.h - 1)
        xs = np.clip(xs, 0.0, box.w - 1)
        grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
        resized = ndimage.map_coordinates(crop, [grid_y, grid_x], order=1, mode="nearest")
    if binary:
        return (resized >= 0.5).astype(np.uint8)
    return resized


def emphasis_frame(frame: np.ndarray, cfg: RoiConfig) -> np.ndarray:
    return median_filter(lip_emphasis(frame), cfg.filter_radius)


def preprocess_frame(frame: np.ndarray, box: BoundingBox, cfg: RoiConfig) -> np.ndarray:
    mask = binarize_otsu(emphasis_frame(frame, cfg))
    return crop_resize(mask, box, cfg.output_size, binary=True)


def feature_frame(frame: np.ndarray, box: BoundingBox, cfg: RoiConfig) -> np.ndarray:
    """The frame handed to moment extraction: the lip mask, or the gray emphasis crop."""
    if cfg.feature_source == "gray":
        return crop_resize(emphasis_frame(frame, cfg), box, cfg.output_size)
    return preprocess_frame(frame, box, cfg)
