"""Frame and audio file ingestion plus atomic output writes."""
from __future__ import annotations

from io import BytesIO
import logging
import os
from pathlib import Path
import re
import tempfile

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.io import wavfile

from services.mfcc import AudioSignal

logger = logging.getLogger(__name__)

FRAME_SUFFIXES = {".png", ".pgm", ".ppm"}
PCM16_SCALE = 32768.0
_DIGITS = re.compile(r"(\d+)")


class MediaError(ValueError):
    def __init__(self, path: Path | str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = Path(path)


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _frame_sort_key(path: Path) -> tuple[int, str]:
    match = _DIGITS.findall(path.stem)
    return (int(match[-1]) if match else -1, path.name)


def list_frame_files(frames_dir: Path | str) -> list[Path]:
    folder = Path(frames_dir)
    if not folder.is_dir():
        raise MediaError(folder, "frame directory does not exist.")
    files = [p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES]
    return sorted(files, key=_frame_sort_key)


def read_rgb_frame(path: Path | str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise MediaError(path, f"cannot read image ({exc}).") from exc
    return rgb


def read_frame_sequence(frames_dir: Path | str) -> list[np.ndarray]:
    files = list_frame_files(frames_dir)
    if not files:
        raise MediaError(frames_dir, "no PNG/PGM/PPM frames found.")
    return [read_rgb_frame(p) for p in files]


def _image_bytes(img: Image.Image, fmt: str, **params) -> bytes:
    buffer = BytesIO()
    img.save(buffer, format=fmt, **params)
    return buffer.getvalue()


def write_rgb_png(path: Path | str, frame: np.ndarray) -> None:
    data = np.clip(np.rint(np.asarray(frame)), 0, 255).astype(np.uint8)
    img = Image.fromarray(data)
    atomic_write_bytes(path, _image_bytes(img, "PNG", compress_level=1))


def write_mask_pgm(path: Path | str, mask: np.ndarray) -> None:
    data = (np.asarray(mask) > 0).astype(np.uint8) * 255
    img = Image.fromarray(data)
    # Pillow writes mode "L" through its PPM plugin as binary P5
    atomic_write_bytes(path, _image_bytes(img, "PPM"))


def read_wav(path: Path | str) -> AudioSignal:
    try:
        sample_rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as exc:
        raise MediaError(path, f"cannot read WAV ({exc}).") from exc
    if data.dtype != np.int16:
        raise MediaError(path, f"expected 16-bit PCM samples, found {data.dtype}.")
    samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise MediaError(path, "WAV file holds no samples.")
    return AudioSignal(samples / PCM16_SCALE, int(sample_rate))


def write_wav(path: Path | str, samples: np.ndarray, sample_rate: int) -> None:
    pcm = np.clip(np.rint(np.asarray(samples, dtype=np.float64) * PCM16_SCALE), -32768, 32767)
    buffer = BytesIO()
    wavfile.write(buffer, int(sample_rate), pcm.astype(np.int16))
    atomic_write_bytes(path, buffer.getvalue())
