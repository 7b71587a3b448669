"""Synthetic audio-visual corpus: opening/closing red lips plus class-specific tone pairs."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import logging
import math
from pathlib import Path

import numpy as np

from services.dataset import UtteranceRecord, write_manifest
from services.media import write_rgb_png, write_wav
from services.roi import BoundingBox

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
BACKGROUND_RGB = (70.0, 70.0, 70.0)
SKIN_RGB = (140.0, 132.0, 126.0)
LIP_RGB = (170.0, 50.0, 60.0)
MOUTH_RGB = (40.0, 40.0, 40.0)
AMPLITUDE_LEVELS = (0.10, 0.20, 0.30)
TONE_LEVELS_HZ = tuple(np.linspace(300.0, 3400.0, 12).round(1))


@dataclass(frozen=True)
class ClassProfile:
    label: str
    amplitude: float
    omega: float
    tone_hz: tuple[float, float]


@dataclass(frozen=True)
class _UtteranceJob:
    record_id: str
    profile: ClassProfile
    frames_dir: Path
    audio_path: Path
    frame_size: tuple[int, int]
    frames: int
    sample_rate: int
    duration_s: float
    noise_level: float
    seed: int


def class_profiles(n_classes: int, duration_s: float = 2.0) -> list[ClassProfile]:
    """Distinct (aperture amplitude, opening rate) and tone pair per class."""
    profiles = []
    n_levels = len(AMPLITUDE_LEVELS)
    for c in range(n_classes):
        amplitude = AMPLITUDE_LEVELS[c % n_levels]
        openings = c // n_levels + 1
        # an integer number of half-periods keeps every clip closed-open-closed
        omega = math.pi * openings / duration_s
        n_tones = len(TONE_LEVELS_HZ)
        tones = (
            float(TONE_LEVELS_HZ[c % n_tones]),
            float(TONE_LEVELS_HZ[(c + c // n_tones + 5) % n_tones]),
        )
        profiles.append(ClassProfile(f"word{c + 1:02d}", amplitude, omega, tones))
    return profiles


def mouth_box_for(frame_size: tuple[int, int], shift: tuple[int, int] = (0, 0)) -> BoundingBox:
    width, height = frame_size
    box_w = max(8, int(round(width * 0.28)))
    box_h = max(8, int(round(height * 0.28)))
    x0 = min(max(0, (width - box_w) // 2 + shift[0]), width - box_w)
    y0 = min(max(0, int(height * 0.55) - box_h // 2 + shift[1]), height - box_h)
    return BoundingBox(x0, y0, box_w, box_h)


def _ellipse_mask(shape: tuple[int, int], cx: float, cy: float, ax: float, ay: float) -> np.ndarray:
    if ax <= 0 or ay <= 0:
        return np.zeros(shape, dtype=bool)
    ys, xs = np.ogrid[: shape[0], : shape[1]]
    return ((xs + 0.5 - cx) / ax) ** 2 + ((ys + 0.5 - cy) / ay) ** 2 <= 1.0


def render_lip_frame(
    base: np.ndarray,
    box: BoundingBox,
    aperture: float,
) -> np.ndarray:
    """Draw lips into ``box`` on a copy of ``base``; ``aperture`` is a fraction of the box height."""
    frame = base.copy()
    region = frame[box.y0 : box.y0 + box.h, box.x0 : box.x0 + box.w]
    cx, cy = box.w / 2.0, box.h / 2.0
    opening = max(0.0, aperture) * box.h
    outer = _ellipse_mask(region.shape[:2], cx, cy, 0.42 * box.w, 0.16 * box.h + opening)
    inner = _ellipse_mask(region.shape[:2], cx, cy, 0.30 * box.w, opening)
    region[outer] = LIP_RGB
    region[inner] = MOUTH_RGB
    return frame


def aperture_track(profile: ClassProfile, frames: int, duration_s: float, phase: float = 0.0, gain: float = 1.0) -> np.ndarray:
    t = np.arange(frames) * (duration_s / frames)
    return gain * profile.amplitude * np.abs(np.sin(profile.omega * t + phase))


def tone_pair(profile: ClassProfile, sample_rate: int, duration_s: float, gain: float = 0.5) -> np.ndarray:
    n = int(round(sample_rate * duration_s))
    t = np.arange(n) / sample_rate
    half = n // 2
    signal = np.empty(n)
    signal[:half] = np.sin(2.0 * math.pi * profile.tone_hz[0] * t[:half])
    signal[half:] = np.sin(2.0 * math.pi * profile.tone_hz[1] * t[half:])
    return gain * signal


def _write_utterance(job: _UtteranceJob) -> BoundingBox:
    rng = np.random.default_rng(job.seed)
    width, height = job.frame_size
    noise = job.noise_level
    shift = (0, 0)
    phase, gain = 0.0, 1.0
    if noise > 0:
        shift = (
            int(round(rng.uniform(-0.05, 0.05) * noise * width)),
            int(round(rng.uniform(-0.05, 0.05) * noise * height)),
        )
        phase = rng.uniform(-0.3, 0.3) * noise
        gain = 1.0 + rng.uniform(-0.1, 0.1) * noise
    box = mouth_box_for(job.frame_size, shift)

    base = np.empty((height, width, 3))
    base[:] = BACKGROUND_RGB
    face_cx = box.x0 + box.w / 2.0
    face_cy = box.y0 + box.h / 2.0 - 0.25 * height
    base[_ellipse_mask((height, width), face_cx, face_cy, 0.30 * width, 0.45 * height)] = SKIN_RGB

    apertures = aperture_track(job.profile, job.frames, job.duration_s, phase, gain)
    for idx, aperture in enumerate(apertures, start=1):
        frame = render_lip_frame(base, box, float(aperture))
        if noise > 0:
            frame = frame + rng.normal(0.0, 25.0 * noise, frame.shape)
        write_rgb_png(job.frames_dir / f"frame_{idx:04d}.png", frame)

    audio = tone_pair(job.profile, job.sample_rate, job.duration_s, 0.5 * gain)
    if noise > 0:
        audio = audio + rng.normal(0.0, 0.05 * noise, audio.shape)
    write_wav(job.audio_path, audio, job.sample_rate)
    return box


def synth_corpus(
    out_dir: Path | str,
    n_classes: int = 12,
    n_per_class: int = 10,
    seed: int = 0,
    noise_level: float = 0.0,
    *,
    frames: int = 52,
    frame_size: tuple[int, int] = (720, 576),
    sample_rate: int = 16000,
    duration_s: float = 2.0,
    workers: int = 1,
) -> Path:
    if n_classes < 2 or n_per_class < 2:
        raise ValueError("A synthetic corpus needs at least 2 classes and 2 utterances per class.")
    if noise_level < 0:
        raise ValueError("Noise level must be zero or greater.")
    if frames < 1:
        raise ValueError("Each utterance needs at least one frame.")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    seeds = np.random.SeedSequence(seed).spawn(n_classes * n_per_class)
    jobs = []
    for c, profile in enumerate(class_profiles(n_classes, duration_s)):
        for rep in range(n_per_class):
            record_id = f"{profile.label}_{rep + 1:02d}"
            jobs.append(
                _UtteranceJob(
                    record_id=record_id,
                    profile=profile,
                    frames_dir=root / "frames" / record_id,
                    audio_path=root / "audio" / f"{record_id}.wav",
                    frame_size=tuple(frame_size),
                    frames=frames,
                    sample_rate=sample_rate,
                    duration_s=duration_s,
                    noise_level=noise_level,
                    seed=int(seeds[c * n_per_class + rep].generate_state(1)[0]),
                )
            )

    logger.info("Writing %d synthetic utterances to %s", len(jobs), root)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            boxes = list(pool.map(_write_utterance, jobs))
    else:
        boxes = [_write_utterance(job) for job in jobs]

    records = [
        UtteranceRecord(
            id=job.record_id,
            label=job.profile.label,
            frames_dir=job.frames_dir,
            audio_path=job.audio_path,
            mouth_box=box,
            split="auto",
            speaker="synthetic",
        )
        for job, box in zip(jobs, boxes)
    ]
    manifest = root / MANIFEST_NAME
    write_manifest(manifest, records)
    return manifest
