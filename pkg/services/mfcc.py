"""MFCC acoustic front end and fixed-length utterance vectors."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import fft as sp_fft

from services.temporal import resample_rows

logger = logging.getLogger(__name__)

POOLING_MODES = ("concat_fixed", "mean")


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError("Sample rate must be positive.")
        if np.asarray(self.samples).size == 0:
            raise ValueError("Audio signal must not be empty.")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / float(self.sample_rate)


@dataclass(frozen=True)
class MfccConfig:
    pre_emphasis_alpha: float = 0.97
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int | None = None
    n_filters: int = 26
    n_ceps: int = 13
    pooling: str = "concat_fixed"
    frames_fixed: int = 100
    include_c0: bool = False
    log_floor: float = 1e-10

    def __post_init__(self) -> None:
        if not 0.0 <= self.pre_emphasis_alpha < 1.0:
            raise ValueError("mfcc.pre_emphasis_alpha must satisfy 0 <= alpha < 1.")
        if self.frame_len_ms <= 0 or self.hop_ms <= 0:
            raise ValueError("mfcc.frame_len_ms and mfcc.hop_ms must be positive.")
        if self.n_filters < 1:
            raise ValueError("mfcc.n_filters must be at least 1.")
        if not 0 <= self.n_ceps <= self.n_filters:
            raise ValueError("mfcc.n_ceps must be between 0 and mfcc.n_filters.")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"mfcc.pooling must be one of {', '.join(POOLING_MODES)}.")
        if self.frames_fixed < 1:
            raise ValueError("mfcc.frames_fixed must be at least 1.")
        if self.log_floor <= 0:
            raise ValueError("mfcc.log_floor must be positive.")
        if self.fft_size is not None and self.fft_size < 2:
            raise ValueError("mfcc.fft_size must be at least 2.")

    def frame_len(self, sample_rate: int) -> int:
        return max(1, int(round(self.frame_len_ms * sample_rate / 1000.0)))

    def hop(self, sample_rate: int) -> int:
        return max(1, int(round(self.hop_ms * sample_rate / 1000.0)))

    def fft_len(self, sample_rate: int) -> int:
        frame_len = self.frame_len(sample_rate)
        if self.fft_size is not None:
            if self.fft_size < frame_len:
                raise ValueError(
                    f"mfcc.fft_size {self.fft_size} is shorter than the {frame_len}-sample frame."
                )
            return self.fft_size
        return 1 << (frame_len - 1).bit_length()

    @property
    def utterance_dim(self) -> int:
        if self.pooling == "mean":
            return self.n_ceps
        return self.n_ceps * self.frames_fixed


def pre_emphasis(signal: AudioSignal, alpha: float) -> AudioSignal:
    x = np.asarray(signal.samples, dtype=np.float64)
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - alpha * x[:-1]
    return AudioSignal(y, signal.sample_rate)


def frame_blocks(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Frames starting at 0, hop, 2*hop, ...; the tail is zero-padded to ``frame_len``."""
    x = np.asarray(samples, dtype=np.float64)
    if frame_len < 1 or hop < 1:
        raise ValueError("Frame length and hop must be at least 1 sample.")
    if x.size == 0:
        raise ValueError("Cannot frame an empty signal.")
    count = (x.size - 1) // hop + 1
    padded = np.zeros((count - 1) * hop + frame_len)
    padded[: x.size] = x
    starts = np.arange(count) * hop
    return padded[starts[:, None] + np.arange(frame_len)[None, :]]


def hamming(frames: np.ndarray) -> np.ndarray:
    data = np.asarray(frames, dtype=np.float64)
    length = data.shape[-1]
    if length < 2:
        raise ValueError("Hamming window needs at least 2 samples.")
    # numpy.hamming is 0.54 - 0.46 cos(2 pi i / (N - 1))
    return data * np.hamming(length)


def power_spectrum(frames: np.ndarray, fft_size: int) -> np.ndarray:
    data = np.asarray(frames, dtype=np.float64)
    if data.shape[-1] > fft_size:
        raise ValueError(f"Frame length {data.shape[-1]} exceeds FFT size {fft_size}.")
    spectrum = sp_fft.rfft(data, n=fft_size, axis=-1)
    return spectrum.real**2 + spectrum.imag**2


def hz_to_mel(f: float | np.ndarray) -> float | np.ndarray:
    hz = np.asarray(f, dtype=np.float64)
    if np.any(hz < 0):
        raise ValueError("Frequency must be non-negative.")
    mel = 2595.0 * np.log10(1.0 + hz / 700.0)
    return float(mel) if mel.ndim == 0 else mel


def mel_to_hz(mel: float | np.ndarray) -> float | np.ndarray:
    hz = 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)
    return float(hz) if hz.ndim == 0 else hz


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray = field(repr=False)
    edge_mels: np.ndarray = field(repr=False)
    edge_bins: np.ndarray = field(repr=False)
    sample_rate: int
    fft_size: int

    @property
    def center_mels(self) -> np.ndarray:
        return self.edge_mels[1:-1]

    @property
    def center_bins(self) -> np.ndarray:
        return self.edge_bins[1:-1]


def mel_filterbank(cfg: MfccConfig, sample_rate: int) -> MelFilterbank:
    """Triangular filters, peak height 1, centres uniformly spaced on the mel scale.

    Edges are snapped to FFT bins so each filter's centre bin carries weight 1.
    """
    fft_size = cfg.fft_len(sample_rate)
    n_bins = fft_size // 2 + 1
    edge_mels = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), cfg.n_filters + 2)
    edge_bins = np.floor((fft_size + 1) * mel_to_hz(edge_mels) / sample_rate).astype(np.int64)
    edge_bins = np.minimum(edge_bins, n_bins - 1)
    bins = np.arange(n_bins)
    weights = np.zeros((cfg.n_filters, n_bins))
    for j in range(cfg.n_filters):
        lo, mid, hi = edge_bins[j], edge_bins[j + 1], edge_bins[j + 2]
        rise = (bins - lo) / max(mid - lo, 1)
        fall = (hi - bins) / max(hi - mid, 1)
        tri = np.where(bins <= mid, rise, fall)
        tri[(bins < lo) | (bins > hi)] = 0.0
        weights[j] = np.clip(tri, 0.0, 1.0)
        weights[j, mid] = 1.0
    if np.any(np.diff(edge_bins) == 0):
        logger.warning(
            "%d mel filters share FFT bins at %d Hz / %d-point FFT; consider fewer filters",
            cfg.n_filters,
            sample_rate,
            fft_size,
        )
    weights.setflags(write=False)
    return MelFilterbank(weights, edge_mels, edge_bins, sample_rate, fft_size)


def cepstra(log_mel: np.ndarray, n_ceps: int, include_c0: bool = False) -> np.ndarray:
    energies = np.asarray(log_mel, dtype=np.float64)
    n_filters = energies.shape[-1]
    if n_ceps > n_filters:
        raise ValueError(f"n_ceps {n_ceps} exceeds the {n_filters} mel energies.")
    start = 0 if include_c0 else 1
    out = np.zeros(energies.shape[:-1] + (n_ceps,))
    if n_ceps == 0 or n_filters == 0:
        return out
    # unnormalised DCT-II is 2 * sum(x_k cos[n (k - 1/2) pi / K]); the n = K term is 0
    coeffs = 0.5 * sp_fft.dct(energies, type=2, axis=-1)[..., start : start + n_ceps]
    out[..., : coeffs.shape[-1]] = coeffs
    return out


class MfccExtractor:
    """Front end bound to one config; filterbanks are cached per sample rate."""

    def __init__(self, cfg: MfccConfig | None = None):
        self.cfg = cfg or MfccConfig()
        self._banks: dict[int, MelFilterbank] = {}

    def filterbank(self, sample_rate: int) -> MelFilterbank:
        bank = self._banks.get(sample_rate)
        if bank is None:
            bank = mel_filterbank(self.cfg, sample_rate)
            self._banks[sample_rate] = bank
        return bank

    def frame_cepstra(self, signal: AudioSignal) -> np.ndarray:
        cfg = self.cfg
        rate = signal.sample_rate
        frame_len = cfg.frame_len(rate)
        if len(signal.samples) < frame_len:
            raise ValueError(
                f"Signal of {len(signal.samples)} samples is shorter than one "
                f"{frame_len}-sample frame."
            )
        emphasized = pre_emphasis(signal, cfg.pre_emphasis_alpha)
        frames = hamming(frame_blocks(emphasized.samples, frame_len, cfg.hop(rate)))
        bank = self.filterbank(rate)
        energies = power_spectrum(frames, bank.fft_size) @ bank.weights.T
        log_mel = np.log(np.maximum(energies, cfg.log_floor))
        return cepstra(log_mel, cfg.n_ceps, cfg.include_c0)

    def utterance_features(self, signal: AudioSignal) -> np.ndarray:
        ceps = self.frame_cepstra(signal)
        if self.cfg.pooling == "mean":
            return ceps.mean(axis=0)
        return resample_rows(ceps, self.cfg.frames_fixed).ravel()


def utterance_features(signal: AudioSignal, cfg: MfccConfig | None = None) -> np.ndarray:
    return MfccExtractor(cfg).utterance_features(signal)
