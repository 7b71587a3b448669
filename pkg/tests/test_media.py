from pathlib import Path

import numpy as np
import pytest
from PIL import Image
from scipy.io import wavfile

from services.media import (
    MediaError,
    atomic_write_text,
    list_frame_files,
    read_frame_sequence,
    read_rgb_frame,
    read_wav,
    write_mask_pgm,
    write_rgb_png,
    write_wav,
)


def test_list_frame_files_sorts_numerically(tmp_path: Path):
    for name in ["frame_10.png", "frame_2.png", "frame_1.pgm", "notes.txt"]:
        (tmp_path / name).write_bytes(b"")

    names = [p.name for p in list_frame_files(tmp_path)]

    assert names == ["frame_1.pgm", "frame_2.png", "frame_10.png"]


def test_missing_frame_directory_raises(tmp_path: Path):
    with pytest.raises(MediaError, match="does not exist"):
        list_frame_files(tmp_path / "nope")


def test_empty_frame_directory_raises(tmp_path: Path):
    with pytest.raises(MediaError, match="no PNG/PGM/PPM frames"):
        read_frame_sequence(tmp_path)


def test_png_round_trip(tmp_path: Path):
    frame = np.zeros((4, 6, 3))
    frame[1, 2] = (200.0, 50.0, 60.0)
    path = tmp_path / "frame_0001.png"

    write_rgb_png(path, frame)
    loaded = read_rgb_frame(path)

    assert loaded.shape == (4, 6, 3)
    assert loaded.dtype == np.float64
    assert np.array_equal(loaded, frame)


def test_gray_frames_are_replicated_to_rgb(tmp_path: Path):
    path = tmp_path / "frame_0001.pgm"
    Image.fromarray(np.full((3, 5), 90, dtype=np.uint8)).save(path)

    loaded = read_rgb_frame(path)

    assert loaded.shape == (3, 5, 3)
    assert np.all(loaded == 90.0)


def test_unreadable_image_raises_media_error(tmp_path: Path):
    path = tmp_path / "frame_0001.png"
    path.write_bytes(b"not an image")

    with pytest.raises(MediaError, match="cannot read image"):
        read_rgb_frame(path)


def test_mask_pgm_is_binary_p5(tmp_path: Path):
    path = tmp_path / "mask_0001.pgm"

    write_mask_pgm(path, np.array([[0, 1], [1, 0]], dtype=np.uint8))

    assert path.read_bytes().startswith(b"P5")
    with Image.open(path) as img:
        assert np.array_equal(np.asarray(img), [[0, 255], [255, 0]])


def test_wav_round_trip_is_pcm16(tmp_path: Path):
    samples = np.array([0.0, 0.5, -0.5, 0.999])
    path = tmp_path / "a.wav"

    write_wav(path, samples, 8000)
    rate, raw = wavfile.read(path)
    signal = read_wav(path)

    assert rate == 8000
    assert raw.dtype == np.int16
    assert signal.sample_rate == 8000
    assert np.allclose(signal.samples, samples, atol=1.0 / 32768)


def test_stereo_wav_is_averaged(tmp_path: Path):
    path = tmp_path / "stereo.wav"
    wavfile.write(path, 8000, np.array([[16384, 0], [0, -16384]], dtype=np.int16))

    signal = read_wav(path)

    assert signal.samples == pytest.approx([0.25, -0.25])


def test_float_wav_is_rejected(tmp_path: Path):
    path = tmp_path / "float.wav"
    wavfile.write(path, 8000, np.zeros(10, dtype=np.float32))

    with pytest.raises(MediaError, match="16-bit PCM"):
        read_wav(path)


def test_atomic_write_leaves_no_temp_files(tmp_path: Path):
    target = tmp_path / "out" / "report.txt"

    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")

    assert target.read_text() == "second\n"
    assert [p.name for p in target.parent.iterdir()] == ["report.txt"]
