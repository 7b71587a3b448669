from dataclasses import replace
import logging
import os
from pathlib import Path

import numpy as np
import pytest

from services.dataset import UtteranceRecord, class_labels, load_manifest, split
from services.pipeline import (
    audio_features,
    evaluate_model,
    extract_features,
    resolve_workers,
    train_model,
    visual_features,
)
from services.pipeline_config import PipelineConfig
from services.roi import BoundingBox, RoiConfig, feature_frame
from services.synth import synth_corpus
from services.zernike import descriptor


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    manifest = synth_corpus(
        root,
        n_classes=3,
        n_per_class=3,
        seed=2,
        frames=8,
        frame_size=(96, 80),
        sample_rate=8000,
        duration_s=0.5,
    )
    return load_manifest(manifest)


def test_visual_features_have_default_dimension(corpus):
    vector = visual_features(corpus[0], PipelineConfig())

    assert vector.shape == (468,)
    assert np.all(vector >= 0)


def test_visual_features_dump_masks(corpus, tmp_path: Path):
    visual_features(corpus[0], PipelineConfig(), mask_dir=tmp_path)

    masks = sorted((tmp_path / corpus[0].id).iterdir())
    assert len(masks) == 8
    assert masks[0].name == "mask_0001.pgm"
    assert masks[0].read_bytes().startswith(b"P5")


def test_visual_features_reject_box_outside_frames(corpus):
    record = replace(corpus[0], mouth_box=BoundingBox(90, 70, 20, 20))

    with pytest.raises(ValueError, match="lies outside the 96x80 frames"):
        visual_features(record, PipelineConfig())


def test_audio_features_have_default_dimension(corpus):
    assert audio_features(corpus[0], PipelineConfig()).shape == (1300,)


def test_extract_features_keeps_manifest_order(corpus):
    result = extract_features(corpus, PipelineConfig(), "audio")

    assert result.ok
    assert result.table.ids == tuple(r.id for r in corpus)
    assert result.table.matrix.shape == (9, 1300)


def test_parallel_extraction_matches_sequential(corpus):
    sequential = extract_features(corpus, PipelineConfig(), "visual", workers=1)
    parallel = extract_features(corpus, PipelineConfig(), "visual", workers=2)

    assert parallel.table.ids == sequential.table.ids
    assert np.array_equal(parallel.table.matrix, sequential.table.matrix)


def test_extract_features_skips_and_reports(corpus, tmp_path: Path):
    audio_only = UtteranceRecord(id="mute", label="word01", audio_path=corpus[0].audio_path)
    broken = UtteranceRecord(id="broken", label="word01", frames_dir=tmp_path / "missing")

    result = extract_features([corpus[0], audio_only, broken], PipelineConfig(), "visual")

    assert result.table.ids == (corpus[0].id,)
    assert result.skipped == ("mute",)
    assert set(result.errors) == {"broken"}
    assert not result.ok


def test_extract_features_empty_manifest():
    result = extract_features([], PipelineConfig(), "visual")

    assert len(result.table) == 0
    assert result.table.dim == 468


@pytest.mark.parametrize("modality", ["visual", "audio"])
def test_train_and_evaluate_noise_free_corpus(corpus, modality):
    cfg = PipelineConfig()
    table = extract_features(corpus, cfg, modality).table
    train, test = split(corpus, cfg.split)

    model = train_model(table, [r.id for r in train])
    predictions, report, distances = evaluate_model(
        model, table, [r.id for r in test], class_labels(corpus)
    )

    assert model.n_train == 6
    assert report.total == 3
    assert report.correct == 3
    assert distances.shape == (3, 6)
    assert all(p.distance == pytest.approx(0.0, abs=1e-6) for p in predictions)


def test_evaluate_model_rejects_dimension_mismatch(corpus):
    cfg = PipelineConfig()
    audio = extract_features(corpus, cfg, "audio").table
    visual = extract_features(corpus[:3], cfg, "visual").table
    model = train_model(audio, list(audio.ids))

    with pytest.raises(ValueError, match="does not match model dimension 1300"):
        evaluate_model(model, visual, list(visual.ids))


def test_train_model_needs_two_rows(corpus):
    table = extract_features(corpus[:1], PipelineConfig(), "audio").table

    with pytest.raises(ValueError, match="at least 2 feature rows"):
        train_model(table, list(table.ids))


def _make_lip_scene(cx, cy, scale, size=(320, 240)):
    """Red lip ellipse on gray with a mouth box that tracks it."""
    width, height = size
    frame = np.empty((height, width, 3))
    frame[:] = (70.0, 70.0, 70.0)
    ys, xs = np.ogrid[:height, :width]
    a, b = 20.0 * scale, 10.0 * scale
    lips = ((xs + 0.5 - cx) / a) ** 2 + ((ys + 0.5 - cy) / b) ** 2 <= 1.0
    frame[lips] = (170.0, 50.0, 60.0)
    box = BoundingBox(cx - 25 * scale, cy - 15 * scale, 50 * scale, 30 * scale)
    return frame, box


@pytest.mark.parametrize(
    "moved",
    [(130, 110, 2), (190, 135, 2), (160, 120, 3)],
    ids=["translated", "translated-again", "scaled"],
)
def test_lip_descriptor_follows_the_mouth_box(moved):
    roi = RoiConfig()
    frame, box = _make_lip_scene(160, 120, 2)
    reference = descriptor(feature_frame(frame, box, roi))
    frame, box = _make_lip_scene(*moved)

    shifted = descriptor(feature_frame(frame, box, roi))

    assert np.abs(shifted - reference).max() / np.abs(reference).max() < 0.05


def test_default_config_uses_every_cpu():
    assert resolve_workers(PipelineConfig().workers) == (os.cpu_count() or 1)
    assert resolve_workers(3) == 3


def test_visual_features_write_per_frame_descriptors(corpus, tmp_path: Path):
    visual_features(corpus[0], PipelineConfig(), descriptor_dir=tmp_path)

    lines = (tmp_path / f"{corpus[0].id}.csv").read_text().splitlines()
    assert lines[0].startswith("frame,moment_1,")
    assert len(lines) == 1 + 8
    assert lines[1].endswith(f",{corpus[0].label}")


def test_train_model_logs_reconstruction_error(corpus, caplog):
    table = extract_features(corpus, PipelineConfig(), "audio").table

    with caplog.at_level(logging.INFO, logger="services.pipeline"):
        train_model(table, list(table.ids))

    assert "reconstruction error" in caplog.text
