import json
import logging
from pathlib import Path

import pytest

from services.pipeline_config import (
    PcaConfig,
    PipelineConfig,
    config_to_dict,
    load_pipeline_config,
    save_pipeline_config,
    with_overrides,
)


def test_load_pipeline_config_defaults_without_file():
    cfg = load_pipeline_config(None)

    assert cfg == PipelineConfig()
    assert cfg.zernike.utterance_dim == 468
    assert cfg.mfcc.utterance_dim == 1300
    assert cfg.split.train_fraction == 0.70
    assert cfg.workers == 0


def test_load_pipeline_config_rejects_invalid_file(tmp_path: Path):
    path = tmp_path / "pipeline_config.json"
    path.write_text("not-json")

    with pytest.raises(ValueError, match="not valid JSON"):
        load_pipeline_config(path)


def test_load_pipeline_config_merges_sections(tmp_path: Path):
    path = tmp_path / "pipeline_config.json"
    raw = {
        "roi": {"filter_radius": 2, "feature_source": "gray"},
        "zernike": {"indices": [[2, 0], [4, 2]], "disk_mapping": "inscribed"},
        "mfcc": {"n_ceps": 12, "frame_len_ms": 20},
        "pca": {"components": 5},
        "workers": 3,
    }
    path.write_text(json.dumps(raw))

    cfg = load_pipeline_config(path)

    assert cfg.roi.filter_radius == 2
    assert cfg.roi.feature_source == "gray"
    assert cfg.zernike.indices == ((2, 0), (4, 2))
    assert cfg.zernike.utterance_dim == 104
    assert cfg.mfcc.frame_len_ms == 20.0
    assert cfg.mfcc.n_filters == 26
    assert cfg.pca.components == 5
    assert cfg.workers == 3


def test_unknown_keys_are_ignored_with_warning(tmp_path: Path, caplog):
    path = tmp_path / "pipeline_config.json"
    path.write_text(json.dumps({"roi": {"blur": 3}, "colour": {}}))

    with caplog.at_level(logging.WARNING):
        cfg = load_pipeline_config(path)

    assert cfg.roi == PipelineConfig().roi
    assert "roi.blur" in caplog.text
    assert "colour" in caplog.text


def test_wrong_types_and_invariants_name_the_key(tmp_path: Path):
    path = tmp_path / "pipeline_config.json"

    path.write_text(json.dumps({"mfcc": {"n_filters": "many"}}))
    with pytest.raises(ValueError, match="mfcc.n_filters must be an integer"):
        load_pipeline_config(path)

    path.write_text(json.dumps({"split": {"train_fraction": 1.5}}))
    with pytest.raises(ValueError, match="split.train_fraction"):
        load_pipeline_config(path)

    path.write_text(json.dumps({"pca": {"components": "most"}}))
    with pytest.raises(ValueError, match="pca.components"):
        load_pipeline_config(path)


def test_save_and_reload_pipeline_config(tmp_path: Path):
    path = tmp_path / "pipeline_config.json"
    cfg = with_overrides(PipelineConfig(), seed=9, components=4, workers=2)

    save_pipeline_config(path, cfg)
    saved = json.loads(path.read_text())

    assert saved["split"]["seed"] == 9
    assert saved["pca"] == {"components": 4}
    assert saved["zernike"]["indices"][0] == [1, 1]
    assert load_pipeline_config(path) == cfg
    assert config_to_dict(load_pipeline_config(path)) == saved


def test_with_overrides_leaves_unset_values():
    cfg = with_overrides(PipelineConfig(), seed=None, components=None, workers=None)

    assert cfg == PipelineConfig()
    assert with_overrides(cfg, components="all").pca == PcaConfig("all")


def test_pca_config_rejects_negative_components():
    with pytest.raises(ValueError, match="non-negative"):
        PcaConfig(-1)
