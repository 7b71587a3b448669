import logging
from pathlib import Path

import numpy as np
import pytest

from services.feature_io import (
    FeatureTable,
    binary_path_for,
    read_feature_binary,
    read_feature_csv,
    save_feature_table,
    select_rows,
    write_feature_binary,
    write_feature_csv,
)


def _make_table(modality="visual"):
    matrix = np.array([[0.1, 1.0 / 3.0, 2.5e-17], [4.0, -5.5, 6.25]])
    return FeatureTable(("u1", "u2"), ("Pune", "Latur"), matrix, modality)


def test_csv_layout_has_label_last(tmp_path: Path):
    path = tmp_path / "visual.csv"

    write_feature_csv(path, _make_table())
    lines = path.read_text().splitlines()

    assert lines[0] == "id,f0001,f0002,f0003,label"
    assert lines[1].startswith("u1,0.1,0.3333333333333333,")
    assert lines[2].endswith(",Latur")


def test_csv_values_survive_exactly(tmp_path: Path):
    table = _make_table()
    path = tmp_path / "visual.csv"

    write_feature_csv(path, table)
    loaded = read_feature_csv(path, "visual")

    assert loaded.ids == table.ids
    assert loaded.labels == table.labels
    assert np.array_equal(loaded.matrix, table.matrix)


def test_empty_table_writes_header_only(tmp_path: Path):
    path = tmp_path / "audio.csv"

    write_feature_csv(path, FeatureTable.empty("audio", 4))
    loaded = read_feature_csv(path, "audio")

    assert path.read_text() == "id,f0001,f0002,f0003,f0004,label\n"
    assert len(loaded) == 0
    assert loaded.dim == 4


def test_ragged_row_names_the_line(tmp_path: Path):
    path = tmp_path / "visual.csv"
    path.write_text("id,f0001,f0002,label\nu1,1.0,2.0,Pune\nu2,1.0,Pune\n")

    with pytest.raises(ValueError, match="line 3 has 3 fields"):
        read_feature_csv(path)


def test_binary_companion_layout(tmp_path: Path):
    table = _make_table("audio")
    csv_path = tmp_path / "audio.csv"

    companion = save_feature_table(csv_path, table)
    raw = companion.read_bytes()
    magic, matrix = read_feature_binary(companion)

    assert companion == tmp_path / "audio.zaf"
    assert raw[:4] == b"ZAF1"
    assert len(raw) == 12 + 8 * 6
    assert magic == b"ZAF1"
    assert np.array_equal(matrix, table.matrix)


def test_binary_rejects_bad_magic_and_truncation(tmp_path: Path):
    path = tmp_path / "visual.zvf"
    write_feature_binary(path, np.ones((2, 3)), b"ZVF1")
    data = path.read_bytes()

    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="expected 60 bytes"):
        read_feature_binary(path)

    path.write_bytes(b"NOPE" + data[4:])
    with pytest.raises(ValueError, match="unknown feature magic"):
        read_feature_binary(path)


def test_binary_path_for_modalities():
    assert binary_path_for("out/visual.csv", "visual") == Path("out/visual.zvf")
    assert binary_path_for("out/audio.csv", "audio") == Path("out/audio.zaf")


def test_select_rows_follows_requested_order(caplog):
    table = _make_table()

    with caplog.at_level(logging.WARNING):
        picked = select_rows(table, ["u2", "ghost", "u1"])

    assert picked.ids == ("u2", "u1")
    assert np.array_equal(picked.matrix[0], table.matrix[1])
    assert "ghost" in caplog.text


def test_feature_table_rejects_misaligned_rows():
    with pytest.raises(ValueError, match="line up"):
        FeatureTable(("u1",), ("Pune", "Latur"), np.zeros((1, 2)))
