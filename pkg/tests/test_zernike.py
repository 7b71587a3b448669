import math
from pathlib import Path

import numpy as np
import pytest

from services.zernike import (
    MomentIndex,
    ZernikeConfig,
    basis_for,
    descriptor,
    descriptors,
    make_grid,
    radial_polynomial,
    utterance_vector,
    valid_indices,
    write_descriptor_csv,
    zernike_moment,
)


def _naive_radial(m, n, r):
    a = abs(n)
    total = 0.0
    for s in range((m - a) // 2 + 1):
        num = (-1) ** s * math.factorial(m - s)
        den = math.factorial(s) * math.factorial((m + a) // 2 - s) * math.factorial((m - a) // 2 - s)
        total += num / den * r ** (m - 2 * s)
    return total


def _naive_basis(m, n, size):
    # half-diagonal mapping written out pixel by pixel
    half = size / 2.0
    scale = math.hypot(half, half)
    values = {}
    for row in range(size):
        for col in range(size):
            x = (col + 0.5 - half) / scale
            y = (half - row - 0.5) / scale
            r = math.hypot(x, y)
            theta = math.atan2(y, x)
            values[(row, col)] = _naive_radial(m, n, r) * complex(math.cos(n * theta), math.sin(n * theta))
    return values, 1.0 / (scale * scale)


def _make_notched_disk(size=120):
    ys, xs = np.mgrid[:size, :size]
    cy = cx = size / 2.0
    disk = (xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2 <= (0.4 * size) ** 2
    notch = (xs >= cx) & (np.abs(ys + 0.5 - cy) < 0.08 * size)
    return (disk & ~notch).astype(np.uint8)


def test_radial_polynomial_is_one_at_unit_radius():
    for idx in valid_indices(12):
        assert radial_polynomial(idx, 1.0) == pytest.approx(1.0, abs=1e-9)


def test_radial_polynomial_matches_closed_forms():
    r = np.linspace(0.0, 1.0, 11)

    assert np.allclose(radial_polynomial(MomentIndex(2, 0), r), 2 * r**2 - 1)
    assert np.allclose(radial_polynomial(MomentIndex(4, 2), r), 4 * r**4 - 3 * r**2)
    assert np.allclose(radial_polynomial(MomentIndex(3, 1), r), 3 * r**3 - 2 * r)


def test_radial_polynomial_rejects_radius_outside_disk():
    with pytest.raises(ValueError, match="0 <= r <= 1"):
        radial_polynomial(MomentIndex(2, 0), 1.5)


def test_moment_index_validation():
    with pytest.raises(ValueError, match="Invalid Zernike index"):
        MomentIndex(3, 0)
    with pytest.raises(ValueError, match="Invalid Zernike index"):
        MomentIndex(2, 4)


def test_valid_indices_counts_every_pair():
    indices = valid_indices(9)

    assert len(indices) == 30
    assert indices[0] == MomentIndex(0, 0)
    assert MomentIndex(9, 9) in indices


def test_moments_match_naive_double_sum():
    rng = np.random.default_rng(7)
    size = 16
    grid = make_grid(size, size)
    naive = {
        (idx.m, idx.n): _naive_basis(idx.m, idx.n, size)
        for idx in valid_indices(9)
    }
    for _ in range(50):
        image = rng.uniform(0.0, 255.0, (size, size))
        for idx in valid_indices(9):
            values, area = naive[(idx.m, idx.n)]
            expected = 0j
            for (row, col), v in values.items():
                expected += image[row, col] * v
            expected *= (idx.m + 1) / math.pi * area
            got = zernike_moment(image, idx, grid)
            assert abs(got - expected) <= 1e-9 * max(1.0, abs(expected))


def test_z00_of_full_disk_is_one_on_inscribed_grid():
    ones = np.ones((120, 120))
    grid = make_grid(120, 120, "inscribed")

    assert zernike_moment(ones, MomentIndex(0, 0), grid) == pytest.approx(1.0, abs=0.01)
    # V20 is orthogonal to the constant V00
    assert abs(zernike_moment(ones, MomentIndex(2, 0), grid)) < 0.01


def test_circumscribed_grid_keeps_every_pixel():
    grid = make_grid(12, 8)

    assert grid.size == 96
    assert grid.r.max() <= 1.0
    assert make_grid(12, 12, "inscribed").size < 144


def test_descriptor_is_rotation_invariant():
    mask = _make_notched_disk()

    before = descriptor(mask)
    after = descriptor(np.rot90(mask))

    assert np.allclose(after, before, rtol=0.02, atol=1e-12)


def test_descriptor_has_nine_nonnegative_values():
    mask = _make_notched_disk()

    values = descriptor(mask)

    assert values.shape == (9,)
    assert np.all(values >= 0)
    assert np.all(np.isfinite(values))


def test_basis_is_shared_and_read_only():
    indices = ((1, 1), (2, 0))
    basis = basis_for(20, 20, indices)

    assert basis_for(20, 20, indices) is basis
    with pytest.raises(ValueError):
        basis._fields[0, 0] = 0


def test_utterance_vector_has_468_values_for_52_frames():
    frames = [_make_notched_disk(32) for _ in range(52)]

    vector = utterance_vector(frames)

    assert vector.shape == (468,)


def test_utterance_vector_stretches_short_sequences():
    frames = [np.rot90(_make_notched_disk(32), k) * (k + 1) for k in range(26)]

    vector = utterance_vector(frames)

    assert vector.shape == (468,)
    assert np.array_equal(vector[0:9], vector[9:18])
    assert not np.array_equal(vector[0:9], vector[18:27])


def test_utterance_vector_rejects_empty_sequence():
    with pytest.raises(ValueError, match="at least one frame"):
        utterance_vector([])


def test_zernike_config_validates_indices_and_mapping():
    with pytest.raises(ValueError, match="Invalid Zernike index"):
        ZernikeConfig(indices=((2, 1),))
    with pytest.raises(ValueError, match="non-negative repetition"):
        ZernikeConfig(indices=((3, -1),))
    with pytest.raises(ValueError, match="disk_mapping"):
        ZernikeConfig(disk_mapping="square")
    assert ZernikeConfig().utterance_dim == 468


def test_write_descriptor_csv_has_one_row_per_frame(tmp_path: Path):
    rows = descriptors([_make_notched_disk(24), _make_notched_disk(24)])
    path = tmp_path / "word01_01.csv"

    write_descriptor_csv(path, rows, "word01")
    lines = path.read_text().splitlines()

    assert lines[0] == "frame," + ",".join(f"moment_{k}" for k in range(1, 10)) + ",label"
    assert len(lines) == 3
    assert lines[1].startswith("1,") and lines[2].endswith(",word01")
