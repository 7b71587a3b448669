from __future__ import annotations

import numpy as np


def resample_indices(n_in: int, n_out: int) -> np.ndarray:
    """Nearest-index mapping from ``n_out`` output slots onto ``n_in`` inputs.

    Order-preserving; identity when the lengths match.
    """
    if n_in < 1 or n_out < 1:
        raise ValueError("Sequence lengths must be at least 1.")
    idx = np.floor((np.arange(n_out) + 0.5) * n_in / n_out).astype(np.int64)
    return np.minimum(idx, n_in - 1)


def resample_rows(matrix: np.ndarray, n_out: int) -> np.ndarray:
    rows = np.asarray(matrix)
    if rows.ndim < 1 or rows.shape[0] == 0:
        raise ValueError("Cannot resample an empty sequence.")
    return rows[resample_indices(rows.shape[0], n_out)]
