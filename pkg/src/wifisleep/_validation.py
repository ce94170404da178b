"""Input checks for the estimator interface."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .preprocess import MINUTES_PER_DAY


def check_counts(X, n_slots=None):
    """2-D array of non-negative integer slot counts, one row per device-day.

    A single 1-D series is promoted to one row.
    """
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    X = check_array(X, dtype=None, ensure_min_samples=1, ensure_min_features=2)
    if not np.issubdtype(X.dtype, np.number):
        raise ValueError(f"counts must be numeric, got {X.dtype}")
    if np.any(X < 0):
        raise ValueError("counts must be non-negative")
    if not np.array_equal(X, np.round(X)):
        raise ValueError("counts must be integers")
    if MINUTES_PER_DAY % X.shape[1]:
        raise ValueError(f"{X.shape[1]} slots do not divide a day")
    if n_slots is not None and X.shape[1] != n_slots:
        raise ValueError(f"expected {n_slots} slots per row, got {X.shape[1]}")
    return X.astype(np.int64)


def check_intervals(intervals, n_rows, n_slots):
    """Per-row ``(start, end)`` slot pairs, or ``None`` entries for rows without one."""
    if intervals is None:
        return [None] * n_rows
    intervals = list(intervals)
    if len(intervals) != n_rows:
        raise ValueError(f"{len(intervals)} intervals for {n_rows} rows")
    out = []
    for iv in intervals:
        if iv is None:
            out.append(None)
            continue
        start, end = (int(v) for v in (iv if isinstance(iv, (tuple, list, np.ndarray))
                                       else (iv.start_slot, iv.end_slot)))
        if not 0 <= start < end <= n_slots:
            raise ValueError(f"interval {iv} outside [0, {n_slots}]")
        out.append((start, end))
    return out
