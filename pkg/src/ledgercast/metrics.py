from __future__ import annotations

import numpy as np


def variance_scale(train_values: np.ndarray) -> float | None:
    """Factor bringing a training series to variance 100, or None if it is flat."""
    x = np.asarray(train_values, dtype=float)
    if len(x) < 2:
        return None
    sd = float(x.std(ddof=1))
    if not np.isfinite(sd) or sd <= 1e-12 * max(1.0, float(np.abs(x).max())):
        return None
    return 10.0 / sd


def mae(truth: np.ndarray, pred: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(truth, dtype=float) - np.asarray(pred, dtype=float))))
