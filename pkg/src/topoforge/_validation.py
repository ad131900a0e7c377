"""Input checks shared by the estimator classes."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .exceptions import ModelError
from .simulator import Waveform


def check_times(X, *, rtol: float = 1e-6) -> np.ndarray:
    """Return the time column of ``X`` as a 1-D float array.

    ``X`` is either a 1-D array of sample times or an ``(n, 1)`` array. The
    times must start at 0 and be uniformly spaced.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, ensure_min_samples=2)
    if X.shape[1] != 1:
        raise ModelError(f"X must hold one column of sample times, got {X.shape[1]} columns")
    t = X[:, 0]
    dt = (t[-1] - t[0]) / (t.size - 1)
    if not dt > 0 or np.abs(np.diff(t) - dt).max() > rtol * dt + 1e-15:
        raise ModelError("sample times must be increasing and uniformly spaced")
    if abs(t[0]) > rtol * dt:
        raise ModelError("sample times must start at t = 0")
    return t


def check_waveform(X, y) -> Waveform:
    """Pair times ``X`` with target values ``y``."""
    t = check_times(X)
    y = np.asarray(y, dtype=float).ravel()
    check_consistent_length(t, y)
    if not np.all(np.isfinite(y)):
        raise ModelError("target values must be finite")
    return Waveform(0.0, float((t[-1] - t[0]) / (t.size - 1)), y)


__all__ = ["check_times", "check_waveform"]
