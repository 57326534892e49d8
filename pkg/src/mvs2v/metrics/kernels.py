"""Hot loops of the consistency metrics, numba and numpy variants.

The module-level names (``nn_distances``, ``channel_histogram``) resolve to
the numba kernels unless ``MVS2V_NO_NUMBA`` is set. Both variants are always
importable so tests and the benchmark can compare them directly.
"""
from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit


@njit
def _nn_distances_numba(source, target):
    n = source.shape[0]
    m = target.shape[0]
    d = source.shape[1]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = source[i, k] - target[j, k]
                acc += diff * diff
            if acc < best:
                best = acc
        out[i] = np.sqrt(best)
    return out


def nn_distances_numba(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    return _nn_distances_numba(np.ascontiguousarray(source, dtype=np.float64), np.ascontiguousarray(target, dtype=np.float64))


def nn_distances_numpy(source: np.ndarray, target: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Per-source-point distance to the nearest target point."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    out = np.empty(len(source))
    for lo in range(0, len(source), chunk):
        diff = source[lo:lo + chunk, None, :] - target[None, :, :]
        out[lo:lo + chunk] = np.sqrt((diff * diff).sum(-1).min(axis=1))
    return out


@njit
def _channel_histogram_numba(image, bins):
    H, W, C = image.shape
    hist = np.zeros(C * bins)
    for y in range(H):
        for x in range(W):
            for c in range(C):
                b = int(np.floor(image[y, x, c] * bins))
                if b < 0:
                    b = 0
                elif b >= bins:
                    b = bins - 1
                hist[c * bins + b] += 1.0
    return hist


def channel_histogram_numba(image: np.ndarray, bins: int) -> np.ndarray:
    return _channel_histogram_numba(np.ascontiguousarray(image, dtype=np.float64), bins)


def channel_histogram_numpy(image: np.ndarray, bins: int) -> np.ndarray:
    """Concatenated per-channel counts over ``bins`` equal bins of [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    idx = np.clip(np.floor(image * bins), 0, bins - 1).astype(np.int64)
    C = image.shape[-1]
    flat = (idx + np.arange(C) * bins).reshape(-1)
    return np.bincount(flat, minlength=C * bins).astype(np.float64)


if USE_NUMBA:
    nn_distances = nn_distances_numba
    channel_histogram = channel_histogram_numba
else:
    nn_distances = nn_distances_numpy
    channel_histogram = channel_histogram_numpy
