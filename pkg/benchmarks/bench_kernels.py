"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Each pair is also checked for agreement before timing.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from mvs2v._accel import HAVE_NUMBA
from mvs2v.layout import LatentGrid, ReferenceShape, build_ts_layout, rope_frequencies, rotate_pairs_numba, rotate_pairs_numpy
from mvs2v.metrics import kernels


def cases(rng):
    layout = build_ts_layout(LatentGrid(8, 16, 16), ReferenceShape([4, 2]))
    freqs = rope_frequencies(64)
    angles = freqs.angles(layout.positions)
    vecs = rng.standard_normal((len(layout), 64))
    cos, sin = np.cos(angles), np.sin(angles)
    src, dst = rng.random((2048, 3)), rng.random((2048, 3))
    image = rng.random((128, 128, 3))
    return {
        f"rope rotate ({len(layout)} x 64)": (
            lambda: rotate_pairs_numba(vecs, cos, sin), lambda: rotate_pairs_numpy(vecs, cos, sin)),
        "nn distances (2048 x 2048)": (
            lambda: kernels.nn_distances_numba(src, dst), lambda: kernels.nn_distances_numpy(src, dst)),
        "channel histogram (128x128x3, 8 bins)": (
            lambda: kernels.channel_histogram_numba(image, 8), lambda: kernels.channel_histogram_numpy(image, 8)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, (fast, slow) in cases(rng).items():
        np.testing.assert_allclose(fast(), slow(), rtol=1e-10, atol=1e-12)  # also compiles
        t_fast = min(timeit.repeat(fast, number=1, repeat=args.repeat)) * 1e3
        t_slow = min(timeit.repeat(slow, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:40s} {t_fast:10.3f} {t_slow:10.3f} {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
