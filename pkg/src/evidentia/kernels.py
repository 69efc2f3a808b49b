"""Hot numeric kernels: numba fast path with a pure-numpy fallback.

Set ``EVIDENTIA_KERNELS=numpy`` to force the fallback; the numba path is
compiled lazily on first use when the package is importable. Both paths
evaluate the same per-element expressions in the same order, so their
outputs agree bit-for-bit and either backend can serve the test suite.

``benchmarks/kernel_bench.py`` compares the two backends on representative
workloads.
"""

from __future__ import annotations

import os

import numpy as np

_FORCED = os.environ.get("EVIDENTIA_KERNELS", "").strip().lower()

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - mirror environments without numba
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and _FORCED != "numpy"


def _numpy_laplacian(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, 1, mode="edge")
    c = p[1:-1, 1:-1]
    return 4.0 * c - p[:-2, 1:-1] - p[2:, 1:-1] - p[1:-1, :-2] - p[1:-1, 2:]


def _numpy_band_sums(values: np.ndarray, bins: np.ndarray, n_bins: int) -> np.ndarray:
    # bins may carry n_bins as a discard bucket for excluded cells
    return np.bincount(bins, weights=values, minlength=n_bins + 1)[:n_bins]


if USE_NUMBA:

    @njit(cache=True)
    def _nb_laplacian(img):
        h, w = img.shape
        out = np.empty((h, w), dtype=np.float64)
        for i in range(h):
            iu = i - 1 if i > 0 else 0
            idn = i + 1 if i < h - 1 else h - 1
            for j in range(w):
                jl = j - 1 if j > 0 else 0
                jr = j + 1 if j < w - 1 else w - 1
                out[i, j] = (
                    4.0 * img[i, j] - img[iu, j] - img[idn, j] - img[i, jl] - img[i, jr]
                )
        return out

    @njit(cache=True)
    def _nb_band_sums(values, bins, n_bins):
        out = np.zeros(n_bins, dtype=np.float64)
        for k in range(values.shape[0]):
            b = bins[k]
            if 0 <= b < n_bins:
                out[b] += values[k]
        return out


def laplacian_4n(img: np.ndarray) -> np.ndarray:
    """4-neighbor Laplacian, replicate padding, same-size float64 output."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    if USE_NUMBA:
        return _nb_laplacian(img)
    return _numpy_laplacian(img)


def band_sums(values: np.ndarray, bins: np.ndarray, n_bins: int) -> np.ndarray:
    """Sum ``values`` into ``n_bins`` buckets by precomputed bin index.

    Cells assigned index ``n_bins`` are discarded (used for the excluded
    DC/low-frequency region).
    """
    values = np.ascontiguousarray(values, dtype=np.float64).ravel()
    bins = np.ascontiguousarray(bins, dtype=np.int64).ravel()
    if USE_NUMBA:
        return _nb_band_sums(values, bins, n_bins)
    return _numpy_band_sums(values, bins, n_bins)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
