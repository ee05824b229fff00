"""Backend selection for the numeric kernels.

Two interchangeable implementations exist: numba-jitted loops
(:mod:`clipsift._kernels_numba`) and vectorized numpy
(:mod:`clipsift._kernels_numpy`). The numba backend is used when importable
unless the environment variable ``CLIPSIFT_DISABLE_NUMBA`` is set to a truthy
value, in which case the numpy fallback is selected.

Cross-backend guarantees:

* video kernels (histograms, co-occurrence counts, frame differencing,
  block matching) accumulate integers and agree exactly;
* audio kernels (windowed energy, normalized autocorrelation) and the
  noisy-OR objective reduce in float and may differ by a few ulps between
  backends (relative differences around 1e-12); within one backend results
  are deterministic run to run.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_numpy

_FALSY = {"", "0", "false", "no", "off"}


def numba_disabled_by_env() -> bool:
    return os.environ.get("CLIPSIFT_DISABLE_NUMBA", "").strip().lower() not in _FALSY


if numba_disabled_by_env():
    _impl = _kernels_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl  # noqa: F401

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        _impl = _kernels_numpy
        BACKEND = "numpy"

hsv_hist_counts_rgb = _impl.hsv_hist_counts_rgb
hsv_hist_counts_gray = _impl.hsv_hist_counts_gray
glcm_counts = _impl.glcm_counts
abs_diff_sum = _impl.abs_diff_sum
block_match = _impl.block_match
window_sq_sums = _impl.window_sq_sums
autocorr_ncc = _impl.autocorr_ncc
dd_value_grad = _impl.dd_value_grad
svm_dual_cd = _impl.svm_dual_cd


def backend_name() -> str:
    return BACKEND


def search_displacements(radius: int) -> np.ndarray:
    """All integer displacements within the square search window, ordered by
    squared magnitude with (dy, dx) lexicographic tie-break. (0, 0) is first,
    so a strict-improvement scan resolves SAD ties toward the smallest
    displacement."""
    pairs = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
    ]
    pairs.sort(key=lambda p: (p[0] * p[0] + p[1] * p[1], p[0], p[1]))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)
