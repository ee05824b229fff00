"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot kernel on representative synthetic workloads, times both
backends, and reports the speedup plus the worst numeric deviation between
them. The numba path is warmed once before timing so compilation cost is
not billed to the measurement.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 20 --frames 32
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from clipsift import _kernels_numpy as knp

try:
    from clipsift import _kernels_numba as knb
except ImportError:
    knb = None


def _time(fn, args, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _deviation(a, b) -> float:
    worst = 0.0
    for x, y in zip(a, b):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if x.size == 0:
            continue
        scale = max(1.0, float(np.max(np.abs(x))))
        worst = max(worst, float(np.max(np.abs(x - y))) / scale)
    return worst


def _workloads(args):
    rng = np.random.default_rng(7)
    h, w = args.height, args.width
    frames = rng.integers(0, 256, size=(args.frames, h, w), dtype=np.uint8)
    rgb = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    quantized = (frames[0].astype(np.int64) * 16) // 256
    prev_f, next_f = frames[0], np.roll(frames[0], 4, axis=1)
    disps = np.array(
        sorted(
            ((dy, dx) for dy in range(-4, 5) for dx in range(-4, 5)),
            key=lambda d: (d[0] * d[0] + d[1] * d[1], d[0], d[1]),
        ),
        dtype=np.int64,
    )
    samples = rng.normal(scale=0.2, size=args.samples)
    n_inst, dim = 64, 16
    x = rng.normal(size=(n_inst, dim))
    sizes = np.full(16, 4, dtype=np.int64)
    bag_start = np.zeros(17, dtype=np.int64)
    bag_start[1:] = np.cumsum(sizes)
    bag_pos = (np.arange(16) % 2).astype(np.uint8)
    t = rng.normal(size=dim)
    s = rng.uniform(0.3, 0.8, size=dim)
    xaug = np.concatenate([x, np.ones((n_inst, 1))], axis=1)
    y = np.where(np.arange(n_inst) % 2 == 0, 1.0, -1.0)

    return [
        ("hsv_hist_counts_rgb", (rgb, 8, 4, 4)),
        ("glcm_counts", (quantized, 16)),
        ("abs_diff_sum", (prev_f, next_f)),
        ("block_match", (prev_f, next_f, 16, disps)),
        ("window_sq_sums", (samples, 200)),
        ("autocorr_ncc", (samples[:4000], 16, 160)),
        ("dd_value_grad", (t, s, x, bag_start, bag_pos, math.log(1e-12))),
        ("svm_dual_cd", (xaug, y, 1.0, -1.0, 40)),
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=10, metavar="N")
    parser.add_argument("--frames", type=int, default=20, metavar="N")
    parser.add_argument("--width", type=int, default=320, metavar="PX")
    parser.add_argument("--height", type=int, default=240, metavar="PX")
    parser.add_argument("--samples", type=int, default=80000, metavar="N")
    args = parser.parse_args()

    if knb is None:
        print("numba backend not importable; nothing to compare")
        return 1

    print(f"{'kernel':<22}{'numpy':>12}{'numba':>12}{'speedup':>10}{'max dev':>12}")
    for name, call_args in _workloads(args):
        fn_np = getattr(knp, name)
        fn_nb = getattr(knb, name)
        out_np = fn_np(*call_args)
        out_nb = fn_nb(*call_args)  # also warms the JIT cache
        if not isinstance(out_np, tuple):
            out_np, out_nb = (out_np,), (out_nb,)
        dev = _deviation(out_np, out_nb)
        t_np = _time(fn_np, call_args, args.repeats)
        t_nb = _time(fn_nb, call_args, args.repeats)
        print(
            f"{name:<22}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms"
            f"{t_np / t_nb:>9.1f}x{dev:>12.2e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
