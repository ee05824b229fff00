"""Kernel-level tests: independent oracles plus cross-backend agreement.

Every numeric kernel is checked against a slow reference written a different
way (colorsys for HSV, dict counting for co-occurrence, a per-tile python
scan for block matching, direct lag loops for autocorrelation, Decimal
arithmetic for log(1-exp), central differences for the noisy-OR gradient).
When the numba backend imports, its results are compared with the numpy
fallback: integer kernels must match exactly, float kernels to tight
tolerance.
"""

from __future__ import annotations

import colorsys
import math
import os
import subprocess
import sys
from decimal import Decimal, localcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clipsift import _kernels_numpy as knp
from clipsift import kernels

try:
    from clipsift import _kernels_numba as knb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba-less environments
    knb = None
    HAVE_NUMBA = False

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend not importable")


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _random_gray(rng, h=24, w=32):
    return rng.integers(0, 256, size=(h, w), dtype=np.int64).astype(np.uint8)


def _random_rgb(rng, h=24, w=32):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.int64).astype(np.uint8)


# ---------------------------------------------------------------------------
# HSV binning


def _hsv_bins_oracle(rgb, h_bins, s_bins, v_bins):
    """[DERIVED] per-pixel bin via colorsys; -1 where a value sits on an
    interior bin edge, where either side is defensible under float rounding."""
    out = np.full(rgb.shape[:2], -1, dtype=np.int64)
    for yy in range(rgb.shape[0]):
        for xx in range(rgb.shape[1]):
            r, g, b = (int(c) for c in rgb[yy, xx])
            h, s, v = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
            fracs = (h * h_bins, s * s_bins, v * v_bins)
            limits = (h_bins, s_bins, v_bins)
            on_edge = any(
                abs(f - round(f)) < 1e-7 and 0 < round(f) < lim
                for f, lim in zip(fracs, limits)
            )
            if on_edge:
                continue
            hb = min(int(math.floor(fracs[0])), h_bins - 1)
            sb = min(int(math.floor(fracs[1])), s_bins - 1)
            vb = min(int(math.floor(fracs[2])), v_bins - 1)
            out[yy, xx] = (hb * s_bins + sb) * v_bins + vb
    return out


def test_hsv_bins_match_colorsys():
    rng = _rng(11)
    rgb = _random_rgb(rng)
    got = knp.hsv_bin_indices_rgb(rgb, 8, 4, 4)
    want = _hsv_bins_oracle(rgb, 8, 4, 4)
    testable = want >= 0
    assert testable.mean() > 0.9
    assert np.array_equal(got[testable], want[testable])


def test_hsv_bins_primary_and_achromatic_pixels():
    # [DERIVED] by hand from the hexcone model with 8/4/4 bins:
    # pure red h=0, pure green h=120 -> bin 2, pure blue h=240 -> bin 5;
    # saturated+bright pixels land in s bin 3, v bin 3.
    px = np.array(
        [[[255, 0, 0], [0, 255, 0], [0, 0, 255], [0, 0, 0], [255, 255, 255]]],
        dtype=np.uint8,
    )
    idx = knp.hsv_bin_indices_rgb(px, 8, 4, 4)
    assert idx[0, 0] == (0 * 4 + 3) * 4 + 3
    assert idx[0, 1] == (2 * 4 + 3) * 4 + 3
    assert idx[0, 2] == (5 * 4 + 3) * 4 + 3
    assert idx[0, 3] == 0  # black: h=s=v=0
    assert idx[0, 4] == 3  # white: h=s=0, v bin 3


def test_hsv_hist_counts_sum_to_pixel_count():
    rng = _rng(3)
    rgb = _random_rgb(rng, 17, 19)
    counts = knp.hsv_hist_counts_rgb(rgb, 8, 4, 4)
    assert counts.dtype == np.int64
    assert counts.shape == (128,)
    assert counts.sum() == 17 * 19
    gray = _random_gray(rng, 17, 19)
    gcounts = knp.hsv_hist_counts_gray(gray, 8, 4, 4)
    assert gcounts.sum() == 17 * 19
    # gray pixels are achromatic: everything outside the first v_bins slots is 0
    assert gcounts[4:].sum() == 0


def test_hsv_gray_agrees_with_rgb_of_equal_channels():
    rng = _rng(4)
    gray = _random_gray(rng, 12, 13)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    assert np.array_equal(
        knp.hsv_hist_counts_gray(gray, 8, 4, 4),
        knp.hsv_hist_counts_rgb(rgb, 8, 4, 4),
    )


# ---------------------------------------------------------------------------
# Co-occurrence counts


def _glcm_oracle(q, levels):
    """[DERIVED] dict-count reference over right and down offsets, symmetrized."""
    counts: dict[tuple[int, int], int] = {}

    def add(a, b):
        counts[(a, b)] = counts.get((a, b), 0) + 1
        counts[(b, a)] = counts.get((b, a), 0) + 1

    h, w = q.shape
    for yy in range(h):
        for xx in range(w):
            if xx + 1 < w:
                add(int(q[yy, xx]), int(q[yy, xx + 1]))
            if yy + 1 < h:
                add(int(q[yy, xx]), int(q[yy + 1, xx]))
    out = np.zeros((levels, levels), dtype=np.int64)
    for (a, b), n in counts.items():
        out[a, b] = n
    return out


def test_glcm_matches_dict_oracle():
    rng = _rng(5)
    q = (rng.integers(0, 16, size=(14, 11))).astype(np.uint8)
    got = knp.glcm_counts(q, 16)
    assert got.dtype == np.int64
    assert np.array_equal(got, _glcm_oracle(q, 16))


def test_glcm_frozen_two_by_two():
    # [DERIVED] worked by hand: rows [0,15],[0,15]; horizontal pairs (0,15)x2,
    # vertical pairs (0,0) and (15,15); symmetrization doubles each.
    q = np.array([[0, 15], [0, 15]], dtype=np.uint8)
    c = knp.glcm_counts(q, 16)
    assert c.sum() == 8
    assert c[0, 15] == 2 and c[15, 0] == 2
    assert c[0, 0] == 2 and c[15, 15] == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9), st.integers(2, 9))
def test_glcm_symmetric_with_correct_total(seed, h, w):
    rng = _rng(seed)
    q = rng.integers(0, 8, size=(h, w)).astype(np.uint8)
    c = knp.glcm_counts(q, 8)
    assert np.array_equal(c, c.T)
    assert c.sum() == 2 * (h * (w - 1) + (h - 1) * w)


def test_glcm_single_row_and_column():
    row = np.array([[1, 2, 3]], dtype=np.uint8)
    assert knp.glcm_counts(row, 4).sum() == 4  # 2 horizontal pairs, doubled
    col = row.T.copy()
    assert knp.glcm_counts(col, 4).sum() == 4


# ---------------------------------------------------------------------------
# Frame differencing and block matching


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_abs_diff_sum_matches_python_ints(seed):
    rng = _rng(seed)
    a = _random_gray(rng, 6, 7)
    b = _random_gray(rng, 6, 7)
    want = sum(abs(int(x) - int(y)) for x, y in zip(a.ravel(), b.ravel()))
    assert knp.abs_diff_sum(a, b) == want


def _block_match_oracle(f1, f2, bs, disps):
    """[DERIVED] per-tile scan in disps order, keeping the first strict
    improvement, displacement applied only when the shifted block stays in
    frame."""
    h, w = f1.shape
    n_ty, n_tx = h // bs, w // bs
    a = f1.astype(np.int64)
    r = f2.astype(np.int64)
    dy_o = np.zeros((n_ty, n_tx), dtype=np.int64)
    dx_o = np.zeros((n_ty, n_tx), dtype=np.int64)
    sad_o = np.zeros((n_ty, n_tx), dtype=np.int64)
    zero_o = np.zeros((n_ty, n_tx), dtype=np.int64)
    for ty in range(n_ty):
        for tx in range(n_tx):
            y0, x0 = ty * bs, tx * bs
            block = a[y0 : y0 + bs, x0 : x0 + bs]
            best = None
            for dy, dx in disps:
                dy, dx = int(dy), int(dx)
                yy, xx = y0 + dy, x0 + dx
                if yy < 0 or xx < 0 or yy + bs > h or xx + bs > w:
                    continue
                sad = int(np.abs(block - r[yy : yy + bs, xx : xx + bs]).sum())
                if dy == 0 and dx == 0:
                    zero_o[ty, tx] = sad
                if best is None or sad < best[0]:
                    best = (sad, dy, dx)
            sad_o[ty, tx], dy_o[ty, tx], dx_o[ty, tx] = best
    return dy_o, dx_o, sad_o, zero_o


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_block_match_matches_naive_scan(seed):
    rng = _rng(seed)
    f1 = _random_gray(rng, 20, 28)
    f2 = _random_gray(rng, 20, 28)
    disps = kernels.search_displacements(3)
    got = knp.block_match(f1, f2, 4, disps)
    want = _block_match_oracle(f1, f2, 4, disps)
    for g, w in zip(got, want):
        assert np.array_equal(g, w)


def test_block_match_recovers_planted_shift():
    rng = _rng(9)
    f1 = _random_gray(rng, 32, 48)
    f2 = np.roll(f1, 4, axis=1)  # f2[y, x+4] == f1[y, x] away from the wrap
    disps = kernels.search_displacements(5)
    best_dy, best_dx, best_sad, zero_sad = knp.block_match(f1, f2, 8, disps)
    interior = best_sad[:, :-1]  # last tile column can see the wrapped seam
    assert np.all(interior == 0)
    assert np.all(best_dy[:, :-1] == 0)
    assert np.all(best_dx[:, :-1] == 4)
    # random content almost surely moved, so staying put costs something
    assert zero_sad[:, :-1].min() > 0


def test_block_match_identical_frames_prefer_zero_displacement():
    rng = _rng(10)
    f = _random_gray(rng, 16, 16)
    disps = kernels.search_displacements(2)
    best_dy, best_dx, best_sad, zero_sad = knp.block_match(f, f, 4, disps)
    assert np.all(best_sad == 0)
    # (0,0) comes first in disps and ties never displace it
    assert np.all(best_dy == 0) and np.all(best_dx == 0)
    assert np.array_equal(zero_sad, best_sad)


def test_block_match_frame_smaller_than_block():
    f = np.zeros((3, 3), dtype=np.uint8)
    out = knp.block_match(f, f, 4, kernels.search_displacements(1))
    assert all(a.shape == (0, 0) for a in out)


# ---------------------------------------------------------------------------
# Windowed energy and autocorrelation


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 9))
def test_window_sq_sums_matches_loop(seed, n, win):
    x = _rng(seed).normal(size=n)
    got = knp.window_sq_sums(x, win)
    n_win = n // win
    assert got.shape == (n_win,)
    for i in range(n_win):
        want = sum(float(v) * float(v) for v in x[i * win : (i + 1) * win])
        assert got[i] == pytest.approx(want, rel=1e-12)


def _autocorr_oracle(x, lag_min, lag_max):
    """[DERIVED] direct per-lag normalized correlation."""
    n = len(x)
    lag_max = min(lag_max, n - 1)
    vals = []
    for lag in range(lag_min, lag_max + 1):
        head, tail = x[: n - lag], x[lag:]
        num = float(np.dot(head, tail))
        den = math.sqrt(float(np.dot(head, head)) * float(np.dot(tail, tail)))
        vals.append(num / den if den > 0 else 0.0)
    return np.array(vals)


def test_autocorr_matches_direct_loops():
    rng = _rng(6)
    x = rng.normal(size=400)
    got = knp.autocorr_ncc(x, 20, 110)
    want = _autocorr_oracle(x, 20, 110)
    assert got.shape == want.shape
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


def test_autocorr_tracks_the_phase_of_a_sine():
    # [DERIVED] for a long pure sine, ncc(lag) ~ cos(2 pi lag / period);
    # every period multiple peaks at ~1, so values are the oracle, not argmax
    sr = 8000
    t = np.arange(2000) / sr
    x = np.sin(2 * math.pi * 200.0 * t)
    lag_min = 20
    ncc = knp.autocorr_ncc(x, lag_min, 400)
    assert ncc[40 - lag_min] > 0.999  # one period, 8000 / 200
    assert ncc[40 - lag_min] >= ncc.max() - 1e-9
    assert ncc[60 - lag_min] == pytest.approx(-1.0, abs=0.01)  # 1.5 periods
    assert ncc[50 - lag_min] == pytest.approx(0.0, abs=0.01)  # 1.25 periods


def test_autocorr_degenerate_inputs():
    assert knp.autocorr_ncc(np.zeros(50), 60, 80).shape == (0,)
    flat = knp.autocorr_ncc(np.zeros(50), 5, 10)
    assert np.array_equal(flat, np.zeros(6))  # zero energy -> 0 by convention


# ---------------------------------------------------------------------------
# log(1 - exp(a))


def _log1mexp_ref(a: float) -> float:
    """[DERIVED] Decimal evaluation of log(1 - exp(a)), precision scaled so
    the 1 - exp(a) cancellation keeps 60 significant digits."""
    if a == 0.0:
        return -math.inf
    with localcontext() as ctx:
        ctx.prec = 60 + max(0, -int(math.floor(math.log10(abs(a)))))
        return float((1 - Decimal(a).exp()).ln())


@pytest.mark.parametrize(
    "a",
    [-1e-300, -1e-15, -1e-8, -1e-3, -0.1, -0.5, -math.log(2.0), -0.9, -2.0, -10.0, -30.0, -700.0],
)
def test_log1mexp_matches_decimal(a):
    want = _log1mexp_ref(a)
    got = knp._log1mexp_scalar(a)
    assert got == pytest.approx(want, rel=1e-13, abs=1e-300)
    vec = knp._log1mexp(np.array([a]))
    assert vec[0] == got


def test_log1mexp_at_zero_is_minus_infinity():
    assert knp._log1mexp_scalar(0.0) == -math.inf
    assert knp._log1mexp(np.array([0.0]))[0] == -math.inf


# ---------------------------------------------------------------------------
# Noisy-OR objective


def _dd_problem(seed, n_bags=4, dim=3):
    rng = _rng(seed)
    sizes = rng.integers(1, 4, size=n_bags)
    x = rng.normal(size=(int(sizes.sum()), dim))
    bag_start = np.zeros(n_bags + 1, dtype=np.int64)
    bag_start[1:] = np.cumsum(sizes)
    bag_pos = (np.arange(n_bags) % 2).astype(np.uint8)
    t = rng.normal(scale=0.5, size=dim)
    s = rng.uniform(0.3, 0.8, size=dim)
    return t, s, np.ascontiguousarray(x), bag_start, bag_pos


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_dd_gradient_matches_central_differences(seed):
    t, s, x, bag_start, bag_pos = _dd_problem(seed)
    log_eps = math.log(1e-12)
    val, grad = knp.dd_value_grad(t, s, x, bag_start, bag_pos, log_eps)
    assert math.isfinite(val)
    theta = np.concatenate([t, s])
    dim = t.shape[0]
    for i in range(theta.shape[0]):
        h = 1e-6 * max(1.0, abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        vu, _ = knp.dd_value_grad(up[:dim], up[dim:], x, bag_start, bag_pos, log_eps)
        vd, _ = knp.dd_value_grad(dn[:dim], dn[dim:], x, bag_start, bag_pos, log_eps)
        fd = (vu - vd) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_dd_clamped_bags_contribute_floor_and_no_gradient():
    # a concept point absurdly far away drives every bag probability to the
    # clamp, which by contract freezes the objective and zeroes the gradient
    x = _rng(7).normal(size=(5, 3))
    bag_start = np.array([0, 2, 5], dtype=np.int64)
    bag_pos = np.array([1, 1], dtype=np.uint8)
    log_eps = math.log(1e-12)
    t = np.full(3, 1e6)
    s = np.full(3, 1.0)
    val, grad = knp.dd_value_grad(t, s, x, bag_start, bag_pos, log_eps)
    assert val == pytest.approx(2 * log_eps)
    assert np.array_equal(grad, np.zeros(6))


def test_dd_value_is_log_of_noisy_or_product():
    # [DERIVED] recompute the clamped likelihood directly in probability space
    t, s, x, bag_start, bag_pos = _dd_problem(8)
    eps = 1e-12
    val, _ = knp.dd_value_grad(t, s, x, bag_start, bag_pos, math.log(eps))
    q = np.exp(-(((x - t) ** 2) @ (s * s)))
    want = 0.0
    for i in range(bag_pos.shape[0]):
        lo, hi = bag_start[i], bag_start[i + 1]
        p_bag = 1.0 - np.prod(1.0 - q[lo:hi])
        if not bag_pos[i]:
            p_bag = 1.0 - p_bag
        want += math.log(min(max(p_bag, eps), 1 - eps))
    assert val == pytest.approx(want, rel=1e-9)


# ---------------------------------------------------------------------------
# SVM dual coordinate descent


def _svm_problem(seed, n=14, d=3):
    rng = _rng(seed)
    x = rng.normal(size=(n, d))
    w_true = rng.normal(size=d)
    y = np.where(x @ w_true + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    if not (np.any(y > 0) and np.any(y < 0)):
        y[0] = -y[0]
    xaug = np.ascontiguousarray(np.concatenate([x, np.ones((n, 1))], axis=1))
    return xaug, y


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_svm_dual_trace_monotone_and_kkt_at_exit(seed):
    xaug, y = _svm_problem(seed)
    c = 1.0 / (0.05 * xaug.shape[0])
    w, alpha, trace, sweeps = knp.svm_dual_cd(xaug, y, c, 1e-8, 5000)
    assert sweeps < 5000
    assert np.all(np.diff(trace) <= 1e-12)  # dual objective never worsens
    assert np.all(alpha >= 0.0) and np.all(alpha <= c + 1e-15)
    # KKT of the box-constrained dual at the reported solution
    for i in range(xaug.shape[0]):
        g = y[i] * float(w @ xaug[i]) - 1.0
        if alpha[i] <= 1e-12:
            assert g >= -1e-4
        elif alpha[i] >= c - 1e-12:
            assert g <= 1e-4
        else:
            assert abs(g) <= 1e-4


def test_svm_w_is_alpha_weighted_sum():
    xaug, y = _svm_problem(5)
    c = 1.0 / (0.1 * xaug.shape[0])
    w, alpha, _, _ = knp.svm_dual_cd(xaug, y, c, 1e-10, 5000)
    np.testing.assert_allclose(w, (alpha * y) @ xaug, rtol=1e-9, atol=1e-12)


def test_svm_separable_points_reach_zero_hinge():
    xaug = np.ascontiguousarray(
        np.array([[1.0, 1.0], [2.0, 1.0], [-1.0, 1.0], [-2.0, 1.0]])
    )
    y = np.array([1.0, 1.0, -1.0, -1.0])
    w, _, _, _ = knp.svm_dual_cd(xaug, y, 100.0, 1e-10, 20000)
    margins = y * (xaug @ w)
    assert np.all(margins >= 1.0 - 1e-6)


# ---------------------------------------------------------------------------
# Cross-backend agreement


@needs_numba
@pytest.mark.parametrize("seed", [0, 1])
def test_backends_agree_on_video_kernels(seed):
    rng = _rng(seed)
    rgb = _random_rgb(rng, 20, 24)
    gray = _random_gray(rng, 20, 24)
    q = (rng.integers(0, 16, size=(20, 24))).astype(np.uint8)
    assert np.array_equal(
        knp.hsv_bin_indices_rgb(rgb, 8, 4, 4), knb.hsv_bin_indices_rgb(rgb, 8, 4, 4)
    )
    assert np.array_equal(
        knp.hsv_hist_counts_rgb(rgb, 8, 4, 4), knb.hsv_hist_counts_rgb(rgb, 8, 4, 4)
    )
    assert np.array_equal(
        knp.hsv_hist_counts_gray(gray, 8, 4, 4),
        knb.hsv_hist_counts_gray(gray, 8, 4, 4),
    )
    assert np.array_equal(knp.glcm_counts(q, 16), knb.glcm_counts(q, 16))
    other = _random_gray(rng, 20, 24)
    assert knp.abs_diff_sum(gray, other) == knb.abs_diff_sum(gray, other)
    disps = kernels.search_displacements(3)
    for g, w in zip(
        knp.block_match(gray, other, 4, disps), knb.block_match(gray, other, 4, disps)
    ):
        assert np.array_equal(g, w)


@needs_numba
def test_backends_agree_on_audio_kernels():
    rng = _rng(2)
    x = rng.normal(size=1600)
    np.testing.assert_allclose(
        knp.window_sq_sums(x, 200), knb.window_sq_sums(x, 200), rtol=1e-12
    )
    np.testing.assert_allclose(
        knp.autocorr_ncc(x, 20, 400),
        knb.autocorr_ncc(x, 20, 400),
        rtol=1e-9,
        atol=1e-12,
    )


@needs_numba
def test_backends_agree_on_noisy_or():
    t, s, x, bag_start, bag_pos = _dd_problem(3, n_bags=6, dim=4)
    log_eps = math.log(1e-12)
    v1, g1 = knp.dd_value_grad(t, s, x, bag_start, bag_pos, log_eps)
    v2, g2 = knb.dd_value_grad(t, s, x, bag_start, bag_pos, log_eps)
    assert v1 == pytest.approx(v2, rel=1e-9)
    np.testing.assert_allclose(g1, g2, rtol=1e-9, atol=1e-12)


@needs_numba
def test_backends_agree_on_svm_solver():
    xaug, y = _svm_problem(4, n=20, d=4)
    c = 1.0 / (0.05 * xaug.shape[0])
    # negative tolerance forces both backends through exactly max_sweeps
    w1, a1, t1, s1 = knp.svm_dual_cd(xaug, y, c, -1.0, 60)
    w2, a2, t2, s2 = knb.svm_dual_cd(xaug, y, c, -1.0, 60)
    assert s1 == s2 == 60
    np.testing.assert_allclose(w1, w2, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(a1, a2, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(t1, t2, rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------------------
# Backend selection


def test_search_displacements_order_and_contents():
    for radius in (1, 2, 3):
        disps = kernels.search_displacements(radius)
        assert disps.shape == ((2 * radius + 1) ** 2, 2)
        assert tuple(disps[0]) == (0, 0)
        keys = [(int(dy) ** 2 + int(dx) ** 2, int(dy), int(dx)) for dy, dx in disps]
        assert keys == sorted(keys)
        assert {tuple(map(int, d)) for d in disps} == {
            (dy, dx)
            for dy in range(-radius, radius + 1)
            for dx in range(-radius, radius + 1)
        }


def test_numba_disabled_by_env_truthiness(monkeypatch):
    for value, expected in [
        ("", False),
        ("0", False),
        ("false", False),
        ("off", False),
        ("no", False),
        ("1", True),
        ("true", True),
        ("yes", True),
    ]:
        monkeypatch.setenv("CLIPSIFT_DISABLE_NUMBA", value)
        assert kernels.numba_disabled_by_env() is expected
    monkeypatch.delenv("CLIPSIFT_DISABLE_NUMBA")
    assert kernels.numba_disabled_by_env() is False


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, CLIPSIFT_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "import clipsift.kernels as k; print(k.backend_name())"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_default_backend_prefers_numba_when_available():
    env = {k: v for k, v in os.environ.items() if k != "CLIPSIFT_DISABLE_NUMBA"}
    code = (
        "import clipsift.kernels as k\n"
        "try:\n"
        "    import numba  # noqa: F401\n"
        "    expected = 'numba'\n"
        "except ImportError:\n"
        "    expected = 'numpy'\n"
        "assert k.backend_name() == expected, k.backend_name()\n"
    )
    subprocess.run([sys.executable, "-c", code], env=env, check=True)
