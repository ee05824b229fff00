"""Numba-jitted implementations of the hot numeric kernels.

Mirrors :mod:`clipsift._kernels_numpy` function by function. Integer-domain
video kernels reproduce the numpy backend bit for bit; float audio reductions
may differ by a few ulps because the accumulation order differs.

uint8 pixels are widened through np.int64 before subtraction: numba's plain
int() on a uint8 keeps unsigned semantics and wraps around.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG_HALF = -0.6931471805599453


@njit(cache=True)
def hsv_bin_indices_rgb(rgb, h_bins, s_bins, v_bins):
    height, width = rgb.shape[0], rgb.shape[1]
    idx = np.empty((height, width), dtype=np.int64)
    for i in range(height):
        for j in range(width):
            r = np.int64(rgb[i, j, 0])
            g = np.int64(rgb[i, j, 1])
            b = np.int64(rgb[i, j, 2])
            mx = r if r >= g else g
            if b > mx:
                mx = b
            mn = r if r <= g else g
            if b < mn:
                mn = b
            delta = mx - mn

            v = mx / 255.0
            if mx > 0:
                s = delta / mx
            else:
                s = 0.0
            h = 0.0
            if delta > 0:
                if r == mx:
                    hp = (g - b) / delta
                    if hp < 0:
                        hp = hp + 6.0
                elif g == mx:
                    hp = (b - r) / delta + 2.0
                else:
                    hp = (r - g) / delta + 4.0
                h = 60.0 * hp

            hb = np.int64(math.floor(h / 360.0 * h_bins))
            if hb > h_bins - 1:
                hb = h_bins - 1
            sb = np.int64(math.floor(s * s_bins))
            if sb > s_bins - 1:
                sb = s_bins - 1
            vb = np.int64(math.floor(v * v_bins))
            if vb > v_bins - 1:
                vb = v_bins - 1
            idx[i, j] = (hb * s_bins + sb) * v_bins + vb
    return idx


@njit(cache=True)
def hsv_hist_counts_rgb(rgb, h_bins, s_bins, v_bins):
    idx = hsv_bin_indices_rgb(rgb, h_bins, s_bins, v_bins)
    counts = np.zeros(h_bins * s_bins * v_bins, dtype=np.int64)
    for i in range(idx.shape[0]):
        for j in range(idx.shape[1]):
            counts[idx[i, j]] += 1
    return counts


@njit(cache=True)
def hsv_hist_counts_gray(gray, h_bins, s_bins, v_bins):
    counts = np.zeros(h_bins * s_bins * v_bins, dtype=np.int64)
    for i in range(gray.shape[0]):
        for j in range(gray.shape[1]):
            v = np.int64(gray[i, j]) / 255.0
            vb = np.int64(math.floor(v * v_bins))
            if vb > v_bins - 1:
                vb = v_bins - 1
            counts[vb] += 1
    return counts


@njit(cache=True)
def glcm_counts(gray_levels, levels):
    counts = np.zeros((levels, levels), dtype=np.int64)
    height, width = gray_levels.shape
    for i in range(height):
        for j in range(width - 1):
            a = np.int64(gray_levels[i, j])
            b = np.int64(gray_levels[i, j + 1])
            counts[a, b] += 1
            counts[b, a] += 1
    for i in range(height - 1):
        for j in range(width):
            a = np.int64(gray_levels[i, j])
            b = np.int64(gray_levels[i + 1, j])
            counts[a, b] += 1
            counts[b, a] += 1
    return counts


@njit(cache=True)
def abs_diff_sum(a, b):
    total = np.int64(0)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            d = np.int64(a[i, j]) - np.int64(b[i, j])
            total += d if d >= 0 else -d
    return total


@njit(cache=True)
def block_match(f1, f2, block_size, disps):
    h, w = f1.shape
    bs = block_size
    n_ty, n_tx = h // bs, w // bs
    best_dy = np.zeros((n_ty, n_tx), dtype=np.int64)
    best_dx = np.zeros((n_ty, n_tx), dtype=np.int64)
    best_sad = np.zeros((n_ty, n_tx), dtype=np.int64)
    zero_sad = np.zeros((n_ty, n_tx), dtype=np.int64)
    sentinel = np.int64(np.iinfo(np.int64).max)
    for ty in range(n_ty):
        for tx in range(n_tx):
            y0 = ty * bs
            x0 = tx * bs
            best = sentinel
            bdy = np.int64(0)
            bdx = np.int64(0)
            for k in range(disps.shape[0]):
                dy = disps[k, 0]
                dx = disps[k, 1]
                yy = y0 + dy
                xx = x0 + dx
                if yy < 0 or xx < 0 or yy + bs > h or xx + bs > w:
                    continue
                sad = np.int64(0)
                aborted = False
                for r in range(bs):
                    for c in range(bs):
                        d = np.int64(f1[y0 + r, x0 + c]) - np.int64(f2[yy + r, xx + c])
                        sad += d if d >= 0 else -d
                    if sad >= best:
                        aborted = True
                        break
                if dy == 0 and dx == 0:
                    zero_sad[ty, tx] = sad
                if not aborted and sad < best:
                    best = sad
                    bdy = dy
                    bdx = dx
            best_dy[ty, tx] = bdy
            best_dx[ty, tx] = bdx
            best_sad[ty, tx] = best
    return best_dy, best_dx, best_sad, zero_sad


@njit(cache=True)
def window_sq_sums(x, win):
    n_win = x.shape[0] // win
    out = np.zeros(n_win, dtype=np.float64)
    for k in range(n_win):
        acc = 0.0
        base = k * win
        for i in range(win):
            acc += x[base + i] * x[base + i]
        out[k] = acc
    return out


@njit(cache=True)
def autocorr_ncc(x, lag_min, lag_max):
    n = x.shape[0]
    if lag_max > n - 1:
        lag_max = n - 1
    if lag_max < lag_min:
        return np.zeros(0, dtype=np.float64)
    prefix = np.empty(n, dtype=np.float64)
    acc = 0.0
    for i in range(n):
        acc += x[i] * x[i]
        prefix[i] = acc
    total = prefix[n - 1]
    out = np.zeros(lag_max - lag_min + 1, dtype=np.float64)
    for lag in range(lag_min, lag_max + 1):
        num = 0.0
        for i in range(n - lag):
            num += x[i] * x[i + lag]
        e1 = prefix[n - lag - 1]
        e2 = total - prefix[lag - 1]
        prod = e1 * e2
        if prod > 0.0:
            out[lag - lag_min] = num / math.sqrt(prod)
    return out


@njit(cache=True)
def svm_dual_cd(xaug, y, c, tol, max_sweeps):
    n, d = xaug.shape
    sq = np.zeros(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for k in range(d):
            acc += xaug[i, k] * xaug[i, k]
        sq[i] = acc
    alpha = np.zeros(n, dtype=np.float64)
    w = np.zeros(d, dtype=np.float64)
    trace = np.zeros(max_sweeps, dtype=np.float64)
    sweeps = 0
    for sweep in range(max_sweeps):
        max_pg = 0.0
        for i in range(n):
            dot = 0.0
            for k in range(d):
                dot += w[k] * xaug[i, k]
            g = y[i] * dot - 1.0
            if alpha[i] <= 0.0:
                pg = g if g < 0.0 else 0.0
            elif alpha[i] >= c:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if abs(pg) > max_pg:
                max_pg = abs(pg)
            if pg != 0.0 and sq[i] > 0.0:
                new = alpha[i] - g / sq[i]
                if new < 0.0:
                    new = 0.0
                elif new > c:
                    new = c
                delta = new - alpha[i]
                if delta != 0.0:
                    alpha[i] = new
                    scale = delta * y[i]
                    for k in range(d):
                        w[k] = w[k] + scale * xaug[i, k]
        acc = 0.0
        for k in range(d):
            acc += w[k] * w[k]
        asum = 0.0
        for i in range(n):
            asum += alpha[i]
        trace[sweep] = 0.5 * acc - asum
        sweeps = sweep + 1
        if max_pg <= tol:
            break
    return w, alpha, trace[:sweeps].copy(), sweeps


@njit(cache=True)
def _log1mexp(a):
    if a < LOG_HALF:
        return math.log1p(-math.exp(a))
    m = -math.expm1(a)
    if m <= 0.0:
        return -np.inf
    return math.log(m)


@njit(cache=True)
def dd_value_grad(t, s, x, bag_start, bag_pos, log_eps):
    n, dim = x.shape
    logq = np.empty(n, dtype=np.float64)
    for j in range(n):
        acc = 0.0
        for k in range(dim):
            diff = x[j, k] - t[k]
            acc += s[k] * s[k] * diff * diff
        logq[j] = -acc
    l1mq = np.empty(n, dtype=np.float64)
    for j in range(n):
        l1mq[j] = _log1mexp(logq[j])
    log1meps = math.log1p(-math.exp(log_eps))

    value = 0.0
    w = np.zeros(n, dtype=np.float64)
    for i in range(bag_pos.shape[0]):
        lo = bag_start[i]
        hi = bag_start[i + 1]
        s_i = 0.0
        for j in range(lo, hi):
            s_i += l1mq[j]
        if bag_pos[i] != 0:
            log_p = _log1mexp(s_i)
            term = log_p
            if term < log_eps:
                term = log_eps
            elif term > log1meps:
                term = log1meps
            value += term
            if log_eps < log_p < log1meps:
                for j in range(lo, hi):
                    w[j] = math.exp((s_i - l1mq[j]) + logq[j] - log_p)
        else:
            term = s_i
            if term < log_eps:
                term = log_eps
            elif term > log1meps:
                term = log1meps
            value += term
            if log_eps < s_i < log1meps:
                for j in range(lo, hi):
                    w[j] = -math.exp(logq[j] - l1mq[j])

    grad = np.zeros(2 * dim, dtype=np.float64)
    for j in range(n):
        wj = w[j]
        if wj != 0.0:
            for k in range(dim):
                diff = x[j, k] - t[k]
                grad[k] += 2.0 * s[k] * s[k] * diff * wj
                grad[dim + k] += -2.0 * s[k] * diff * diff * wj
    return value, grad
