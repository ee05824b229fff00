"""Vectorized numpy implementations of the hot numeric kernels.

These are the fallback backend behind :mod:`clipsift.kernels`. Video kernels
(histogram binning, co-occurrence counting, frame differencing, block
matching) accumulate in integer domain and are bit-identical to the numba
backend. Audio kernels reduce in float; the two backends may differ by a few
ulps there (see kernels module docstring).
"""

from __future__ import annotations

import numpy as np


def hsv_bin_indices_rgb(rgb: np.ndarray, h_bins: int, s_bins: int, v_bins: int) -> np.ndarray:
    """Flat HSV bin index per pixel of an rgb8 frame."""
    r = rgb[..., 0].astype(np.int64)
    g = rgb[..., 1].astype(np.int64)
    b = rgb[..., 2].astype(np.int64)
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn

    v = mx / 255.0
    s = np.zeros(r.shape, dtype=np.float64)
    nz = mx > 0
    s[nz] = delta[nz] / mx[nz]

    # hue of the hexcone model, 0 when the pixel is achromatic
    h = np.zeros(r.shape, dtype=np.float64)
    chroma = delta > 0
    safe_delta = np.where(chroma, delta, 1).astype(np.float64)
    is_r = chroma & (r == mx)
    is_g = chroma & (g == mx) & ~is_r
    is_b = chroma & ~is_r & ~is_g
    hp = np.zeros(r.shape, dtype=np.float64)
    hp[is_r] = (g[is_r] - b[is_r]) / safe_delta[is_r]
    hp[is_r] = np.where(hp[is_r] < 0, hp[is_r] + 6.0, hp[is_r])
    hp[is_g] = (b[is_g] - r[is_g]) / safe_delta[is_g] + 2.0
    hp[is_b] = (r[is_b] - g[is_b]) / safe_delta[is_b] + 4.0
    h[chroma] = 60.0 * hp[chroma]

    hb = np.minimum(np.floor(h / 360.0 * h_bins).astype(np.int64), h_bins - 1)
    sb = np.minimum(np.floor(s * s_bins).astype(np.int64), s_bins - 1)
    vb = np.minimum(np.floor(v * v_bins).astype(np.int64), v_bins - 1)
    return (hb * s_bins + sb) * v_bins + vb


def hsv_hist_counts_rgb(rgb: np.ndarray, h_bins: int, s_bins: int, v_bins: int) -> np.ndarray:
    idx = hsv_bin_indices_rgb(rgb, h_bins, s_bins, v_bins)
    return np.bincount(idx.ravel(), minlength=h_bins * s_bins * v_bins).astype(np.int64)


def hsv_hist_counts_gray(gray: np.ndarray, h_bins: int, s_bins: int, v_bins: int) -> np.ndarray:
    # r = g = b implies s = 0, h = 0; only the value axis varies
    v = gray.astype(np.int64) / 255.0
    vb = np.minimum(np.floor(v * v_bins).astype(np.int64), v_bins - 1)
    counts = np.zeros(h_bins * s_bins * v_bins, dtype=np.int64)
    counts[:v_bins] = np.bincount(vb.ravel(), minlength=v_bins)
    return counts


def glcm_counts(gray_levels: np.ndarray, levels: int) -> np.ndarray:
    """Symmetric co-occurrence counts for offsets right and down."""
    q = gray_levels.astype(np.int64)
    pairs = []
    if q.shape[1] >= 2:
        pairs.append((q[:, :-1].ravel(), q[:, 1:].ravel()))
    if q.shape[0] >= 2:
        pairs.append((q[:-1, :].ravel(), q[1:, :].ravel()))
    counts = np.zeros(levels * levels, dtype=np.int64)
    for a, b in pairs:
        counts += np.bincount(a * levels + b, minlength=levels * levels)
        counts += np.bincount(b * levels + a, minlength=levels * levels)
    return counts.reshape(levels, levels)


def abs_diff_sum(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.abs(a.astype(np.int64) - b.astype(np.int64)).sum())


def block_match(
    f1: np.ndarray,
    f2: np.ndarray,
    block_size: int,
    disps: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Best in-bounds displacement per tile, scanning disps in the given order.

    disps must start with (0, 0); a later displacement replaces the current
    best only on strict SAD improvement, so each tile keeps the first (and,
    with magnitude-sorted disps, smallest) displacement among SAD ties.
    Returns (best_dy, best_dx, best_sad, zero_sad), each shaped (n_ty, n_tx).
    """
    h, w = f1.shape
    bs = block_size
    n_ty, n_tx = h // bs, w // bs
    shape = (n_ty, n_tx)
    if n_ty == 0 or n_tx == 0:
        empty = np.zeros((0, 0), dtype=np.int64)
        return empty, empty.copy(), empty.copy(), empty.copy()

    a = f1[: n_ty * bs, : n_tx * bs].astype(np.int64)
    best_sad = np.full(shape, np.iinfo(np.int64).max, dtype=np.int64)
    best_dy = np.zeros(shape, dtype=np.int64)
    best_dx = np.zeros(shape, dtype=np.int64)
    zero_sad = np.zeros(shape, dtype=np.int64)

    for k in range(disps.shape[0]):
        dy = int(disps[k, 0])
        dx = int(disps[k, 1])
        ty_lo = max(0, -(-(-dy) // bs)) if dy < 0 else 0
        ty_hi = min(n_ty, (h - dy) // bs)
        tx_lo = max(0, -(-(-dx) // bs)) if dx < 0 else 0
        tx_hi = min(n_tx, (w - dx) // bs)
        if ty_lo >= ty_hi or tx_lo >= tx_hi:
            continue
        y0, y1 = ty_lo * bs, ty_hi * bs
        x0, x1 = tx_lo * bs, tx_hi * bs
        ref = f2[y0 + dy : y1 + dy, x0 + dx : x1 + dx].astype(np.int64)
        diff = np.abs(a[y0:y1, x0:x1] - ref)
        sad = diff.reshape(ty_hi - ty_lo, bs, tx_hi - tx_lo, bs).sum(axis=(1, 3))
        view = (slice(ty_lo, ty_hi), slice(tx_lo, tx_hi))
        if dy == 0 and dx == 0:
            zero_sad[view] = sad
        better = sad < best_sad[view]
        best_sad[view] = np.where(better, sad, best_sad[view])
        best_dy[view] = np.where(better, dy, best_dy[view])
        best_dx[view] = np.where(better, dx, best_dx[view])
    return best_dy, best_dx, best_sad, zero_sad


def window_sq_sums(x: np.ndarray, win: int) -> np.ndarray:
    """Sum of squares over consecutive non-overlapping full windows."""
    n_win = x.shape[0] // win
    if n_win == 0:
        return np.zeros(0)
    head = x[: n_win * win].reshape(n_win, win)
    return np.sum(head * head, axis=1)


def autocorr_ncc(x: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    """Normalized autocorrelation for lags lag_min..lag_max inclusive."""
    n = x.shape[0]
    lag_max = min(lag_max, n - 1)
    if lag_max < lag_min:
        return np.zeros(0)
    size = 1
    while size < 2 * n:
        size *= 2
    spec = np.fft.rfft(x, size)
    acf = np.fft.irfft(spec * np.conj(spec), size)[: lag_max + 1]
    sq = x * x
    prefix = np.cumsum(sq)
    total = prefix[-1]
    out = np.zeros(lag_max - lag_min + 1, dtype=np.float64)
    for i, lag in enumerate(range(lag_min, lag_max + 1)):
        e1 = prefix[n - lag - 1]
        e2 = total - prefix[lag - 1]
        denom = np.sqrt(e1 * e2)
        out[i] = acf[lag] / denom if denom > 0 else 0.0
    return out


def svm_dual_cd(
    xaug: np.ndarray,
    y: np.ndarray,
    c: float,
    tol: float,
    max_sweeps: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Dual coordinate descent for the L2-regularized hinge SVM.

    Minimizes -G(alpha) = 0.5 ||w||^2 - sum(alpha) with w = sum alpha_i y_i
    x_i over the box 0 <= alpha_i <= c, visiting coordinates 0..n-1 in order
    every sweep (deterministic). Stops when the largest projected gradient
    magnitude over a sweep drops to tol. Returns (w, alpha, dual objective
    per sweep, sweeps run).
    """
    n, d = xaug.shape
    sq = np.einsum("nd,nd->n", xaug, xaug)
    alpha = np.zeros(n, dtype=np.float64)
    w = np.zeros(d, dtype=np.float64)
    trace = []
    sweeps = 0
    for sweep in range(max_sweeps):
        max_pg = 0.0
        for i in range(n):
            g = y[i] * float(w @ xaug[i]) - 1.0
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= c:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > max_pg:
                max_pg = abs(pg)
            if pg != 0.0 and sq[i] > 0.0:
                new = min(max(alpha[i] - g / sq[i], 0.0), c)
                delta = new - alpha[i]
                if delta != 0.0:
                    alpha[i] = new
                    w = w + (delta * y[i]) * xaug[i]
        trace.append(0.5 * float(w @ w) - float(alpha.sum()))
        sweeps = sweep + 1
        if max_pg <= tol:
            break
    return w, alpha, np.array(trace, dtype=np.float64), sweeps


def dd_value_grad(
    t: np.ndarray,
    s: np.ndarray,
    x: np.ndarray,
    bag_start: np.ndarray,
    bag_pos: np.ndarray,
    log_eps: float,
) -> tuple[float, np.ndarray]:
    """Clamped noisy-OR log-likelihood and its gradient w.r.t. (t, s).

    Instance probability q_j = exp(-sum_d s_d^2 (x_jd - t_d)^2); bag
    probability 1 - prod_j (1 - q_j), clamped into [eps, 1-eps] where
    log_eps = log(eps). Clamped bags contribute a constant and no gradient.
    """
    diff = x - t
    d2 = diff * diff
    logq = -(d2 @ (s * s))  # (N,)
    l1mq = _log1mexp(logq)
    log1meps = np.log1p(-np.exp(log_eps))

    n_bags = bag_pos.shape[0]
    value = 0.0
    w = np.zeros(x.shape[0], dtype=np.float64)
    for i in range(n_bags):
        lo, hi = int(bag_start[i]), int(bag_start[i + 1])
        s_i = float(np.sum(l1mq[lo:hi]))
        if bag_pos[i]:
            log_p = _log1mexp_scalar(s_i)
            term = min(max(log_p, log_eps), log1meps)
            value += term
            if log_eps < log_p < log1meps:
                w[lo:hi] = np.exp((s_i - l1mq[lo:hi]) + logq[lo:hi] - log_p)
        else:
            term = min(max(s_i, log_eps), log1meps)
            value += term
            if log_eps < s_i < log1meps:
                w[lo:hi] = -np.exp(logq[lo:hi] - l1mq[lo:hi])

    grad_t = 2.0 * (s * s) * (w @ diff)
    grad_s = -2.0 * s * (w @ d2)
    return value, np.concatenate([grad_t, grad_s])


def _log1mexp(a: np.ndarray) -> np.ndarray:
    """log(1 - exp(a)) for a <= 0, stable at both ends."""
    out = np.empty_like(a)
    small = a < -0.6931471805599453  # log 2
    with np.errstate(divide="ignore"):
        out[small] = np.log1p(-np.exp(a[small]))
        out[~small] = np.log(-np.expm1(a[~small]))
    return out


def _log1mexp_scalar(a: float) -> float:
    if a < -0.6931471805599453:
        return float(np.log1p(-np.exp(a)))
    with np.errstate(divide="ignore"):
        return float(np.log(-np.expm1(a)))
