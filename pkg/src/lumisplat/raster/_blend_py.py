"""Pure-numpy blending backend.

Works tile by tile on (splat, pixel) matrices: the transmittance chain is a
cumulative product down the depth-sorted axis, early termination is the
first row where it would cross the stop threshold, and the backward pass
reuses the recomputed forward intermediates instead of replaying divisions.
Skipped splats enter the chain with sigma = 0, which multiplies the running
transmittance by exactly 1.0, so the results match the sequential
formulation bit for bit.
"""

import numpy as np

from .types import SIGMA_MAX


def _tile_view(t, n_tiles_x, tile_size, width, height):
    ty, tx = divmod(t, n_tiles_x)
    x0, y0 = tx * tile_size, ty * tile_size
    x1, y1 = min(x0 + tile_size, width), min(y0 + tile_size, height)
    h, w = y1 - y0, x1 - x0
    px = np.broadcast_to(np.arange(x0, x1) + 0.5, (h, w)).ravel()
    py = np.broadcast_to((np.arange(y0, y1) + 0.5)[:, None], (h, w)).ravel()
    return (slice(y0, y1), slice(x0, x1)), h, w, px, py


def _tile_chain(mean2d, conic, alpha, q_cut, idx, px, py, stop_t):
    """Recompute the blend chain for one tile's splat list."""
    dx = px[None, :] - mean2d[idx, 0][:, None]
    dy = py[None, :] - mean2d[idx, 1][:, None]
    a = conic[idx, 0][:, None]
    b = conic[idx, 1][:, None]
    c = conic[idx, 2][:, None]
    q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    env = np.exp(-0.5 * q)
    sig_raw = alpha[idx][:, None] * env
    sig = np.minimum(sig_raw, SIGMA_MAX)
    # q > q_cut is the log-domain form of sigma_raw < SIGMA_MIN
    sig[(q < 0.0) | (q > q_cut[idx][:, None])] = 0.0

    n = idx.shape[0]
    t_ext = np.ones((n + 1, sig.shape[1]))
    np.cumprod(1.0 - sig, axis=0, out=t_ext[1:])
    if stop_t > 0.0:
        trig = t_ext[1:] < stop_t
        hit = trig.any(axis=0)
        stop = np.where(hit, trig.argmax(axis=0), n)
    else:
        stop = np.full(sig.shape[1], n, dtype=np.int64)
    active = np.arange(n)[:, None] < stop[None, :]
    weight = np.where(active, sig * t_ext[:-1], 0.0)
    return dx, dy, q, env, sig_raw, sig, t_ext, stop, active, weight


def blend_forward(mean2d, z, conic, alpha, color, q_cut, offsets, items,
                  width, height, tile_size, stop_t):
    image = np.zeros((height, width, 3))
    depth = np.zeros((height, width))
    trans = np.ones((height, width))
    n_contrib = np.zeros((height, width), dtype=np.int32)
    last = np.zeros((height, width), dtype=np.int32)
    n_tiles_x = (width + tile_size - 1) // tile_size
    for t in range(offsets.shape[0] - 1):
        idx = items[offsets[t]:offsets[t + 1]]
        if idx.size == 0:
            continue
        win, h, w, px, py = _tile_view(t, n_tiles_x, tile_size, width, height)
        _, _, _, _, _, sig, t_ext, stop, active, weight = _tile_chain(
            mean2d, conic, alpha, q_cut, idx, px, py, stop_t)
        image[win] = (weight.T @ color[idx]).reshape(h, w, 3)
        depth[win] = (weight.T @ z[idx]).reshape(h, w)
        cols = np.arange(stop.shape[0])
        trans[win] = t_ext[stop, cols].reshape(h, w)
        contrib = active & (sig > 0.0)
        counts = contrib.sum(axis=0)
        n_contrib[win] = counts.reshape(h, w).astype(np.int32)
        pos = np.where(counts > 0, idx.shape[0] - contrib[::-1].argmax(axis=0), 0)
        last[win] = pos.reshape(h, w).astype(np.int32)
    return image, depth, trans, n_contrib, last


def blend_backward(mean2d, z, conic, alpha, color, q_cut, offsets, items,
                   width, height, tile_size, stop_t, trans, last,
                   g_image, g_depth):
    g_mean2d = np.zeros_like(mean2d)
    g_conic = np.zeros_like(conic)
    g_z = np.zeros_like(z)
    g_alpha = np.zeros_like(alpha)
    g_color = np.zeros_like(color)
    n_tiles_x = (width + tile_size - 1) // tile_size
    for t in range(offsets.shape[0] - 1):
        idx = items[offsets[t]:offsets[t + 1]]
        if idx.size == 0:
            continue
        win, h, w, px, py = _tile_view(t, n_tiles_x, tile_size, width, height)
        dx, dy, q, env, sig_raw, sig, t_ext, _, active, weight = _tile_chain(
            mean2d, conic, alpha, q_cut, idx, px, py, stop_t)
        gc = g_image[win].reshape(-1, 3)
        gd = g_depth[win].reshape(-1)
        contrib = active & (sig > 0.0)

        g_color[idx] += weight @ gc
        g_z[idx] += weight @ gd

        # d(blend)/d(sigma_i) = dot_i T_i - (suffix of later terms)/(1-sigma_i)
        dot = color[idx] @ gc.T + z[idx][:, None] * gd[None, :]
        term = dot * weight
        suffix = np.zeros_like(term)
        suffix[:-1] = np.cumsum(term[::-1], axis=0)[::-1][1:]
        g_sig = dot * t_ext[:-1] - suffix / (1.0 - sig)
        g_sig = np.where(contrib & (sig_raw <= SIGMA_MAX), g_sig, 0.0)

        g_alpha[idx] += (g_sig * env).sum(axis=1)
        gq = -0.5 * g_sig * sig_raw
        g_conic[idx, 0] += (gq * dx * dx).sum(axis=1)
        g_conic[idx, 1] += (2.0 * gq * dx * dy).sum(axis=1)
        g_conic[idx, 2] += (gq * dy * dy).sum(axis=1)
        a = conic[idx, 0][:, None]
        b = conic[idx, 1][:, None]
        c = conic[idx, 2][:, None]
        g_mean2d[idx, 0] -= (gq * (2.0 * a * dx + 2.0 * b * dy)).sum(axis=1)
        g_mean2d[idx, 1] -= (gq * (2.0 * b * dx + 2.0 * c * dy)).sum(axis=1)
    return g_mean2d, g_conic, g_z, g_alpha, g_color
