# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled scalar blending kernels.

Same contract as _blend_py: sequential front-to-back blend per pixel over
the tile's depth-ordered splat list, with the backward pass replaying the
traversal back-to-front from the stored transmittance and last-contributor
position.  Each tile's splat attributes are staged into contiguous scratch
arrays once, and candidates are pruned with conservative per-row pixel
windows solved from q(dx) <= q_cut; windows are widened by guards larger
than any rounding error, so every surviving candidate still runs the exact
q test and the output matches the unpruned formulation bit for bit.
"""

from libc.math cimport exp, fabs, sqrt

import numpy as np


cdef double SIGMA_MAX = 0.99
# absolute pixel widening and relative discriminant widening; both are
# orders of magnitude above double rounding error at image scale
cdef double GUARD = 1e-3
cdef double REL = 1e-12
cdef double EMPTY_LO = 1e30
cdef double EMPTY_HI = -1e30


cdef inline void _row_windows(Py_ssize_t n_tile, double py,
                              double[::1] sx, double[::1] sy,
                              double[::1] ca, double[::1] cb, double[::1] cc,
                              double[::1] qc, double[::1] pdm,
                              double[::1] ylo, double[::1] yhi,
                              double[::1] dyv, double[::1] xlo,
                              double[::1] xhi) noexcept nogil:
    """Conservative pixel-x acceptance window per splat for one pixel row."""
    cdef Py_ssize_t m
    cdef double dy, halfb, c0r, m1, m2, disc, rad, inv_a, ctr
    for m in range(n_tile):
        if pdm[m] == 0.0:
            # not positive definite: window math invalid, never prune
            dyv[m] = py - sy[m]
            xlo[m] = -EMPTY_LO
            xhi[m] = EMPTY_LO
            continue
        if py < ylo[m] or py > yhi[m]:
            xlo[m] = EMPTY_LO
            xhi[m] = EMPTY_HI
            continue
        dy = py - sy[m]
        dyv[m] = dy
        # q(dx) = ca dx^2 + 2 (cb dy) dx + cc dy^2 <= qc
        halfb = cb[m] * dy
        c0r = cc[m] * dy * dy - qc[m]
        m1 = halfb * halfb
        m2 = ca[m] * c0r
        disc = m1 - m2 + REL * (fabs(m1) + fabs(m2)) + 1e-300
        if disc <= 0.0:
            xlo[m] = EMPTY_LO
            xhi[m] = EMPTY_HI
            continue
        rad = sqrt(disc)
        inv_a = 1.0 / ca[m]
        ctr = sx[m] - halfb * inv_a
        xlo[m] = ctr - rad * inv_a - GUARD
        xhi[m] = ctr + rad * inv_a + GUARD


cdef inline void _stage_extent(Py_ssize_t m, double[::1] sy, double[::1] ca,
                               double[::1] cb, double[::1] cc, double[::1] qc,
                               double[::1] pdm, double[::1] ylo,
                               double[::1] yhi) noexcept nogil:
    """Conservative pixel-y extent of the q <= q_cut ellipse for one splat."""
    cdef double det, dy2, hw
    if qc[m] < 0.0:
        # alpha below 1/255: the exact test q >= 0 and q <= qc never passes
        pdm[m] = 1.0
        ylo[m] = EMPTY_LO
        yhi[m] = EMPTY_HI
        return
    det = ca[m] * cc[m] - cb[m] * cb[m]
    if ca[m] <= 0.0 or cc[m] <= 0.0 or det <= 0.0:
        pdm[m] = 0.0
        ylo[m] = -EMPTY_LO
        yhi[m] = EMPTY_LO
        return
    pdm[m] = 1.0
    # min over dx of q is (det / ca) dy^2, so dy^2 <= qc ca / det
    dy2 = qc[m] * ca[m] / det
    hw = sqrt(dy2) * (1.0 + REL) + GUARD
    ylo[m] = sy[m] - hw
    yhi[m] = sy[m] + hw


def blend_forward(double[:, ::1] mean2d, double[::1] z, double[:, ::1] conic,
                  double[::1] alpha, double[:, ::1] color, double[::1] q_cut,
                  long[::1] offsets, long[::1] items,
                  int width, int height, int tile_size, double stop_t):
    image_arr = np.zeros((height, width, 3))
    depth_arr = np.zeros((height, width))
    trans_arr = np.ones((height, width))
    count_arr = np.zeros((height, width), dtype=np.int32)
    last_arr = np.zeros((height, width), dtype=np.int32)
    cdef double[:, :, ::1] image = image_arr
    cdef double[:, ::1] depth = depth_arr
    cdef double[:, ::1] trans = trans_arr
    cdef int[:, ::1] count = count_arr
    cdef int[:, ::1] last = last_arr

    cdef int n_tiles_x = (width + tile_size - 1) // tile_size
    cdef int n_tiles = offsets.shape[0] - 1
    cdef Py_ssize_t t, k0, k1, s, m, n_tile, max_len
    cdef int tx, ty, x0, y0, x1, y1, i, j, ncon, lpos
    cdef double px, py, dx, dy, q, sig, t_run, test, w
    cdef double acc_r, acc_g, acc_b, acc_d

    max_len = 0
    for t in range(n_tiles):
        if offsets[t + 1] - offsets[t] > max_len:
            max_len = offsets[t + 1] - offsets[t]
    scratch = np.empty((17, max(max_len, 1)))
    cdef double[::1] sx = scratch[0]
    cdef double[::1] sy = scratch[1]
    cdef double[::1] ca = scratch[2]
    cdef double[::1] cb = scratch[3]
    cdef double[::1] cc = scratch[4]
    cdef double[::1] al = scratch[5]
    cdef double[::1] qc = scratch[6]
    cdef double[::1] c0 = scratch[7]
    cdef double[::1] c1 = scratch[8]
    cdef double[::1] c2 = scratch[9]
    cdef double[::1] sz = scratch[10]
    cdef double[::1] ylo = scratch[11]
    cdef double[::1] yhi = scratch[12]
    cdef double[::1] dyv = scratch[13]
    cdef double[::1] xlo = scratch[14]
    cdef double[::1] xhi = scratch[15]
    cdef double[::1] pdm = scratch[16]

    for t in range(n_tiles):
        k0 = offsets[t]
        k1 = offsets[t + 1]
        if k1 == k0:
            continue
        n_tile = k1 - k0
        for m in range(n_tile):
            s = items[k0 + m]
            sx[m] = mean2d[s, 0]
            sy[m] = mean2d[s, 1]
            ca[m] = conic[s, 0]
            cb[m] = conic[s, 1]
            cc[m] = conic[s, 2]
            al[m] = alpha[s]
            qc[m] = q_cut[s]
            c0[m] = color[s, 0]
            c1[m] = color[s, 1]
            c2[m] = color[s, 2]
            sz[m] = z[s]
            _stage_extent(m, sy, ca, cb, cc, qc, pdm, ylo, yhi)
        ty = <int>(t // n_tiles_x)
        tx = <int>(t % n_tiles_x)
        x0 = tx * tile_size
        y0 = ty * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        for i in range(y0, y1):
            py = i + 0.5
            _row_windows(n_tile, py, sx, sy, ca, cb, cc, qc, pdm,
                         ylo, yhi, dyv, xlo, xhi)
            for j in range(x0, x1):
                px = j + 0.5
                t_run = 1.0
                acc_r = acc_g = acc_b = acc_d = 0.0
                ncon = 0
                lpos = 0
                for m in range(n_tile):
                    if px < xlo[m] or px > xhi[m]:
                        continue
                    dx = px - sx[m]
                    dy = dyv[m]
                    q = ca[m] * dx * dx + 2.0 * cb[m] * dx * dy + cc[m] * dy * dy
                    if q < 0.0 or q > qc[m]:
                        continue
                    sig = al[m] * exp(-0.5 * q)
                    if sig > SIGMA_MAX:
                        sig = SIGMA_MAX
                    test = t_run * (1.0 - sig)
                    if stop_t > 0.0 and test < stop_t:
                        break
                    w = sig * t_run
                    acc_r += c0[m] * w
                    acc_g += c1[m] * w
                    acc_b += c2[m] * w
                    acc_d += sz[m] * w
                    t_run = test
                    ncon += 1
                    lpos = <int>m + 1
                image[i, j, 0] = acc_r
                image[i, j, 1] = acc_g
                image[i, j, 2] = acc_b
                depth[i, j] = acc_d
                trans[i, j] = t_run
                count[i, j] = ncon
                last[i, j] = lpos
    return image_arr, depth_arr, trans_arr, count_arr, last_arr


def blend_backward(double[:, ::1] mean2d, double[::1] z, double[:, ::1] conic,
                   double[::1] alpha, double[:, ::1] color, double[::1] q_cut,
                   long[::1] offsets, long[::1] items,
                   int width, int height, int tile_size, double stop_t,
                   double[:, ::1] trans, int[:, ::1] last,
                   double[:, :, ::1] g_image, double[:, ::1] g_depth):
    g_mean2d_arr = np.zeros((mean2d.shape[0], 2))
    g_conic_arr = np.zeros((conic.shape[0], 3))
    g_z_arr = np.zeros(z.shape[0])
    g_alpha_arr = np.zeros(alpha.shape[0])
    g_color_arr = np.zeros((color.shape[0], 3))
    cdef double[:, ::1] g_mean2d = g_mean2d_arr
    cdef double[:, ::1] g_conic = g_conic_arr
    cdef double[::1] g_z = g_z_arr
    cdef double[::1] g_alpha = g_alpha_arr
    cdef double[:, ::1] g_color = g_color_arr

    cdef int n_tiles_x = (width + tile_size - 1) // tile_size
    cdef int n_tiles = offsets.shape[0] - 1
    cdef Py_ssize_t t, k0, k1, s, m, n_tile, max_len
    cdef int tx, ty, x0, y0, x1, y1, i, j
    cdef double px, py, dx, dy, q, env, sig_raw, sig, om, t_i, t_behind
    cdef double w, dot, suffix, g_sig, gq, gr, gg, gb, gd

    max_len = 0
    for t in range(n_tiles):
        if offsets[t + 1] - offsets[t] > max_len:
            max_len = offsets[t + 1] - offsets[t]
    scratch = np.empty((27, max(max_len, 1)))
    cdef double[::1] sx = scratch[0]
    cdef double[::1] sy = scratch[1]
    cdef double[::1] ca = scratch[2]
    cdef double[::1] cb = scratch[3]
    cdef double[::1] cc = scratch[4]
    cdef double[::1] al = scratch[5]
    cdef double[::1] qc = scratch[6]
    cdef double[::1] c0 = scratch[7]
    cdef double[::1] c1 = scratch[8]
    cdef double[::1] c2 = scratch[9]
    cdef double[::1] sz = scratch[10]
    cdef double[::1] ylo = scratch[11]
    cdef double[::1] yhi = scratch[12]
    cdef double[::1] dyv = scratch[13]
    cdef double[::1] xlo = scratch[14]
    cdef double[::1] xhi = scratch[15]
    cdef double[::1] pdm = scratch[16]
    # per-tile gradient accumulators, scattered back once per tile
    cdef double[::1] gsx = scratch[17]
    cdef double[::1] gsy = scratch[18]
    cdef double[::1] gca = scratch[19]
    cdef double[::1] gcb = scratch[20]
    cdef double[::1] gcc = scratch[21]
    cdef double[::1] gal = scratch[22]
    cdef double[::1] gc0 = scratch[23]
    cdef double[::1] gc1 = scratch[24]
    cdef double[::1] gc2 = scratch[25]
    cdef double[::1] gsz = scratch[26]

    for t in range(n_tiles):
        k0 = offsets[t]
        k1 = offsets[t + 1]
        if k1 == k0:
            continue
        n_tile = k1 - k0
        for m in range(n_tile):
            s = items[k0 + m]
            sx[m] = mean2d[s, 0]
            sy[m] = mean2d[s, 1]
            ca[m] = conic[s, 0]
            cb[m] = conic[s, 1]
            cc[m] = conic[s, 2]
            al[m] = alpha[s]
            qc[m] = q_cut[s]
            c0[m] = color[s, 0]
            c1[m] = color[s, 1]
            c2[m] = color[s, 2]
            sz[m] = z[s]
            gsx[m] = 0.0
            gsy[m] = 0.0
            gca[m] = 0.0
            gcb[m] = 0.0
            gcc[m] = 0.0
            gal[m] = 0.0
            gc0[m] = 0.0
            gc1[m] = 0.0
            gc2[m] = 0.0
            gsz[m] = 0.0
            _stage_extent(m, sy, ca, cb, cc, qc, pdm, ylo, yhi)
        ty = <int>(t // n_tiles_x)
        tx = <int>(t % n_tiles_x)
        x0 = tx * tile_size
        y0 = ty * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        for i in range(y0, y1):
            py = i + 0.5
            _row_windows(n_tile, py, sx, sy, ca, cb, cc, qc, pdm,
                         ylo, yhi, dyv, xlo, xhi)
            for j in range(x0, x1):
                if last[i, j] == 0:
                    continue
                px = j + 0.5
                gr = g_image[i, j, 0]
                gg = g_image[i, j, 1]
                gb = g_image[i, j, 2]
                gd = g_depth[i, j]
                t_behind = trans[i, j]
                suffix = 0.0
                for m in range(last[i, j] - 1, -1, -1):
                    if px < xlo[m] or px > xhi[m]:
                        continue
                    dx = px - sx[m]
                    dy = dyv[m]
                    q = ca[m] * dx * dx + 2.0 * cb[m] * dx * dy + cc[m] * dy * dy
                    if q < 0.0 or q > qc[m]:
                        continue
                    env = exp(-0.5 * q)
                    sig_raw = al[m] * env
                    sig = SIGMA_MAX if sig_raw > SIGMA_MAX else sig_raw
                    om = 1.0 - sig
                    t_i = t_behind / om
                    w = sig * t_i
                    dot = gr * c0[m] + gg * c1[m] + gb * c2[m] + gd * sz[m]
                    gc0[m] += gr * w
                    gc1[m] += gg * w
                    gc2[m] += gb * w
                    gsz[m] += gd * w
                    g_sig = dot * t_i - suffix / om
                    suffix += dot * w
                    t_behind = t_i
                    if sig_raw > SIGMA_MAX:
                        continue
                    gal[m] += g_sig * env
                    gq = -0.5 * g_sig * sig_raw
                    gca[m] += gq * dx * dx
                    gcb[m] += 2.0 * gq * dx * dy
                    gcc[m] += gq * dy * dy
                    gsx[m] -= gq * (2.0 * ca[m] * dx + 2.0 * cb[m] * dy)
                    gsy[m] -= gq * (2.0 * cb[m] * dx + 2.0 * cc[m] * dy)
        for m in range(n_tile):
            s = items[k0 + m]
            g_mean2d[s, 0] += gsx[m]
            g_mean2d[s, 1] += gsy[m]
            g_conic[s, 0] += gca[m]
            g_conic[s, 1] += gcb[m]
            g_conic[s, 2] += gcc[m]
            g_alpha[s] += gal[m]
            g_color[s, 0] += gc0[m]
            g_color[s, 1] += gc1[m]
            g_color[s, 2] += gc2[m]
            g_z[s] += gsz[m]
    return g_mean2d_arr, g_conic_arr, g_z_arr, g_alpha_arr, g_color_arr
