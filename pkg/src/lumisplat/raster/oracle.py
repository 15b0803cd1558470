"""Brute-force per-pixel reference renderer.

No tiling, no footprint culling: every pixel walks the full depth-sorted
splat list with an explicit done flag, exactly the sequential definition of
front-to-back blending.  O(pixels x splats); exists purely so the tiled
renderer has something independent to agree with.
"""

import numpy as np

from .binning import depth_order
from .types import SIGMA_MAX, STOP_T, RenderBuffers, SplatBatch


def rasterize_oracle(splats: SplatBatch, width: int, height: int,
                     stop_t: float = STOP_T) -> RenderBuffers:
    px = np.arange(width) + 0.5
    py = (np.arange(height) + 0.5)[:, None]
    # same log-domain faintness threshold as the tiled kernels
    q_cut = 2.0 * np.log(np.maximum(255.0 * splats.alpha, 1e-300))
    color = np.zeros((height, width, 3))
    depth = np.zeros((height, width))
    trans = np.ones((height, width))
    count = np.zeros((height, width), dtype=np.int32)
    last = np.zeros((height, width), dtype=np.int32)
    done = np.zeros((height, width), dtype=bool)

    for pos, s in enumerate(depth_order(splats.z)):
        if done.all():
            break
        dx = px - splats.mean2d[s, 0]
        dy = py - splats.mean2d[s, 1]
        a, b, c = splats.conic[s]
        q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
        sig = np.minimum(splats.alpha[s] * np.exp(-0.5 * q), SIGMA_MAX)
        ok = (q >= 0.0) & (q <= q_cut[s]) & ~done
        test = trans * (1.0 - sig)
        if stop_t > 0.0:
            stopped = ok & (test < stop_t)
            done |= stopped
            ok &= ~stopped
        w = sig * trans
        color[ok] += splats.color[s] * w[ok, None]
        depth[ok] += splats.z[s] * w[ok]
        trans[ok] = test[ok]
        count[ok] += 1
        last[ok] = pos + 1
    return RenderBuffers(color=color, depth=depth, transmittance=trans,
                         n_contrib=count, last_position=last)
