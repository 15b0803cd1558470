"""Depth sorting and conservative tile assignment.

A splat is assigned to every tile its opacity-aware footprint box can
touch.  The box solves alpha * exp(-Q/2) >= 1/255 for the largest exponent
Q_max = 2*ln(255*alpha) and extends sqrt(Q_max * Sigma'_xx) pixels from the
mean (Sigma' = inverse conic), so any pixel where the splat clears the
contribution threshold lies inside an assigned tile.  That makes the tiled
renderer agree with the untiled reference exactly, which a fixed
3-standard-deviation radius cannot guarantee for high opacities.
"""

from dataclasses import dataclass

import numpy as np

from .types import SIGMA_MIN, TILE_SIZE, SplatBatch


@dataclass
class TileBins:
    """CSR tile lists: items[offsets[t]:offsets[t+1]] are the splat rows
    overlapping tile t, in ascending depth order."""

    tile_size: int
    n_tiles_x: int
    n_tiles_y: int
    offsets: np.ndarray
    items: np.ndarray
    order: np.ndarray

    @property
    def n_tiles(self) -> int:
        return self.n_tiles_x * self.n_tiles_y


def depth_order(z: np.ndarray) -> np.ndarray:
    """Ascending depth, ties broken by original index (stable)."""
    return np.argsort(z, kind="stable")


def footprint_halfwidths(conic: np.ndarray, alpha: np.ndarray):
    """Per-splat (hx, hy, usable) box half-extents in pixels."""
    a, b, c = conic[:, 0], conic[:, 1], conic[:, 2]
    det = a * c - b * b
    usable = (alpha > SIGMA_MIN) & (det > 0.0) & (a > 0.0) & (c > 0.0)
    q_max = np.zeros(alpha.shape)
    np.log(255.0 * alpha, out=q_max, where=usable)
    q_max *= 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        hx = np.where(usable, np.sqrt(np.maximum(q_max * c / det, 0.0)), 0.0)
        hy = np.where(usable, np.sqrt(np.maximum(q_max * a / det, 0.0)), 0.0)
    return hx, hy, usable


def tile_binning(splats: SplatBatch, width: int, height: int,
                 tile_size: int = TILE_SIZE) -> TileBins:
    n_tiles_x = (width + tile_size - 1) // tile_size
    n_tiles_y = (height + tile_size - 1) // tile_size
    n_tiles = n_tiles_x * n_tiles_y
    order = depth_order(splats.z)

    if len(splats) == 0:
        return TileBins(tile_size, n_tiles_x, n_tiles_y,
                        np.zeros(n_tiles + 1, dtype=np.int64),
                        np.zeros(0, dtype=np.int64), order)

    mean = splats.mean2d[order]
    hx, hy, usable = footprint_halfwidths(splats.conic[order],
                                          splats.alpha[order])
    x0, x1 = mean[:, 0] - hx, mean[:, 0] + hx
    y0, y1 = mean[:, 1] - hy, mean[:, 1] + hy
    usable &= (x1 >= 0.0) & (x0 <= width) & (y1 >= 0.0) & (y0 <= height)

    tx0 = np.clip(np.floor(x0 / tile_size), 0, n_tiles_x - 1).astype(np.int64)
    tx1 = np.clip(np.floor(x1 / tile_size), 0, n_tiles_x - 1).astype(np.int64)
    ty0 = np.clip(np.floor(y0 / tile_size), 0, n_tiles_y - 1).astype(np.int64)
    ty1 = np.clip(np.floor(y1 / tile_size), 0, n_tiles_y - 1).astype(np.int64)

    nx = np.where(usable, tx1 - tx0 + 1, 0)
    ny = np.where(usable, ty1 - ty0 + 1, 0)
    rep = nx * ny
    total = int(rep.sum())
    if total == 0:
        return TileBins(tile_size, n_tiles_x, n_tiles_y,
                        np.zeros(n_tiles + 1, dtype=np.int64),
                        np.zeros(0, dtype=np.int64), order)

    row = np.repeat(np.arange(len(order)), rep)
    start = np.concatenate(([0], np.cumsum(rep)[:-1]))
    local = np.arange(total) - np.repeat(start, rep)
    nx_r = nx[row]
    tx = tx0[row] + local % nx_r
    ty = ty0[row] + local // nx_r
    tile_id = ty * n_tiles_x + tx

    # Stable sort on tile keeps each tile's entries in ascending depth,
    # because `row` is already in sorted-depth order.
    perm = np.argsort(tile_id, kind="stable")
    items = order[row[perm]]
    counts = np.bincount(tile_id, minlength=n_tiles)
    offsets = np.zeros(n_tiles + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return TileBins(tile_size, n_tiles_x, n_tiles_y, offsets, items, order)
