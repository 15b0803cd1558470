"""Tile-based differentiable rasterizer with interchangeable backends.

The compiled Cython kernels are the default when the extension is built;
`LUMISPLAT_BACKEND=python` (or the `backend=` argument) forces the numpy
fallback.  Both backends share the binning stage and the same flat-array
kernel signature.
"""

import os

import numpy as np

from ..errors import ValidationError
from .binning import TileBins, depth_order, tile_binning
from .oracle import rasterize_oracle
from .types import (SIGMA_MAX, SIGMA_MIN, STOP_T, TILE_SIZE, RenderBuffers,
                    SplatBatch, SplatGrads)
from . import _blend_py

try:
    from . import _blend_cy
except ImportError:
    _blend_cy = None

_BACKENDS = {"python": _blend_py}
if _blend_cy is not None:
    _BACKENDS["compiled"] = _blend_cy


def available_backends():
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    env = os.environ.get("LUMISPLAT_BACKEND")
    if env is not None:
        if env not in _BACKENDS:
            raise ValidationError(
                f"LUMISPLAT_BACKEND={env!r} is not available; "
                f"choose from {available_backends()}")
        return env
    return "compiled" if "compiled" in _BACKENDS else "python"


def _get_backend(name):
    name = default_backend() if name is None else name
    if name not in _BACKENDS:
        raise ValidationError(f"unknown raster backend {name!r}; "
                              f"choose from {available_backends()}")
    return _BACKENDS[name]


def _q_cut(alpha: np.ndarray) -> np.ndarray:
    """Quadratic-form threshold equivalent to sigma_raw >= SIGMA_MIN.

    alpha * exp(-q / 2) >= 1 / 255 rearranges to q <= 2 ln(255 alpha), so
    kernels can reject faint candidates before evaluating the exponential.
    Non-positive alphas clamp to a threshold below zero that rejects every
    pixel, since accepted candidates always have q >= 0.
    """
    return 2.0 * np.log(np.maximum(255.0 * alpha, 1e-300))


def rasterize(splats: SplatBatch, width: int, height: int,
              stop_t: float = STOP_T, backend: str = None) -> RenderBuffers:
    """Depth-sort, bin, and front-to-back blend splats into RenderBuffers."""
    if width <= 0 or height <= 0:
        raise ValidationError("image size must be positive")
    if len(splats) == 0:
        return RenderBuffers(color=np.zeros((height, width, 3)),
                             depth=np.zeros((height, width)),
                             transmittance=np.ones((height, width)),
                             n_contrib=np.zeros((height, width), np.int32),
                             last_position=np.zeros((height, width), np.int32))
    bins = tile_binning(splats, width, height)
    mod = _get_backend(backend)
    image, depth, trans, count, last = mod.blend_forward(
        splats.mean2d, splats.z, splats.conic, splats.alpha, splats.color,
        _q_cut(splats.alpha), bins.offsets, bins.items, width, height,
        bins.tile_size, stop_t)
    return RenderBuffers(color=image, depth=depth, transmittance=trans,
                         n_contrib=count, last_position=last, bins=bins)


def rasterize_backward(splats: SplatBatch, buffers: RenderBuffers,
                       g_color: np.ndarray, g_depth: np.ndarray,
                       width: int, height: int, stop_t: float = STOP_T,
                       backend: str = None) -> SplatGrads:
    """Gradients of the blended color and depth images w.r.t. each splat.

    `stop_t` must match the forward call; the traversal is replayed
    back-to-front from the recorded per-pixel state, with the opacity cap
    and the contribution threshold acting as zero-gradient clamps.
    """
    n = len(splats)
    if n == 0:
        return SplatGrads.zeros(0)
    g_color = np.ascontiguousarray(g_color, dtype=np.float64)
    g_depth = np.ascontiguousarray(g_depth, dtype=np.float64)
    if g_color.shape != (height, width, 3) or g_depth.shape != (height, width):
        raise ValidationError("upstream gradient shape mismatch")
    bins = buffers.bins
    if bins is None:
        bins = tile_binning(splats, width, height)
    mod = _get_backend(backend)
    g_mean2d, g_conic, g_z, g_alpha, g_col = mod.blend_backward(
        splats.mean2d, splats.z, splats.conic, splats.alpha, splats.color,
        _q_cut(splats.alpha), bins.offsets, bins.items, width, height,
        bins.tile_size, stop_t, buffers.transmittance, buffers.last_position,
        g_color, g_depth)
    return SplatGrads(mean2d=g_mean2d, conic=g_conic, z=g_z, alpha=g_alpha,
                      color=g_col)
