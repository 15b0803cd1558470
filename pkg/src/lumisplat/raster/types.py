"""Array containers passed across the rasterizer boundary."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

SIGMA_MIN = 1.0 / 255.0
SIGMA_MAX = 0.99
STOP_T = 1e-4
TILE_SIZE = 16


def _as_f64(x, shape, name):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


@dataclass
class SplatBatch:
    """Screen-space splats: pixel means, conics (a, b, c), depths, colors.

    The conic row (a, b, c) is the inverse 2x2 covariance packed so the
    footprint exponent reads a*dx^2 + 2*b*dx*dy + c*dy^2.  `source` maps each
    row back to the Gaussian it came from; callers that do not need the
    mapping may leave the default identity.
    """

    mean2d: np.ndarray
    conic: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    color: np.ndarray
    source: np.ndarray = field(default=None)

    def __post_init__(self):
        n = np.asarray(self.mean2d).shape[0] if np.ndim(self.mean2d) else 0
        self.mean2d = _as_f64(self.mean2d, (n, 2), "mean2d")
        self.conic = _as_f64(self.conic, (n, 3), "conic")
        self.z = _as_f64(self.z, (n,), "z")
        self.alpha = _as_f64(self.alpha, (n,), "alpha")
        self.color = _as_f64(self.color, (n, 3), "color")
        if self.source is None:
            self.source = np.arange(n, dtype=np.int64)
        else:
            self.source = np.ascontiguousarray(self.source, dtype=np.int64)
            if self.source.shape != (n,):
                raise ValidationError("source index shape mismatch")
        for name in ("mean2d", "conic", "z", "alpha", "color"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"non-finite values in splat {name}")

    def __len__(self) -> int:
        return self.mean2d.shape[0]


@dataclass
class RenderBuffers:
    """Forward outputs: color, blended depth, final transmittance.

    `n_contrib` counts the splats that actually contributed per pixel.
    `last_position` is the 1-based traversal position of the final
    contributor within the pixel's blend list; the backward pass replays
    from it and it is not comparable across renderer variants.  `bins`
    optionally carries the forward pass's tile assignment so the backward
    pass can replay the identical traversal without re-binning.
    """

    color: np.ndarray
    depth: np.ndarray
    transmittance: np.ndarray
    n_contrib: np.ndarray
    last_position: np.ndarray
    bins: object = None


@dataclass
class SplatGrads:
    """Per-splat gradients, row-aligned with the input SplatBatch."""

    mean2d: np.ndarray
    conic: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    color: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "SplatGrads":
        return cls(mean2d=np.zeros((n, 2)), conic=np.zeros((n, 3)),
                   z=np.zeros(n), alpha=np.zeros(n), color=np.zeros((n, 3)))
