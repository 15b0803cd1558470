"""Anchor-based neural scene representation.

A scene is a set of anchors living on a voxel grid.  Each anchor carries a
learned feature vector, a per-axis scaling, and a handful of learnable
offsets; tiny MLPs decode these into the opacities, scales, orientations and
colors of one Gaussian per offset, conditioned on the current viewing
geometry (distance, direction, and angle off the optical axis).
"""

from .embedding import cosine_embed, cosine_embed_vjp
from .mlp import Mlp
from .model import (
    AnchorSet,
    DecoderConfig,
    GaussianBatch,
    SceneModel,
    ViewContext,
    init_from_depth,
    view_context,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AnchorSet",
    "DecoderConfig",
    "GaussianBatch",
    "Mlp",
    "SceneModel",
    "ViewContext",
    "cosine_embed",
    "cosine_embed_vjp",
    "init_from_depth",
    "load_checkpoint",
    "save_checkpoint",
    "view_context",
]
