"""Versioned binary scene checkpoints.

Layout (all little-endian, array payloads 64-bit floats):

    magic "LSPL" | version u32 | decoder config | scene_radius f64 |
    voxel_size f64 | anchor arrays | four decoder MLPs

Each array is stored as ndim u8, dims u32 each, then raw float64 data, so a
reader never has to infer shapes.  Writes go through a temp file and an
atomic rename; a crashed run can never leave a half-written checkpoint
behind.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from ..errors import ValidationError
from .mlp import Mlp
from .model import AnchorSet, DecoderConfig, GEOMETRY_MODES, APPEARANCE_MODES, SceneModel

MAGIC = b"LSPL"
VERSION = 1
MLP_ORDER = ("opacity", "scale", "rotation", "color")


def _pack_array(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a, dtype="<f8")
    head = struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return head + a.tobytes()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.blob):
            raise ValidationError("checkpoint truncated")
        out = struct.unpack_from(fmt, self.blob, self.pos)
        self.pos += size
        return out

    def array(self) -> np.ndarray:
        (ndim,) = self.take("<B")
        shape = self.take(f"<{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        size = 8 * count
        if self.pos + size > len(self.blob):
            raise ValidationError("checkpoint truncated")
        a = np.frombuffer(self.blob, dtype="<f8", count=count, offset=self.pos)
        self.pos += size
        return a.reshape(shape).astype(np.float64)


def save_checkpoint(model: SceneModel, path: str) -> None:
    cfg = model.config
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<4I", cfg.feature_dim, cfg.offsets_per_anchor,
                    cfg.dir_embed_dim, cfg.angle_embed_dim),
        struct.pack("<2B", GEOMETRY_MODES.index(cfg.geometry_mode),
                    APPEARANCE_MODES.index(cfg.appearance_mode)),
        struct.pack("<2d", cfg.alpha_min, cfg.frustum_margin),
        struct.pack("<2d", model.scene_radius, model.voxel_size),
    ]
    anchors = model.anchors
    for a in (anchors.positions, anchors.features, anchors.scales, anchors.offsets):
        parts.append(_pack_array(a))
    mlps = {"opacity": model.mlp_opacity, "scale": model.mlp_scale,
            "rotation": model.mlp_rotation, "color": model.mlp_color}
    for name in MLP_ORDER:
        params = mlps[name].params
        parts.append(struct.pack("<I", len(params)))
        for p in params:
            parts.append(_pack_array(p))
    blob = b"".join(parts)

    dirname = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dirname, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> SceneModel:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValidationError(f"{path} is not a scene checkpoint")
    r = _Reader(blob)
    r.pos = 4
    (version,) = r.take("<I")
    if version != VERSION:
        raise ValidationError(f"checkpoint version {version} is not supported "
                              f"by this build (expects {VERSION})")
    fdim, k, dv, dth = r.take("<4I")
    gmode, amode = r.take("<2B")
    if gmode >= len(GEOMETRY_MODES) or amode >= len(APPEARANCE_MODES):
        raise ValidationError("checkpoint names an unknown decoder mode")
    alpha_min, margin = r.take("<2d")
    radius, voxel = r.take("<2d")
    config = DecoderConfig(feature_dim=fdim, offsets_per_anchor=k,
                           dir_embed_dim=dv, angle_embed_dim=dth,
                           geometry_mode=GEOMETRY_MODES[gmode],
                           appearance_mode=APPEARANCE_MODES[amode],
                           alpha_min=alpha_min, frustum_margin=margin)
    anchors = AnchorSet(positions=r.array(), features=r.array(),
                        scales=r.array(), offsets=r.array())
    mlps = {}
    for name in MLP_ORDER:
        (n,) = r.take("<I")
        mlps[name] = Mlp.from_params([r.array() for _ in range(n)])
    if r.pos != len(blob):
        raise ValidationError("checkpoint has trailing bytes")
    return SceneModel(anchors, config, mlps, radius, voxel)
