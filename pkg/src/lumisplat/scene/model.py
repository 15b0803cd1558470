"""Anchors, view-conditioned decoders, and the scene-level backward pass.

Each anchor a holds a position x_a, a feature vector f_a, a per-axis scaling
l_a, and k learnable offsets.  For a given camera, the anchors visible in the
(slightly dilated) frustum decode into k Gaussians each:

    mean_j   = x_a + offset_j * l_a                     (componentwise)
    alpha_j  = sigmoid(opacity head)
    scale_j  = l_a * softplus(scale head)
    quat_j   = normalize(rotation head + (1, 0, 0, 0))
    color_j  = sigmoid(color head)

The decoder inputs depend on the configured modes.  Geometry decoders see
either the raw viewing distance and direction ("plain") or a cosine frequency
embedding of the direction alone ("view_embed").  The color decoder sees the
raw direction and distance, plus, in "attenuated" mode, a cosine embedding of
the angle between the view ray and the optical axis, which is what lets it
express headlight falloff and vignetting.

``SceneModel.backward`` pulls per-Gaussian gradients back to every anchor
array and MLP parameter, including the path through the view context into the
anchor positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import EmptySceneError, NumericalError
from ..geom import Camera
from .embedding import cosine_embed, cosine_embed_vjp
from .mlp import Mlp

GEOMETRY_MODES = ("plain", "view_embed")
APPEARANCE_MODES = ("plain", "attenuated")


@dataclass
class DecoderConfig:
    """Shape and wiring of the per-anchor decoders."""

    feature_dim: int = 32
    offsets_per_anchor: int = 5
    dir_embed_dim: int = 10
    angle_embed_dim: int = 5
    geometry_mode: str = "view_embed"
    appearance_mode: str = "attenuated"
    alpha_min: float = 0.005
    frustum_margin: float = 0.15

    def __post_init__(self):
        if self.geometry_mode not in GEOMETRY_MODES:
            raise ValueError(f"unknown geometry mode {self.geometry_mode!r}")
        if self.appearance_mode not in APPEARANCE_MODES:
            raise ValueError(f"unknown appearance mode {self.appearance_mode!r}")
        if self.feature_dim < 1 or self.offsets_per_anchor < 1:
            raise ValueError("need at least one feature and one offset")
        if self.dir_embed_dim < 0 or self.angle_embed_dim < 0:
            raise ValueError("embedding dims cannot be negative")

    @property
    def geometry_in_dim(self) -> int:
        if self.geometry_mode == "view_embed":
            return self.feature_dim + 3 * self.dir_embed_dim
        return self.feature_dim + 1 + 3

    @property
    def appearance_in_dim(self) -> int:
        base = self.feature_dim + 3 + 1
        if self.appearance_mode == "attenuated":
            return base + self.angle_embed_dim
        return base


@dataclass
class AnchorSet:
    """Learnable anchor arrays; every row is one anchor."""

    positions: np.ndarray
    features: np.ndarray
    scales: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        a = self.positions.shape[0]
        if (self.features.shape[0] != a or self.scales.shape != (a, 3)
                or self.offsets.shape[:1] != (a,) or self.offsets.shape[2] != 3):
            raise ValueError("anchor arrays disagree on anchor count or layout")
        if np.any(self.scales <= 0.0):
            raise ValueError("anchor scalings must be strictly positive")

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass
class ViewContext:
    """Per-anchor viewing geometry for one camera."""

    distance: np.ndarray
    direction: np.ndarray
    cos_axis: np.ndarray


def view_context(positions: np.ndarray, camera: Camera) -> ViewContext:
    """Distance, unit direction, and angle cosine from camera to each anchor.

    cos_axis is the dot of the view direction with the optical axis, i.e. the
    cosine of the angle a headlight ray makes with the camera axis.
    """
    delta = np.asarray(positions, dtype=np.float64) - camera.position
    d = np.linalg.norm(delta, axis=-1)
    if np.any(d < 1e-9):
        raise ValueError("anchor coincides with the camera center")
    v = delta / d[..., None]
    return ViewContext(distance=d, direction=v, cos_axis=v @ camera.forward_world)


def view_context_vjp(ctx: ViewContext, camera: Camera, g_d: np.ndarray,
                     g_v: np.ndarray, g_cos: np.ndarray) -> np.ndarray:
    """Pull context grads back to the anchor positions."""
    d = ctx.distance[..., None]
    v = ctx.direction
    axis = camera.forward_world
    g = g_d[..., None] * v
    g += (g_v - v * np.sum(v * g_v, axis=-1, keepdims=True)) / d
    g += g_cos[..., None] * (axis - v * ctx.cos_axis[..., None]) / d
    return g


@dataclass
class GaussianBatch:
    """Gaussians emitted for one camera, after the opacity cut."""

    mean: np.ndarray
    scale: np.ndarray
    quat: np.ndarray
    alpha: np.ndarray
    color: np.ndarray
    anchor_ids: np.ndarray
    rows: np.ndarray  # flat (visible_anchor, offset) row of each gaussian

    def __len__(self) -> int:
        return self.mean.shape[0]


@dataclass
class GaussianGrads:
    """Upstream gradients for each emitted Gaussian."""

    mean: np.ndarray
    scale: np.ndarray
    quat: np.ndarray
    alpha: np.ndarray
    color: np.ndarray


@dataclass
class GenerateCache:
    """Everything ``SceneModel.backward`` needs to replay one generate call."""

    camera: Camera
    visible_ids: np.ndarray
    ctx: ViewContext
    geo_in: np.ndarray
    col_in: np.ndarray
    mlp_caches: dict = field(repr=False, default_factory=dict)
    alpha: np.ndarray = None
    scale_raw: np.ndarray = None
    scale_sp: np.ndarray = None
    quat_u: np.ndarray = None
    quat_norm: np.ndarray = None
    quat: np.ndarray = None
    color: np.ndarray = None
    rows: np.ndarray = None


class SceneModel:
    """An anchor cloud plus its decoder MLPs and normalization constants."""

    def __init__(self, anchors: AnchorSet, config: DecoderConfig,
                 mlps: dict[str, Mlp], scene_radius: float, voxel_size: float):
        self.anchors = anchors
        self.config = config
        self.mlp_opacity = mlps["opacity"]
        self.mlp_scale = mlps["scale"]
        self.mlp_rotation = mlps["rotation"]
        self.mlp_color = mlps["color"]
        self.scene_radius = float(scene_radius)
        self.voxel_size = float(voxel_size)
        k = config.offsets_per_anchor
        expected = {"opacity": (config.geometry_in_dim, k),
                    "scale": (config.geometry_in_dim, 3 * k),
                    "rotation": (config.geometry_in_dim, 4 * k),
                    "color": (config.appearance_in_dim, 3 * k)}
        for name, (ind, outd) in expected.items():
            m = mlps[name]
            if m.in_dim != ind or m.out_dim != outd:
                raise ValueError(f"{name} decoder is {m.in_dim}->{m.out_dim}, "
                                 f"expected {ind}->{outd}")

    @classmethod
    def create(cls, anchors: AnchorSet, config: DecoderConfig,
               scene_radius: float, voxel_size: float,
               rng: np.random.Generator) -> "SceneModel":
        k = config.offsets_per_anchor
        mlps = {
            "opacity": Mlp(config.geometry_in_dim, k, rng),
            "scale": Mlp(config.geometry_in_dim, 3 * k, rng),
            "rotation": Mlp(config.geometry_in_dim, 4 * k, rng),
            "color": Mlp(config.appearance_in_dim, 3 * k, rng),
        }
        return cls(anchors, config, mlps, scene_radius, voxel_size)

    def param_groups(self) -> dict[str, list[np.ndarray]]:
        """Named parameter groups; arrays are live views, not copies."""
        return {
            "anchor_positions": [self.anchors.positions],
            "anchor_offsets": [self.anchors.offsets],
            "anchor_scales": [self.anchors.scales],
            "anchor_features": [self.anchors.features],
            "mlp_opacity": self.mlp_opacity.params,
            "mlp_scale": self.mlp_scale.params,
            "mlp_rotation": self.mlp_rotation.params,
            "mlp_color": self.mlp_color.params,
        }

    # ---- decoder inputs ----

    def _geometry_input(self, features: np.ndarray, ctx: ViewContext) -> np.ndarray:
        if self.config.geometry_mode == "view_embed":
            emb = cosine_embed(ctx.direction, self.config.dir_embed_dim)
            return np.concatenate([features, emb], axis=1)
        d_norm = ctx.distance[:, None] / self.scene_radius
        return np.concatenate([features, d_norm, ctx.direction], axis=1)

    def _appearance_input(self, features: np.ndarray, ctx: ViewContext) -> np.ndarray:
        d_norm = ctx.distance[:, None] / self.scene_radius
        if self.config.appearance_mode == "attenuated":
            emb = cosine_embed(ctx.cos_axis[:, None], self.config.angle_embed_dim)
            return np.concatenate([features, ctx.direction, d_norm, emb], axis=1)
        return np.concatenate([features, d_norm, ctx.direction], axis=1)

    # ---- decoders ----

    def decode_geometry(self, features: np.ndarray, ctx: ViewContext,
                        scales: np.ndarray):
        """Opacities (V,k), world scales (V,k,3), and orientations (V,k,4).

        The scale head is softplus-activated and multiplied by the anchor
        scaling, so an all-zero network emits s = l_a * ln 2.
        """
        v = features.shape[0]
        k = self.config.offsets_per_anchor
        geo_in = self._geometry_input(features, ctx)
        a_raw, a_cache = self.mlp_opacity.forward(geo_in)
        s_raw, s_cache = self.mlp_scale.forward(geo_in)
        r_raw, r_cache = self.mlp_rotation.forward(geo_in)
        alpha = expit(a_raw)
        s_raw = s_raw.reshape(v, k, 3)
        sp = np.logaddexp(0.0, s_raw)  # softplus
        scale = scales[:, None, :] * sp
        u = r_raw.reshape(v, k, 4).copy()
        u[..., 0] += 1.0
        norm = np.linalg.norm(u, axis=-1, keepdims=True)
        if np.any(norm < 1e-9):
            raise NumericalError("rotation head collapsed to a zero quaternion")
        quat = u / norm
        caches = {"geo_in": geo_in, "opacity": a_cache, "scale": s_cache,
                  "rotation": r_cache, "alpha": alpha, "scale_raw": s_raw,
                  "scale_sp": sp, "quat_u": u, "quat_norm": norm, "quat": quat}
        return alpha, scale, quat, caches

    def decode_color(self, features: np.ndarray, ctx: ViewContext):
        """Per-offset RGB in (0, 1), shape (V, k, 3)."""
        v = features.shape[0]
        k = self.config.offsets_per_anchor
        col_in = self._appearance_input(features, ctx)
        c_raw, c_cache = self.mlp_color.forward(col_in)
        color = expit(c_raw.reshape(v, k, 3))
        return color, {"col_in": col_in, "color": c_cache, "value": color}

    # ---- generation ----

    def visible_mask(self, camera: Camera) -> np.ndarray:
        """Anchors inside (near, far) whose projection hits the dilated image."""
        t = (self.anchors.positions - camera.position) @ camera.rotation.T
        z = t[:, 2]
        infront = (z > camera.near) & (z < camera.far)
        zs = np.where(infront, z, 1.0)
        px = camera.fx * t[:, 0] / zs + camera.cx
        py = camera.fy * t[:, 1] / zs + camera.cy
        mx = self.config.frustum_margin * camera.width
        my = self.config.frustum_margin * camera.height
        inrect = ((px >= -mx) & (px <= camera.width + mx)
                  & (py >= -my) & (py <= camera.height + my))
        return infront & inrect

    def generate(self, camera: Camera) -> tuple[GaussianBatch, GenerateCache]:
        """Decode all visible anchors into Gaussians above the opacity cut."""
        k = self.config.offsets_per_anchor
        vis = np.flatnonzero(self.visible_mask(camera))
        xa = self.anchors.positions[vis]
        la = self.anchors.scales[vis]
        off = self.anchors.offsets[vis]
        ctx = view_context(xa, camera)
        feats = self.anchors.features[vis]

        alpha, scale, quat, gcaches = self.decode_geometry(feats, ctx, la)
        color, ccaches = self.decode_color(feats, ctx)
        mean = xa[:, None, :] + off * la[:, None, :]

        keep = alpha.reshape(-1) >= self.config.alpha_min
        rows = np.flatnonzero(keep)
        nvis = vis.shape[0]
        batch = GaussianBatch(
            mean=mean.reshape(nvis * k, 3)[rows],
            scale=scale.reshape(nvis * k, 3)[rows],
            quat=quat.reshape(nvis * k, 4)[rows],
            alpha=alpha.reshape(-1)[rows],
            color=color.reshape(nvis * k, 3)[rows],
            anchor_ids=np.repeat(vis, k)[rows],
            rows=rows,
        )
        cache = GenerateCache(
            camera=camera, visible_ids=vis, ctx=ctx,
            geo_in=gcaches["geo_in"], col_in=ccaches["col_in"],
            mlp_caches={"opacity": gcaches["opacity"], "scale": gcaches["scale"],
                        "rotation": gcaches["rotation"], "color": ccaches["color"]},
            alpha=alpha, scale_raw=gcaches["scale_raw"], scale_sp=gcaches["scale_sp"],
            quat_u=gcaches["quat_u"], quat_norm=gcaches["quat_norm"], quat=quat,
            color=color, rows=rows,
        )
        return batch, cache

    # ---- backward ----

    def zero_grads(self) -> dict[str, list[np.ndarray]]:
        return {name: [np.zeros_like(p) for p in ps]
                for name, ps in self.param_groups().items()}

    def backward(self, cache: GenerateCache,
                 g: GaussianGrads) -> dict[str, list[np.ndarray]]:
        """Per-Gaussian grads -> grads for every parameter group.

        Includes the path through the view context (distance, direction, axis
        cosine) into the anchor positions.
        """
        cfg = self.config
        k = cfg.offsets_per_anchor
        f_dim = cfg.feature_dim
        vis = cache.visible_ids
        nvis = vis.shape[0]
        la = self.anchors.scales[vis]
        off = self.anchors.offsets[vis]
        ctx = cache.ctx

        def scatter(src, trailing):
            out = np.zeros((nvis * k,) + trailing)
            out[cache.rows] = src
            return out.reshape((nvis, k) + trailing)

        g_mean = scatter(g.mean, (3,))
        g_scale = scatter(g.scale, (3,))
        g_quat = scatter(g.quat, (4,))
        g_alpha = scatter(g.alpha, ())
        g_color = scatter(g.color, (3,))

        # Heads.
        g_araw = g_alpha * cache.alpha * (1.0 - cache.alpha)
        g_sp = g_scale * la[:, None, :]
        g_sraw = g_sp * expit(cache.scale_raw)
        g_la = np.sum(g_scale * cache.scale_sp, axis=1)
        qdot = np.sum(cache.quat * g_quat, axis=-1, keepdims=True)
        g_rraw = (g_quat - cache.quat * qdot) / cache.quat_norm
        g_craw = g_color * cache.color * (1.0 - cache.color)

        # Mean chain: mean = x_a + offset * l_a.
        g_off = g_mean * la[:, None, :]
        g_la += np.sum(g_mean * off, axis=1)
        g_xa = np.sum(g_mean, axis=1)

        # Decoder backwards.
        grads = self.zero_grads()
        g_geo_in, gw = self.mlp_opacity.backward(cache.mlp_caches["opacity"],
                                                 g_araw)
        grads["mlp_opacity"] = gw
        gi, gw = self.mlp_scale.backward(cache.mlp_caches["scale"],
                                         g_sraw.reshape(nvis, 3 * k))
        g_geo_in += gi
        grads["mlp_scale"] = gw
        gi, gw = self.mlp_rotation.backward(cache.mlp_caches["rotation"],
                                            g_rraw.reshape(nvis, 4 * k))
        g_geo_in += gi
        grads["mlp_rotation"] = gw
        g_col_in, gw = self.mlp_color.backward(cache.mlp_caches["color"],
                                               g_craw.reshape(nvis, 3 * k))
        grads["mlp_color"] = gw

        # Split decoder-input grads back into features and view context.
        g_feat = g_geo_in[:, :f_dim] + g_col_in[:, :f_dim]
        g_d = np.zeros(nvis)
        g_v = np.zeros((nvis, 3))
        g_cos = np.zeros(nvis)
        if cfg.geometry_mode == "view_embed":
            g_v += cosine_embed_vjp(ctx.direction, cfg.dir_embed_dim,
                                    g_geo_in[:, f_dim:])
        else:
            g_d += g_geo_in[:, f_dim] / self.scene_radius
            g_v += g_geo_in[:, f_dim + 1:f_dim + 4]
        if cfg.appearance_mode == "attenuated":
            g_v += g_col_in[:, f_dim:f_dim + 3]
            g_d += g_col_in[:, f_dim + 3] / self.scene_radius
            g_cos += cosine_embed_vjp(ctx.cos_axis[:, None], cfg.angle_embed_dim,
                                      g_col_in[:, f_dim + 4:])[:, 0]
        else:
            g_d += g_col_in[:, f_dim] / self.scene_radius
            g_v += g_col_in[:, f_dim + 1:f_dim + 4]
        g_xa += view_context_vjp(ctx, cache.camera, g_d, g_v, g_cos)

        grads["anchor_positions"][0][vis] = g_xa
        grads["anchor_offsets"][0][vis] = g_off
        grads["anchor_scales"][0][vis] = g_la
        grads["anchor_features"][0][vis] = g_feat
        return grads


def init_from_depth(depth_maps, cameras, voxel_size: float,
                    config: DecoderConfig, seed: int = 0) -> SceneModel:
    """Build a scene by voxelizing back-projected depth pixels.

    One anchor is placed at the center of every voxel that receives at least
    one valid depth sample (finite and positive).  Features start as small
    Gaussian noise, offsets uniform in [-0.5, 0.5), scalings at the voxel
    size.  The same seed always yields the same scene.
    """
    if voxel_size <= 0.0:
        raise ValueError("voxel size must be positive")
    points = []
    for depth, camera in zip(depth_maps, cameras):
        depth = np.asarray(depth, dtype=np.float64)
        if depth.shape != (camera.height, camera.width):
            raise ValueError("depth map does not match the camera image size")
        valid = np.isfinite(depth) & (depth > 0.0)
        if not valid.any():
            continue
        ii, jj = np.nonzero(valid)
        z = depth[ii, jj]
        x = (jj + 0.5 - camera.cx) / camera.fx * z
        y = (ii + 0.5 - camera.cy) / camera.fy * z
        local = np.stack([x, y, z], axis=-1)
        points.append(local @ camera.rotation + camera.position)
    if not points:
        raise EmptySceneError("no valid depth samples to build anchors from")
    pts = np.concatenate(points, axis=0)
    keys = np.unique(np.floor(pts / voxel_size).astype(np.int64), axis=0)
    positions = (keys + 0.5) * voxel_size

    rng = np.random.default_rng(seed)
    a = positions.shape[0]
    k = config.offsets_per_anchor
    anchors = AnchorSet(
        positions=positions,
        features=rng.normal(0.0, 0.01, size=(a, config.feature_dim)),
        scales=np.full((a, 3), voxel_size),
        offsets=rng.uniform(-0.5, 0.5, size=(a, k, 3)),
    )
    centered = positions - positions.mean(axis=0)
    radius = max(float(np.linalg.norm(centered, axis=1).max()), 1e-6)
    return SceneModel.create(anchors, config, radius, voxel_size, rng)
