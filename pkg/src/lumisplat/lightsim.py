"""Ground-truth generator: ray-casts a procedural endoluminal tube shaded by
a camera-mounted spot light with vignetting, emitting registered RGB, metric
depth, normals, and poses.

The tube is the zero set of F(p) = ||p_xy - c(p_z)|| - r(p_z) with a straight
or sinusoidal centerline c and a periodically folded wall radius r.  F is not
a true distance field once the tube bends, but it is Lipschitz with a closed
form bound, so sphere tracing with steps |F|/L converges from inside.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geom import Camera
from .shell import write_manifest, write_pfm, write_ppm

CONVERGENCE = 1e-7


@dataclass(frozen=True)
class TubeScene:
    """Procedural tube: sinusoidal centerline, folded wall, textured albedo."""

    radius: float = 0.35
    fold_amp: float = 0.0
    fold_freq: float = 0.0
    curve_amp: float = 0.0
    curve_freq: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.fold_amp < self.radius:
            raise ValidationError(
                "tube needs radius > fold_amp >= 0 to avoid self-intersection")
        if self.fold_freq < 0.0 or self.curve_freq < 0.0 or self.curve_amp < 0.0:
            raise ValidationError("tube frequencies and amplitudes must be >= 0")

    def centerline(self, z: np.ndarray) -> np.ndarray:
        """Lateral (x, y) offset of the tube axis at depth `z`."""
        x = self.curve_amp * np.sin(2.0 * math.pi * self.curve_freq * z)
        return np.stack([x, np.zeros_like(x)], axis=-1)

    def centerline_deriv(self, z: np.ndarray) -> np.ndarray:
        w = 2.0 * math.pi * self.curve_freq
        dx = self.curve_amp * w * np.cos(w * z)
        return np.stack([dx, np.zeros_like(dx)], axis=-1)

    def wall_radius(self, z: np.ndarray) -> np.ndarray:
        w = 2.0 * math.pi * self.fold_freq
        return self.radius - self.fold_amp * 0.5 * (1.0 + np.cos(w * z))

    def wall_radius_deriv(self, z: np.ndarray) -> np.ndarray:
        w = 2.0 * math.pi * self.fold_freq
        return self.fold_amp * 0.5 * w * np.sin(w * z)

    @property
    def lipschitz(self) -> float:
        """Upper bound on |grad F| used to size sphere-tracing steps."""
        slope = (self.curve_amp * 2.0 * math.pi * self.curve_freq
                 + self.fold_amp * math.pi * self.fold_freq)
        return math.sqrt(1.0 + slope * slope)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        """Signed wall distance proxy, negative inside the lumen."""
        p = np.asarray(points, dtype=np.float64)
        rel = p[..., :2] - self.centerline(p[..., 2])
        return np.sqrt(np.sum(rel * rel, axis=-1)) - self.wall_radius(p[..., 2])

    def sdf_gradient(self, points: np.ndarray) -> np.ndarray:
        """Unit outward gradient of the wall function (undefined on the axis)."""
        p = np.asarray(points, dtype=np.float64)
        z = p[..., 2]
        rel = p[..., :2] - self.centerline(z)
        d_xy = np.sqrt(np.sum(rel * rel, axis=-1))
        u = rel / d_xy[..., None]
        gz = -np.sum(u * self.centerline_deriv(z), axis=-1) \
            - self.wall_radius_deriv(z)
        g = np.concatenate([u, gz[..., None]], axis=-1)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def surface_params(self, points: np.ndarray):
        """(z, azimuth about the centerline) texture coordinates."""
        p = np.asarray(points, dtype=np.float64)
        z = p[..., 2]
        rel = p[..., :2] - self.centerline(z)
        return z, np.arctan2(rel[..., 1], rel[..., 0])

    def albedo(self, points: np.ndarray) -> np.ndarray:
        """Low-frequency color gradient plus high-frequency speckle."""
        z, phi = self.surface_params(points)
        speckle = (np.sin(14.0 * z + 2.0 * np.sin(3.0 * phi))
                   * np.sin(6.0 * phi + 1.5 * np.sin(2.2 * z)))
        r = 0.62 + 0.20 * np.sin(0.9 * z + 1.0) + 0.08 * np.cos(phi)
        g = 0.42 + 0.16 * np.sin(0.7 * z + 2.1) + 0.08 * np.sin(phi + 0.4)
        b = 0.33 + 0.12 * np.sin(0.5 * z + 4.2) + 0.06 * np.cos(2.0 * phi + 0.8)
        rgb = np.stack([r, g, b], axis=-1) + 0.07 * speckle[..., None]
        return np.clip(rgb, 0.02, 0.98)


@dataclass(frozen=True)
class HeadlightModel:
    """Spot light co-located with the camera: cos^k1 spread, cos^k2
    vignetting, and 1/d^falloff radial attenuation."""

    k1: float = 2.0
    k2: float = 4.0
    intensity: float = 1.0
    falloff: float = 1.0

    def __post_init__(self):
        if self.k1 < 0.0 or self.k2 < 0.0:
            raise ValidationError("spread and vignetting exponents must be >= 0")
        if self.intensity <= 0.0:
            raise ValidationError("light intensity must be positive")
        if self.falloff < 0.0:
            raise ValidationError("distance falloff exponent must be >= 0")


def shade(albedo: np.ndarray, points: np.ndarray, normals: np.ndarray,
          camera: Camera, light: HeadlightModel) -> np.ndarray:
    """Radiance of surface points under the co-located headlight.

    Co-location makes the spot angle equal the vignetting angle, so the two
    cosine powers combine; Lambertian shading, output clamped to [0, 1].
    """
    v = np.asarray(points, dtype=np.float64) - camera.position
    d = np.linalg.norm(v, axis=-1)
    dirs = v / d[..., None]
    cos_t = np.clip(dirs @ camera.forward_world, 0.0, 1.0)
    lambert = np.clip(-np.sum(normals * dirs, axis=-1), 0.0, None)
    radiance = (light.intensity * cos_t ** (light.k1 + light.k2) * lambert
                / d ** light.falloff)
    return np.clip(albedo * radiance[..., None], 0.0, 1.0)


@dataclass
class RaycastResult:
    """Per-pixel shading, camera-space depth, inward normals, and hit flags."""

    color: np.ndarray
    depth: np.ndarray
    normal: np.ndarray
    hit: np.ndarray


def _pixel_rays(camera: Camera) -> np.ndarray:
    """Unit world-space ray directions through every pixel center."""
    px = (np.arange(camera.width) + 0.5 - camera.cx) / camera.fx
    py = (np.arange(camera.height) + 0.5 - camera.cy) / camera.fy
    gx, gy = np.meshgrid(px, py)
    dirs = np.stack([gx, gy, np.ones_like(gx)], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs @ camera.rotation


def raycast(scene: TubeScene, camera: Camera, light: HeadlightModel = None,
            t_max: float = 50.0, max_steps: int = 20000) -> RaycastResult:
    """Sphere-trace every pixel ray from inside the tube to the wall.

    Rays that leave [0, t_max] or exhaust the step budget are flagged as
    misses with zero depth (cannot happen in a tube that closes around the
    camera's field of view).
    """
    origin = camera.position
    if float(scene.sdf(origin[None])[0]) >= 0.0:
        raise ValidationError("camera must start inside the tube")
    if light is None:
        light = HeadlightModel()

    dirs = _pixel_rays(camera)
    n = dirs.shape[0]
    lip = scene.lipschitz

    t = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    idx = np.arange(n)
    f = scene.sdf(origin[None] + t[idx, None] * dirs)
    for _ in range(max_steps):
        conv = f >= -CONVERGENCE
        hit[idx[conv]] = True
        idx, f = idx[~conv], f[~conv]
        if idx.size == 0:
            break
        t[idx] -= f / lip
        alive = t[idx] <= t_max
        idx = idx[alive]
        if idx.size == 0:
            break
        f = scene.sdf(origin[None] + t[idx, None] * dirs[idx])

    color = np.zeros((n, 3))
    normal = np.zeros((n, 3))
    depth = np.zeros(n)
    if hit.any():
        h_idx = np.nonzero(hit)[0]
        p = origin[None] + t[h_idx, None] * dirs[h_idx]
        # one Newton step along the ray tightens |F| to second order
        g = scene.sdf_gradient(p)
        along = np.sum(g * dirs[h_idx], axis=-1)
        safe = along > 1e-9
        t[h_idx[safe]] -= scene.sdf(p[safe]) / along[safe]
        p = origin[None] + t[h_idx, None] * dirs[h_idx]
        normal[h_idx] = -scene.sdf_gradient(p)
        depth[h_idx] = t[h_idx] * (dirs[h_idx] @ camera.forward_world)
        color[h_idx] = shade(scene.albedo(p), p, normal[h_idx], camera, light)

    shape = (camera.height, camera.width)
    return RaycastResult(color=color.reshape(shape + (3,)),
                         depth=depth.reshape(shape),
                         normal=normal.reshape(shape + (3,)),
                         hit=hit.reshape(shape))


@dataclass(frozen=True)
class TrajectoryConfig:
    """Fly-through along the centerline with seeded orientation jitter."""

    z_start: float = 0.6
    z_end: float = 3.4
    pitch_jitter: float = 0.05
    roll_jitter: float = 0.3

    def __post_init__(self):
        if self.z_end <= self.z_start:
            raise ValidationError("trajectory needs z_end > z_start")
        if self.pitch_jitter < 0.0 or self.roll_jitter < 0.0:
            raise ValidationError("jitter amplitudes must be >= 0")


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def camera_at(scene: TubeScene, z: float, pitch: float, roll: float,
              width: int, height: int, fx: float, fy: float) -> Camera:
    """Camera on the centerline at depth `z`, looking along the tangent,
    then pitched and rolled in its own frame."""
    cx, cy = scene.centerline(np.array(z)), scene.centerline_deriv(np.array(z))
    position = np.array([cx[0], cx[1], z])
    forward = np.array([cy[0], cy[1], 1.0])
    forward /= np.linalg.norm(forward)
    right = np.cross([0.0, 1.0, 0.0], forward)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    world_to_cam = np.stack([right, down, forward])
    world_to_cam = _rot_z(roll) @ _rot_x(pitch) @ world_to_cam
    return Camera(fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0, width=width,
                  height=height, rotation=world_to_cam, position=position)


def generate_dataset(scene: TubeScene, light: HeadlightModel, out_dir: str,
                     n_frames: int, width: int = 160, height: int = 128,
                     fx: float = 110.0, fy: float = 110.0,
                     trajectory: TrajectoryConfig = TrajectoryConfig(),
                     seed: int = 0, t_max: float = 50.0,
                     max_steps: int = 20000) -> str:
    """Render a posed RGB-D fly-through and write it as a dataset directory.

    Every eighth frame is tagged test (7:1 split); output is deterministic
    per seed, byte for byte.  Returns the manifest path.
    """
    if n_frames < 2:
        raise ValidationError("dataset needs at least two frames")
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(-1.0, 1.0, size=(n_frames, 2))
    zs = np.linspace(trajectory.z_start, trajectory.z_end, n_frames)

    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "depths"), exist_ok=True)
    records = []
    for i in range(n_frames):
        camera = camera_at(scene, float(zs[i]),
                           pitch=float(jitter[i, 0] * trajectory.pitch_jitter),
                           roll=float(jitter[i, 1] * trajectory.roll_jitter),
                           width=width, height=height, fx=fx, fy=fy)
        result = raycast(scene, camera, light, t_max=t_max,
                         max_steps=max_steps)
        image_rel = f"images/frame_{i:04d}.ppm"
        depth_rel = f"depths/frame_{i:04d}.pfm"
        write_ppm(os.path.join(out_dir, image_rel), result.color)
        write_pfm(os.path.join(out_dir, depth_rel), result.depth)
        records.append({
            "image": image_rel,
            "depth": depth_rel,
            "world_from_camera": camera.world_from_camera.tolist(),
            "split": "test" if i % 8 == 7 else "train",
        })

    intrinsics = {"fx": fx, "fy": fy, "cx": width / 2.0, "cy": height / 2.0,
                  "width": width, "height": height}
    return write_manifest(out_dir, intrinsics, records, depth_scale=1.0)
