"""Camera geometry and the EWA projection of 3D Gaussians to screen space.

Conventions used everywhere in this package:

* Camera rotations are stored world-to-camera.  The camera looks along +z in
  its own frame, x points right, y points down, so pixel v grows downward.
* A camera-space point (tx, ty, tz) lands at pixel (fx*tx/tz + cx,
  fy*ty/tz + cy).  Pixel (i, j) of an image is sampled at (j + 0.5, i + 0.5).
* A 3D Gaussian has covariance S = R(q) diag(s^2) R(q)^T with q in wxyz order.
* Projection linearizes the pinhole map at the mean (the EWA Jacobian J) and
  adds a 0.3-pixel^2 isotropic low-pass so the screen-space covariance stays
  comfortably positive definite.  The conic is its inverse:
  exponent of the splat at offset o is -0.5 * o^T conic o.

Every forward operation here has a hand-derived vector-Jacobian product; the
test suite checks each one against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Screen-space anti-aliasing floor, in pixel^2.  Guarantees the projected
# covariance has eigenvalues >= LOWPASS, hence an invertible conic.
LOWPASS = 0.3


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Rotation matrices from wxyz quaternions, any leading batch shape.

    The quaternion is normalized internally; a norm below 1e-12 raises.
    """
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1)
    if np.any(norm < 1e-12):
        raise ValueError("cannot orient a zero-norm quaternion")
    w, x, y, z = np.moveaxis(q / norm[..., None], -1, 0)
    rot = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    rot[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    rot[..., 0, 1] = 2.0 * (x * y - w * z)
    rot[..., 0, 2] = 2.0 * (x * z + w * y)
    rot[..., 1, 0] = 2.0 * (x * y + w * z)
    rot[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    rot[..., 1, 2] = 2.0 * (y * z - w * x)
    rot[..., 2, 0] = 2.0 * (x * z - w * y)
    rot[..., 2, 1] = 2.0 * (y * z + w * x)
    rot[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return rot


def quat_to_rot_vjp(q: np.ndarray, g_rot: np.ndarray) -> np.ndarray:
    """Backward of quat_to_rot: grads on R pulled back to the raw quaternion.

    Differentiates through the internal normalization, so ``q`` may be any
    non-zero quaternion, exactly as the forward accepts it.
    """
    q = np.asarray(q, dtype=np.float64)
    g = np.asarray(g_rot, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    qn = q / norm
    w, x, y, z = np.moveaxis(qn, -1, 0)

    def e(i, j):
        return g[..., i, j]

    g_w = 2.0 * (-z * e(0, 1) + y * e(0, 2) + z * e(1, 0) - x * e(1, 2)
                 - y * e(2, 0) + x * e(2, 1))
    g_x = 2.0 * (y * e(0, 1) + z * e(0, 2) + y * e(1, 0) - 2.0 * x * e(1, 1)
                 - w * e(1, 2) + z * e(2, 0) + w * e(2, 1) - 2.0 * x * e(2, 2))
    g_y = 2.0 * (-2.0 * y * e(0, 0) + x * e(0, 1) + w * e(0, 2) + x * e(1, 0)
                 + z * e(1, 2) - w * e(2, 0) + z * e(2, 1) - 2.0 * y * e(2, 2))
    g_z = 2.0 * (-2.0 * z * e(0, 0) - w * e(0, 1) + x * e(0, 2) + w * e(1, 0)
                 - 2.0 * z * e(1, 1) + y * e(1, 2) + x * e(2, 0) + y * e(2, 1))
    g_qn = np.stack([g_w, g_x, g_y, g_z], axis=-1)
    # Through qn = q / |q|:  g_q = (I - qn qn^T) g_qn / |q|.
    return (g_qn - qn * np.sum(qn * g_qn, axis=-1, keepdims=True)) / norm


@dataclass
class Camera:
    """Pinhole camera with a world-to-camera rigid pose.

    ``rotation`` maps world vectors into the camera frame; ``position`` is the
    camera center in world coordinates, so a world point p becomes
    ``rotation @ (p - position)`` in camera space.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray
    position: np.ndarray
    near: float = 0.01
    far: float = 1000.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.rotation.shape != (3, 3) or self.position.shape != (3,):
            raise ValueError("camera pose must be a 3x3 rotation and 3-vector center")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6:
            raise ValueError(f"camera rotation is not orthonormal (deviation {err:.3g})")
        if np.linalg.det(self.rotation) < 0.0:
            raise ValueError("camera rotation must be proper (det +1), got a reflection")
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")
        if not 0.0 < self.near < self.far:
            raise ValueError("need 0 < near < far")

    @property
    def forward_world(self) -> np.ndarray:
        """Unit optical axis expressed in world coordinates."""
        return self.rotation[2]

    @property
    def world_from_camera(self) -> np.ndarray:
        """4x4 rigid transform taking camera-frame points to world."""
        m = np.eye(4)
        m[:3, :3] = self.rotation.T
        m[:3, 3] = self.position
        return m

    @classmethod
    def from_world_from_camera(cls, matrix: np.ndarray, fx, fy, cx, cy,
                               width, height, near=0.01, far=1000.0) -> "Camera":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError("pose must be a 4x4 matrix")
        if np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-9:
            raise ValueError("pose must be rigid (last row 0 0 0 1)")
        return cls(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height,
                   rotation=m[:3, :3].T, position=m[:3, 3], near=near, far=far)


def world_to_camera(camera: Camera, points: np.ndarray) -> np.ndarray:
    """Map world points (...,3) into the camera frame; [..., 2] is the depth."""
    p = np.asarray(points, dtype=np.float64)
    return (p - camera.position) @ camera.rotation.T


def build_covariance(s: np.ndarray, q: np.ndarray) -> np.ndarray:
    """World covariance R diag(s^2) R^T from per-axis scales and a quaternion.

    Accepts (..., 3) scales with (..., 4) quaternions.  Scales must be
    strictly positive.
    """
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0.0):
        raise ValueError("gaussian scales must be strictly positive")
    rot = quat_to_rot(q)
    return (rot * (s * s)[..., None, :]) @ np.swapaxes(rot, -1, -2)


def build_covariance_vjp(s: np.ndarray, q: np.ndarray,
                         g_sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Backward of build_covariance for full-matrix upstream grads on Sigma."""
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g_sigma, dtype=np.float64)
    rot = quat_to_rot(q)
    # Sigma = R D R^T with D = diag(s^2).
    rt_g_r = np.swapaxes(rot, -1, -2) @ g @ rot
    g_s = 2.0 * s * np.diagonal(rt_g_r, axis1=-2, axis2=-1)
    g_rot = (g + np.swapaxes(g, -1, -2)) @ (rot * (s * s)[..., None, :])
    return g_s, quat_to_rot_vjp(q, g_rot)


@dataclass
class Conic2D:
    """A single projected Gaussian: pixel mean, inverse-covariance, depth."""

    mean: np.ndarray
    a: float
    b: float
    c: float
    z: float


@dataclass
class ProjectionCache:
    """Intermediates saved by project_gaussians for its VJP."""

    t: np.ndarray
    m: np.ndarray
    sigma: np.ndarray
    conic: np.ndarray
    valid: np.ndarray
    fx: float
    fy: float
    rotation: np.ndarray


@dataclass
class ProjectedGaussians:
    """Batch of screen-space splat parameters with a validity mask."""

    mean2d: np.ndarray
    conic: np.ndarray
    z: np.ndarray
    valid: np.ndarray
    cache: ProjectionCache = field(repr=False)


def project_gaussians(camera: Camera, mu: np.ndarray,
                      sigma: np.ndarray) -> ProjectedGaussians:
    """EWA-project world Gaussians (mu: (N,3), sigma: (N,3,3)) to the screen.

    Gaussians at camera depth <= near are flagged invalid; their output rows
    are zero and their VJP rows stay zero.  The screen covariance is
    J W Sigma W^T J^T + LOWPASS * I with W the world-to-camera rotation and J
    the pinhole Jacobian at the mean; the conic returned is its inverse,
    packed as (a, b, c) for the symmetric 2x2 [[a, b], [b, c]].
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    n = mu.shape[0]
    rot = camera.rotation
    t = (mu - camera.position) @ rot.T
    valid = t[:, 2] > camera.near
    tz = np.where(valid, t[:, 2], 1.0)
    tx, ty = t[:, 0], t[:, 1]

    mean2d = np.zeros((n, 2))
    mean2d[:, 0] = camera.fx * tx / tz + camera.cx
    mean2d[:, 1] = camera.fy * ty / tz + camera.cy

    j = np.zeros((n, 2, 3))
    j[:, 0, 0] = camera.fx / tz
    j[:, 0, 2] = -camera.fx * tx / (tz * tz)
    j[:, 1, 1] = camera.fy / tz
    j[:, 1, 2] = -camera.fy * ty / (tz * tz)

    m = j @ rot
    cov2 = m @ sigma @ m.transpose(0, 2, 1)
    cov2[:, 0, 0] += LOWPASS
    cov2[:, 1, 1] += LOWPASS
    det = cov2[:, 0, 0] * cov2[:, 1, 1] - cov2[:, 0, 1] ** 2
    conic = np.zeros((n, 3))
    conic[:, 0] = cov2[:, 1, 1] / det
    conic[:, 1] = -cov2[:, 0, 1] / det
    conic[:, 2] = cov2[:, 0, 0] / det

    z = np.where(valid, t[:, 2], 0.0)
    off = ~valid
    mean2d[off] = 0.0
    conic[off] = 0.0
    cache = ProjectionCache(t=t, m=m, sigma=sigma, conic=conic, valid=valid,
                            fx=camera.fx, fy=camera.fy, rotation=rot)
    return ProjectedGaussians(mean2d=mean2d, conic=conic, z=z, valid=valid,
                              cache=cache)


def project_gaussians_vjp(cache: ProjectionCache, g_mean2d: np.ndarray,
                          g_conic: np.ndarray,
                          g_z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pull grads on (mean2d, conic, z) back to (mu, Sigma).

    Returns full-matrix gradients on Sigma (suitable for chaining into
    build_covariance_vjp).  Invalid rows give zeros.
    """
    t, m, sigma = cache.t, cache.m, cache.sigma
    fx, fy, rot = cache.fx, cache.fy, cache.rotation
    valid = cache.valid
    n = t.shape[0]
    tz = np.where(valid, t[:, 2], 1.0)
    tx, ty = t[:, 0], t[:, 1]

    ga = np.where(valid, g_conic[:, 0], 0.0)
    gb = np.where(valid, g_conic[:, 1], 0.0)
    gc = np.where(valid, g_conic[:, 2], 0.0)
    gmx = np.where(valid, g_mean2d[:, 0], 0.0)
    gmy = np.where(valid, g_mean2d[:, 1], 0.0)
    gz = np.where(valid, g_z, 0.0)

    cm = np.empty((n, 2, 2))
    cm[:, 0, 0] = cache.conic[:, 0]
    cm[:, 0, 1] = cache.conic[:, 1]
    cm[:, 1, 0] = cache.conic[:, 1]
    cm[:, 1, 1] = cache.conic[:, 2]
    g_cm = np.zeros((n, 2, 2))
    g_cm[:, 0, 0] = ga
    g_cm[:, 0, 1] = gb
    g_cm[:, 1, 1] = gc
    # conic = inv(cov2):  d inv(S) = -inv(S) dS inv(S).  The forward reads the
    # off-diagonal of cov2 from entry (0,1) only, so that entry absorbs both
    # off-diagonal sensitivities of the matrix inverse.
    g_sym = -cm @ g_cm @ cm
    g_cov2 = np.zeros_like(g_sym)
    g_cov2[:, 0, 0] = g_sym[:, 0, 0]
    g_cov2[:, 0, 1] = g_sym[:, 0, 1] + g_sym[:, 1, 0]
    g_cov2[:, 1, 1] = g_sym[:, 1, 1]
    g_sigma = m.transpose(0, 2, 1) @ g_cov2 @ m
    g_m = (g_cov2 + g_cov2.transpose(0, 2, 1)) @ m @ sigma
    g_j = g_m @ rot.T

    inv_z2 = 1.0 / (tz * tz)
    gtx = -g_j[:, 0, 2] * fx * inv_z2 + gmx * fx / tz
    gty = -g_j[:, 1, 2] * fy * inv_z2 + gmy * fy / tz
    gtz = (-g_j[:, 0, 0] * fx * inv_z2 - g_j[:, 1, 1] * fy * inv_z2
           + 2.0 * g_j[:, 0, 2] * fx * tx * inv_z2 / tz
           + 2.0 * g_j[:, 1, 2] * fy * ty * inv_z2 / tz
           - gmx * fx * tx * inv_z2 - gmy * fy * ty * inv_z2
           + gz)
    g_t = np.stack([gtx, gty, gtz], axis=-1)
    g_mu = g_t @ rot
    off = ~valid
    g_mu[off] = 0.0
    g_sigma[off] = 0.0
    return g_mu, g_sigma


def project_gaussian(camera: Camera, mu: np.ndarray,
                     sigma: np.ndarray) -> Conic2D | None:
    """Project one Gaussian; returns None when the mean is behind near."""
    out = project_gaussians(camera, np.asarray(mu, dtype=np.float64)[None],
                            np.asarray(sigma, dtype=np.float64)[None])
    if not out.valid[0]:
        return None
    return Conic2D(mean=out.mean2d[0], a=out.conic[0, 0], b=out.conic[0, 1],
                   c=out.conic[0, 2], z=out.z[0])
