"""End-to-end differentiable render path: anchors -> Gaussians ->
projection -> tiled blending, with the matching backward composition."""

from dataclasses import dataclass

import numpy as np

from .geom import (Camera, ProjectedGaussians, build_covariance,
                   build_covariance_vjp, project_gaussians,
                   project_gaussians_vjp)
from .raster import (STOP_T, RenderBuffers, SplatBatch, rasterize,
                     rasterize_backward)
from .scene import SceneModel
from .scene.model import GaussianBatch, GaussianGrads, GenerateCache


@dataclass
class RenderResult:
    """Everything the forward pass produced, retained for backward."""

    buffers: RenderBuffers
    batch: GaussianBatch
    gen_cache: GenerateCache
    projection: ProjectedGaussians
    splats: SplatBatch
    stop_t: float


def render_view(model: SceneModel, camera: Camera, stop_t: float = STOP_T,
                backend: str = None) -> RenderResult:
    batch, gen_cache = model.generate(camera)
    cov = build_covariance(batch.scale, batch.quat)
    projection = project_gaussians(camera, batch.mean, cov)
    rows = np.nonzero(projection.valid)[0]
    splats = SplatBatch(mean2d=projection.mean2d[rows],
                        conic=projection.conic[rows],
                        z=projection.z[rows],
                        alpha=batch.alpha[rows],
                        color=batch.color[rows],
                        source=rows)
    buffers = rasterize(splats, camera.width, camera.height, stop_t=stop_t,
                        backend=backend)
    return RenderResult(buffers=buffers, batch=batch, gen_cache=gen_cache,
                        projection=projection, splats=splats, stop_t=stop_t)


def backward_view(model: SceneModel, camera: Camera, result: RenderResult,
                  g_image: np.ndarray, g_depth: np.ndarray,
                  g_gauss_scale: np.ndarray = None,
                  backend: str = None) -> dict:
    """Pull image/depth gradients back to every parameter group.

    `g_gauss_scale` optionally adds a direct gradient on the emitted
    world-space Gaussian scales (the scale regularizer's path, which
    bypasses the rasterizer).
    """
    batch, splats = result.batch, result.splats
    n = len(batch)
    sg = rasterize_backward(splats, result.buffers, g_image, g_depth,
                            camera.width, camera.height,
                            stop_t=result.stop_t, backend=backend)
    g_mean2d = np.zeros((n, 2))
    g_conic = np.zeros((n, 3))
    g_z = np.zeros(n)
    g_alpha = np.zeros(n)
    g_color = np.zeros((n, 3))
    rows = splats.source
    g_mean2d[rows] = sg.mean2d
    g_conic[rows] = sg.conic
    g_z[rows] = sg.z
    g_alpha[rows] = sg.alpha
    g_color[rows] = sg.color

    g_mu, g_cov = project_gaussians_vjp(result.projection.cache, g_mean2d,
                                        g_conic, g_z)
    g_scale, g_quat = build_covariance_vjp(batch.scale, batch.quat, g_cov)
    if g_gauss_scale is not None:
        g_scale = g_scale + g_gauss_scale
    grads = GaussianGrads(mean=g_mu, scale=g_scale, quat=g_quat,
                          alpha=g_alpha, color=g_color)
    return model.backward(result.gen_cache, grads)
