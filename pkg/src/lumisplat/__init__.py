"""Differentiable Gaussian splatting for scenes lit by a camera-mounted headlight.

The engine represents a scene as a set of anchors, each decoding into a small
group of 3D Gaussians whose attributes are predicted by tiny MLPs from the
anchor feature and the current viewing geometry.  Rendering is EWA splatting
with front-to-back alpha blending; every stage ships an analytic backward pass
so the whole pipeline trains by gradient descent on posed RGB-D frames.
"""

__version__ = "0.1.0"

from . import errors

__all__ = ["errors", "__version__"]
