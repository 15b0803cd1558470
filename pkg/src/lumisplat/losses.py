"""Training losses and image metrics, each returning analytic gradients.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5) restricted to
fully-valid window positions; its gradient is the closed-form expression
for the windowed statistics, scattered back through the adjoint of the
valid-region convolution.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ValidationError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
_HALF = SSIM_WINDOW // 2


@dataclass
class LossWeights:
    """Blend weights for the total objective and the scale hinge cutoff."""

    lambda1: float = 0.2
    lambda2: float = 0.2
    lambda3: float = 0.01
    tau_s: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.lambda1 <= 1.0:
            raise ValidationError("lambda1 must lie in [0, 1]")
        if self.lambda2 < 0.0 or self.lambda3 < 0.0:
            raise ValidationError("lambda2 and lambda3 must be >= 0")
        if self.tau_s <= 0.0:
            raise ValidationError("tau_s must be positive")


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")


def l1_loss(rendered: np.ndarray, target: np.ndarray):
    """Mean absolute difference and its subgradient (0 at exact ties)."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(rendered, target)
    diff = rendered - target
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad


def _gauss_window() -> np.ndarray:
    x = np.arange(SSIM_WINDOW) - _HALF
    w = np.exp(-(x ** 2) / (2.0 * SSIM_SIGMA ** 2))
    return w / w.sum()


_WINDOW = _gauss_window()


def _valid_filter(img: np.ndarray) -> np.ndarray:
    out = correlate1d(img, _WINDOW, axis=0, mode="constant")
    out = correlate1d(out, _WINDOW, axis=1, mode="constant")
    return out[_HALF:-_HALF, _HALF:-_HALF]


def _valid_filter_adjoint(grad: np.ndarray, shape) -> np.ndarray:
    full = np.zeros(shape)
    full[_HALF:-_HALF, _HALF:-_HALF] = grad
    out = correlate1d(full, _WINDOW, axis=0, mode="constant")
    return correlate1d(out, _WINDOW, axis=1, mode="constant")


def _ssim_channel(x: np.ndarray, y: np.ndarray):
    """Per-window SSIM map plus the pieces its gradient needs."""
    mu_x = _valid_filter(x)
    mu_y = _valid_filter(y)
    xx = _valid_filter(x * x) - mu_x * mu_x
    yy = _valid_filter(y * y) - mu_y * mu_y
    xy = _valid_filter(x * y) - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + SSIM_C1
    a2 = 2.0 * xy + SSIM_C2
    b1 = mu_x * mu_x + mu_y * mu_y + SSIM_C1
    b2 = xx + yy + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    return s, (mu_x, mu_y, a1, a2, b1, b2)


def ssim(rendered: np.ndarray, target: np.ndarray) -> float:
    """Mean SSIM over channels and valid window positions."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(rendered, target)
    if rendered.ndim == 2:
        rendered = rendered[..., None]
        target = target[..., None]
    if rendered.shape[0] < SSIM_WINDOW or rendered.shape[1] < SSIM_WINDOW:
        raise ValidationError("image smaller than the SSIM window")
    total = 0.0
    for ch in range(rendered.shape[2]):
        s, _ = _ssim_channel(rendered[..., ch], target[..., ch])
        total += float(s.mean())
    return total / rendered.shape[2]


def dssim_loss(rendered: np.ndarray, target: np.ndarray):
    """(1 - SSIM)/2 with the analytic gradient w.r.t. `rendered`."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(rendered, target)
    if rendered.shape[0] < SSIM_WINDOW or rendered.shape[1] < SSIM_WINDOW:
        raise ValidationError("image smaller than the SSIM window")
    squeeze = rendered.ndim == 2
    x3 = rendered[..., None] if squeeze else rendered
    y3 = target[..., None] if squeeze else target
    n_ch = x3.shape[2]
    grad = np.zeros_like(x3)
    total = 0.0
    n_pos = (x3.shape[0] - 2 * _HALF) * (x3.shape[1] - 2 * _HALF) * n_ch
    for ch in range(n_ch):
        x, y = x3[..., ch], y3[..., ch]
        s, (mu_x, mu_y, a1, a2, b1, b2) = _ssim_channel(x, y)
        total += float(s.mean())
        # ds/dx_i = w_(i-p) * (c0 + c1*x_i + c2*y_i) summed over windows p
        c1 = -2.0 * s / b2
        c2 = 2.0 * a1 / (b1 * b2)
        c0 = (2.0 * mu_y * (a2 - a1) / (b1 * b2)
              + 2.0 * mu_x * s * (1.0 / b2 - 1.0 / b1))
        g = (_valid_filter_adjoint(c0, x.shape)
             + x * _valid_filter_adjoint(c1, x.shape)
             + y * _valid_filter_adjoint(c2, x.shape))
        grad[..., ch] = -0.5 * g / n_pos
    loss = 0.5 * (1.0 - total / n_ch)
    return loss, (grad[..., 0] if squeeze else grad)


def depth_loss(rendered: np.ndarray, target: np.ndarray, mask: np.ndarray):
    """Masked mean absolute depth error: (loss, grad, mask_empty)."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(rendered, target)
    _check_same_shape(rendered, np.asarray(mask))
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    grad = np.zeros_like(rendered)
    if count == 0:
        return 0.0, grad, True
    diff = np.where(mask, rendered - target, 0.0)
    loss = float(np.abs(diff).sum() / count)
    grad[mask] = np.sign(diff[mask]) / count
    return loss, grad, False


def scale_loss(scales: np.ndarray, tau_s: float):
    """Hinge above the voxel size, averaged over Gaussians: (loss, grad)."""
    scales = np.asarray(scales, dtype=np.float64)
    if scales.size == 0:
        return 0.0, np.zeros_like(scales)
    flat = scales.reshape(-1, scales.shape[-1])
    excess = np.maximum(0.0, flat - tau_s)
    n = flat.shape[0]
    loss = float(excess.sum() / n)
    grad = ((flat > tau_s) / n).reshape(scales.shape)
    return loss, grad


def total_loss(l1: float, dssim: float, depth: float, scale: float,
               weights: LossWeights):
    """Weighted objective and the coefficient on each part (for backward)."""
    coeffs = {"l1": 1.0 - weights.lambda1, "dssim": weights.lambda1,
              "depth": weights.lambda2, "scale": weights.lambda3}
    value = (coeffs["l1"] * l1 + coeffs["dssim"] * dssim
             + coeffs["depth"] * depth + coeffs["scale"] * scale)
    return value, coeffs


def psnr(rendered: np.ndarray, target: np.ndarray) -> float:
    """10*log10(1/MSE) for [0,1] images; +inf when the images are equal."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(rendered, target)
    mse = float(np.mean((rendered - target) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def depth_mse(rendered: np.ndarray, target: np.ndarray,
              mask: np.ndarray) -> float:
    """Mean squared depth error over masked pixels."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_shape(rendered, target)
    mask = np.asarray(mask, dtype=bool)
    _check_same_shape(rendered, mask)
    count = int(mask.sum())
    if count == 0:
        raise ValidationError("depth_mse over an empty mask")
    diff = rendered[mask] - target[mask]
    return float(np.dot(diff, diff) / count)
