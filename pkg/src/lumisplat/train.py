"""Optimization loop: Adam over parameter groups, loss schedules, held-out
evaluation, and the finite-difference gradient check harness.

Runs are bitwise-reproducible for a fixed seed: the only randomness is the
per-epoch frame permutation, metric log lines carry no timestamps, and all
reductions happen in fixed order.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dataset import Frame, split_frames
from .errors import NumericalError, ValidationError
from .losses import (LossWeights, depth_loss, depth_mse, dssim_loss, l1_loss,
                     psnr, scale_loss, ssim, total_loss)
from .pipeline import backward_view, render_view
from .raster import STOP_T
from .scene import SceneModel, save_checkpoint

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-15
SCALE_FLOOR = 1e-6
COVERAGE_MIN = 0.5


@dataclass
class TrainConfig:
    iterations: int = 3000
    seed: int = 0
    eval_interval: int = 500
    log_interval: int = 50
    use_depth_loss: bool = True
    lambda1: float = 0.2
    lambda2_start: float = 0.2
    lambda2_end: float = 0.01
    lambda3: float = 0.01
    stop_t: float = STOP_T
    train_positions: bool = False
    lr_anchor_positions: float = 1e-4
    lr_anchor_offsets: float = 1e-2
    lr_anchor_features: float = 5e-3
    lr_anchor_scales: float = 5e-3
    lr_mlp: float = 2e-3
    lr_decay_floor: float = 0.1

    def __post_init__(self):
        if self.iterations < 0:
            raise ValidationError("iterations must be >= 0")
        if self.eval_interval < 1 or self.log_interval < 1:
            raise ValidationError("intervals must be >= 1")
        for name in ("lr_anchor_positions", "lr_anchor_offsets",
                     "lr_anchor_features", "lr_anchor_scales", "lr_mlp"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 < self.lr_decay_floor <= 1.0:
            raise ValidationError("lr_decay_floor must lie in (0, 1]")
        if self.lambda2_start <= 0.0 or self.lambda2_end <= 0.0:
            raise ValidationError("lambda2 endpoints must be positive")

    def group_lr(self, name: str) -> float:
        return {"anchor_positions": self.lr_anchor_positions,
                "anchor_offsets": self.lr_anchor_offsets,
                "anchor_features": self.lr_anchor_features,
                "anchor_scales": self.lr_anchor_scales}.get(name, self.lr_mlp)


def lambda2_schedule(iteration: int, total: int, start: float = 0.2,
                     end: float = 0.01) -> float:
    """Exponential interpolation start -> end over the run."""
    if not 0 <= iteration <= total:
        raise ValidationError("iteration outside [0, total]")
    if total == 0:
        return start
    return start * (end / start) ** (iteration / total)


def lr_decay(iteration: int, total: int, floor: float = 0.1) -> float:
    """Cosine decay from 1 to `floor` over the run."""
    if total == 0:
        return 1.0
    t = iteration / total
    return floor + (1.0 - floor) * 0.5 * (1.0 + math.cos(math.pi * t))


class AdamState:
    """First/second moment buffers mirroring one parameter group."""

    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step = 0


def adam_step(params, grads, state: AdamState, lr: float,
              beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
              eps: float = ADAM_EPS, group: str = "params") -> None:
    """Bias-corrected in-place Adam update for one parameter group."""
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in group {group!r}")
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def depth_supervision_mask(frame: Frame, transmittance: np.ndarray):
    """Pixels with a valid measurement and enough rendered coverage."""
    return frame.valid_depth() & (1.0 - transmittance >= COVERAGE_MIN)


def _fmt(value: float) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _kv_line(pairs) -> str:
    return " ".join(f"{k}={_fmt(v)}" for k, v in pairs)


@dataclass
class TrainResult:
    model: SceneModel
    log_lines: list
    final_metrics: dict = field(default_factory=dict)


def evaluate_frames(model: SceneModel, frames, stop_t: float = STOP_T,
                    backend: str = None) -> dict:
    """Mean PSNR/SSIM and coverage-masked depth MSE over `frames`."""
    psnrs, ssims, dmses = [], [], []
    for frame in frames:
        result = render_view(model, frame.camera, stop_t=stop_t,
                             backend=backend)
        psnrs.append(psnr(result.buffers.color, frame.image))
        ssims.append(ssim(result.buffers.color, frame.image))
        if frame.depth is not None:
            mask = depth_supervision_mask(frame, result.buffers.transmittance)
            if mask.any():
                dmses.append(depth_mse(result.buffers.depth, frame.depth,
                                       mask))
    return {"psnr": float(np.mean(psnrs)) if psnrs else math.nan,
            "ssim": float(np.mean(ssims)) if ssims else math.nan,
            "depth_mse": float(np.mean(dmses)) if dmses else math.nan}


def _loss_pass(model, frame, weights, use_depth, stop_t, backend):
    """Forward render + losses; returns scalars, upstream grads, result."""
    result = render_view(model, frame.camera, stop_t=stop_t, backend=backend)
    l1, g_l1 = l1_loss(result.buffers.color, frame.image)
    ds, g_ds = dssim_loss(result.buffers.color, frame.image)
    if use_depth:
        mask = depth_supervision_mask(frame, result.buffers.transmittance)
        dep, g_dep, _ = depth_loss(result.buffers.depth, frame.depth, mask)
    else:
        dep, g_dep = 0.0, np.zeros_like(result.buffers.depth)
    sc, g_sc = scale_loss(result.batch.scale, weights.tau_s)
    value, coeff = total_loss(l1, ds, dep, sc, weights)
    g_image = coeff["l1"] * g_l1 + coeff["dssim"] * g_ds
    g_depth_img = coeff["depth"] * g_dep
    g_scale = coeff["scale"] * g_sc
    parts = {"total": value, "l1": l1, "dssim": ds, "depth": dep, "scale": sc}
    return parts, g_image, g_depth_img, g_scale, result


def train(model: SceneModel, frames, config: TrainConfig,
          checkpoint_path: Optional[str] = None,
          backend: str = None,
          log_fn: Optional[Callable[[str], None]] = None) -> TrainResult:
    """Optimize `model` on the train split; returns the final metric log."""
    train_frames, test_frames = split_frames(frames)
    if not train_frames:
        raise ValidationError("dataset has no training frames")
    if config.use_depth_loss:
        for frame in train_frames:
            if frame.depth is None:
                raise ValidationError(
                    f"use_depth_loss requires depth maps; frame "
                    f"{frame.index} has none")

    lines = []

    def emit(pairs):
        line = _kv_line(pairs)
        lines.append(line)
        if log_fn is not None:
            log_fn(line)

    emit([("config", "train"), ("iterations", config.iterations),
          ("seed", config.seed), ("use_depth_loss", config.use_depth_loss),
          ("geometry_mode", model.config.geometry_mode),
          ("appearance_mode", model.config.appearance_mode),
          ("lambda1", config.lambda1), ("lambda2_start", config.lambda2_start),
          ("lambda2_end", config.lambda2_end), ("lambda3", config.lambda3),
          ("train_frames", len(train_frames)),
          ("test_frames", len(test_frames)),
          ("anchors", len(model.anchors))])

    rng = np.random.default_rng(config.seed)
    groups = model.param_groups()
    states = {name: AdamState(params) for name, params in groups.items()}
    tau_s = model.voxel_size
    final_metrics = {}
    order = []

    try:
        for it in range(config.iterations):
            if not order:
                order = list(rng.permutation(len(train_frames)))
            frame = train_frames[order.pop(0)]
            lam2 = lambda2_schedule(it, config.iterations,
                                    config.lambda2_start, config.lambda2_end)
            weights = LossWeights(lambda1=config.lambda1, lambda2=lam2,
                                  lambda3=config.lambda3, tau_s=tau_s)
            parts, g_image, g_depth_img, g_scale, result = _loss_pass(
                model, frame, weights, config.use_depth_loss, config.stop_t,
                backend)
            if not math.isfinite(parts["total"]):
                raise NumericalError(
                    f"non-finite loss at iteration {it}")
            grads = backward_view(model, frame.camera, result, g_image,
                                  g_depth_img, g_scale, backend=backend)
            for name in groups:
                for g in grads[name]:
                    if not np.all(np.isfinite(g)):
                        raise NumericalError(
                            f"non-finite gradient in group {name!r} at "
                            f"iteration {it}")
            decay = lr_decay(it, config.iterations, config.lr_decay_floor)
            for name, params in groups.items():
                if name == "anchor_positions" and not config.train_positions:
                    continue
                adam_step(params, grads[name], states[name],
                          config.group_lr(name) * decay, group=name)
            np.maximum(model.anchors.scales, SCALE_FLOOR,
                       out=model.anchors.scales)

            last = it + 1 == config.iterations
            if (it + 1) % config.log_interval == 0 or last:
                emit([("iter", it + 1), ("frame", frame.index),
                      ("lambda2", lam2)] + list(parts.items()))
            if ((it + 1) % config.eval_interval == 0 or last) and test_frames:
                metrics = evaluate_frames(model, test_frames, config.stop_t,
                                          backend)
                pairs = [("iter", it + 1),
                         ("test_psnr", metrics["psnr"]),
                         ("test_ssim", metrics["ssim"]),
                         ("test_depth_mse", metrics["depth_mse"])]
                if last:
                    train_metrics = evaluate_frames(model, train_frames,
                                                    config.stop_t, backend)
                    pairs.append(("train_psnr", train_metrics["psnr"]))
                    final_metrics = dict(metrics)
                    final_metrics["train_psnr"] = train_metrics["psnr"]
                emit(pairs)
    except NumericalError:
        # Parameters are only mutated after their gradients pass the finite
        # check, so the in-memory model is the last good state.
        if checkpoint_path is not None:
            save_checkpoint(model, checkpoint_path)
        raise

    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    return TrainResult(model=model, log_lines=lines,
                       final_metrics=final_metrics)


def max_relative_error(loss_fn, params, grads, rng, n_probe: int = 20,
                       h: float = 1e-6) -> float:
    """Central-difference check of `grads` for one parameter group."""
    sizes = [p.size for p in params]
    total = int(np.sum(sizes))
    n_probe = min(n_probe, total)
    picks = rng.choice(total, size=n_probe, replace=False)
    bounds = np.cumsum([0] + sizes)
    worst = 0.0
    for pick in picks:
        gi = int(np.searchsorted(bounds, pick, side="right")) - 1
        flat = params[gi].reshape(-1)
        idx = pick - bounds[gi]
        old = flat[idx]
        flat[idx] = old + h
        up = loss_fn()
        flat[idx] = old - h
        down = loss_fn()
        flat[idx] = old
        num = (up - down) / (2.0 * h)
        ana = grads[gi].reshape(-1)[idx]
        worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), 1e-6))
    return worst


def gradcheck(model: SceneModel, frame: Frame, weights: LossWeights,
              use_depth_loss: bool = True, n_probe: int = 20,
              h: float = 1e-6, seed: int = 0, include_positions: bool = False,
              stop_t: float = 0.0, backend: str = None) -> dict:
    """Full-pipeline gradient check; returns per-group max relative error.

    Early termination defaults to off so finite differences never straddle
    the stop threshold; the depth-coverage mask is frozen at the unperturbed
    render for the same reason.
    """
    base = render_view(model, frame.camera, stop_t=stop_t, backend=backend)
    if use_depth_loss:
        mask = depth_supervision_mask(frame, base.buffers.transmittance)
    tau = weights.tau_s

    def loss_fn() -> float:
        result = render_view(model, frame.camera, stop_t=stop_t,
                             backend=backend)
        l1, _ = l1_loss(result.buffers.color, frame.image)
        ds, _ = dssim_loss(result.buffers.color, frame.image)
        dep = 0.0
        if use_depth_loss:
            dep, _, _ = depth_loss(result.buffers.depth, frame.depth, mask)
        sc, _ = scale_loss(result.batch.scale, tau)
        return total_loss(l1, ds, dep, sc, weights)[0]

    l1, g_l1 = l1_loss(base.buffers.color, frame.image)
    ds, g_ds = dssim_loss(base.buffers.color, frame.image)
    if use_depth_loss:
        dep, g_dep, _ = depth_loss(base.buffers.depth, frame.depth, mask)
    else:
        dep, g_dep = 0.0, np.zeros_like(base.buffers.depth)
    sc, g_sc = scale_loss(base.batch.scale, tau)
    _, coeff = total_loss(l1, ds, dep, sc, weights)
    grads = backward_view(model, frame.camera, base,
                          coeff["l1"] * g_l1 + coeff["dssim"] * g_ds,
                          coeff["depth"] * g_dep, coeff["scale"] * g_sc,
                          backend=backend)

    rng = np.random.default_rng(seed)
    report = {}
    for name, params in model.param_groups().items():
        if name == "anchor_positions" and not include_positions:
            continue
        report[name] = max_relative_error(loss_fn, params, grads[name], rng,
                                         n_probe=n_probe, h=h)
    return report
