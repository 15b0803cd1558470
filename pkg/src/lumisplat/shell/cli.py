"""Command-line front end: `lumisplat synth|train|render|eval|gradcheck`.

Every subcommand takes `--config <file>` plus `--set key=value` overrides,
echoes the effective config hash, and maps validation problems to exit code 1
and numerical failures to exit code 2.
"""

import argparse
import json
import os
import sys

import numpy as np

from ..errors import NumericalError, ValidationError
from ..lightsim import (HeadlightModel, TrajectoryConfig, TubeScene,
                        generate_dataset)
from ..losses import LossWeights, depth_mse, psnr, ssim
from ..pipeline import render_view
from ..scene import init_from_depth, load_checkpoint
from ..train import gradcheck, train
from .config import config_hash, resolve_config, save_config
from .images import read_pfm, read_ppm, write_pfm, write_ppm
from .manifest import load_dataset


def _resolve(args):
    config = resolve_config(args.config, args.overrides)
    print(f"config_hash={config_hash(config)}")
    return config


def _select(frames, split: str):
    if split == "all":
        return frames
    return [f for f in frames if f.split == split]


def cmd_synth(args) -> int:
    config = _resolve(args)
    s = config.synth
    scene = TubeScene(radius=s.radius, fold_amp=s.fold_amp,
                      fold_freq=s.fold_freq, curve_amp=s.curve_amp,
                      curve_freq=s.curve_freq)
    light = HeadlightModel(k1=s.k1, k2=s.k2, intensity=s.intensity,
                           falloff=s.falloff)
    trajectory = TrajectoryConfig(z_start=s.z_start, z_end=s.z_end,
                                  pitch_jitter=s.pitch_jitter,
                                  roll_jitter=s.roll_jitter)
    path = generate_dataset(scene, light, args.out, n_frames=s.n_frames,
                            width=s.width, height=s.height, fx=s.fx, fy=s.fy,
                            trajectory=trajectory, seed=s.seed, t_max=s.t_max,
                            max_steps=s.max_steps)
    print(f"manifest={path}")
    return 0


def _init_model(config, frames):
    """Voxelized-depth initialization from the training frames."""
    depths, cameras = [], []
    for frame in frames:
        if frame.split == "train" and frame.depth is not None:
            depths.append(frame.depth)
            cameras.append(frame.camera)
    if not depths:
        raise ValidationError(
            "initialization needs at least one training frame with depth")
    return init_from_depth(depths, cameras, config.model.voxel_size,
                           config.model.decoder(),
                           seed=config.model.init_seed)


def cmd_train(args) -> int:
    config = _resolve(args)
    frames, _ = load_dataset(args.data)
    model = _init_model(config, frames)
    os.makedirs(args.out, exist_ok=True)
    checkpoint = os.path.join(args.out, "checkpoint.lspl")
    log_path = os.path.join(args.out, "train.log")
    save_config(config, os.path.join(args.out, "config.json"))
    try:
        result = train(model, frames, config.train,
                       checkpoint_path=checkpoint, backend=config.backend,
                       log_fn=print)
    except NumericalError:
        print(f"checkpoint={checkpoint}", file=sys.stderr)
        raise
    with open(log_path, "w", encoding="ascii") as f:
        f.write("\n".join(result.log_lines) + "\n")
    print(f"checkpoint={checkpoint}")
    return 0


def cmd_render(args) -> int:
    config = _resolve(args)
    model = load_checkpoint(args.checkpoint)
    frames, _ = load_dataset(args.data)
    frames = _select(frames, args.split)
    if not frames:
        raise ValidationError(f"no frames in split {args.split!r}")
    for sub in ("images", "depths", "alphas", "depth_error"):
        os.makedirs(os.path.join(args.out, sub), exist_ok=True)
    for frame in frames:
        result = render_view(model, frame.camera, stop_t=config.train.stop_t,
                             backend=config.backend)
        tag = f"frame_{frame.index:04d}"
        write_ppm(os.path.join(args.out, "images", f"{tag}.ppm"),
                  np.clip(result.buffers.color, 0.0, 1.0))
        write_pfm(os.path.join(args.out, "depths", f"{tag}.pfm"),
                  result.buffers.depth)
        write_pfm(os.path.join(args.out, "alphas", f"{tag}.pfm"),
                  1.0 - result.buffers.transmittance)
        if frame.depth is not None:
            valid = frame.valid_depth()
            err = np.where(valid,
                           (result.buffers.depth - frame.depth) ** 2, 0.0)
            write_pfm(os.path.join(args.out, "depth_error", f"{tag}.pfm"),
                      err)
    print(f"rendered={len(frames)} out={args.out}")
    return 0


def cmd_eval(args) -> int:
    frames, _ = load_dataset(args.data)
    frames = _select(frames, args.split)
    if not frames:
        raise ValidationError(f"no frames in split {args.split!r}")
    rows = []
    for frame in frames:
        tag = f"frame_{frame.index:04d}"
        image_path = os.path.join(args.rendered, "images", f"{tag}.ppm")
        if not os.path.isfile(image_path):
            raise ValidationError(
                f"rendered frame missing for dataset frame {frame.index}: "
                f"{image_path}")
        image = read_ppm(image_path)
        row = {"index": frame.index, "split": frame.split,
               "psnr": psnr(image, frame.image),
               "ssim": ssim(image, frame.image)}
        depth_path = os.path.join(args.rendered, "depths", f"{tag}.pfm")
        if frame.depth is not None and os.path.isfile(depth_path):
            depth = read_pfm(depth_path)
            valid = frame.valid_depth()
            row["depth_mse_full"] = (depth_mse(depth, frame.depth, valid)
                                     if valid.any() else None)
            alpha_path = os.path.join(args.rendered, "alphas", f"{tag}.pfm")
            mask = valid
            if os.path.isfile(alpha_path):
                mask = valid & (read_pfm(alpha_path) >= 0.5)
            row["depth_mse_masked"] = (depth_mse(depth, frame.depth, mask)
                                       if mask.any() else None)
        rows.append(row)

    def column(name):
        vals = [r[name] for r in rows if r.get(name) is not None]
        return float(np.mean(vals)) if vals else None

    report = {"frames": rows,
              "mean": {name: column(name) for name in
                       ("psnr", "ssim", "depth_mse_full", "depth_mse_masked")}}
    out = args.out or os.path.join(args.rendered, "metrics.json")
    with open(out, "w", encoding="ascii") as f:
        json.dump(report, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"report={out}")
    for name, value in report["mean"].items():
        if value is not None:
            print(f"mean_{name}={value:.10g}")
    return 0


def cmd_gradcheck(args) -> int:
    config = _resolve(args)
    frames, _ = load_dataset(args.data)
    train_frames = [f for f in frames if f.split == "train"]
    if not 0 <= args.frame < len(train_frames):
        raise ValidationError(
            f"--frame {args.frame} outside the {len(train_frames)} training "
            f"frames")
    frame = train_frames[args.frame]
    model = _init_model(config, [frame])
    weights = LossWeights(lambda1=config.train.lambda1,
                          lambda2=config.train.lambda2_start,
                          lambda3=config.train.lambda3,
                          tau_s=model.voxel_size)
    report = gradcheck(model, frame, weights,
                       use_depth_loss=config.train.use_depth_loss,
                       n_probe=args.probes, seed=config.train.seed,
                       backend=config.backend)
    worst = 0.0
    for name in sorted(report):
        print(f"group={name} max_rel_err={report[name]:.6g}")
        worst = max(worst, report[name])
    print(f"gradcheck_pass={'true' if worst < args.tolerance else 'false'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lumisplat",
        description="Headlight-aware Gaussian splatting pipeline")
    subs = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("--config", help="JSON config file")
        sub.add_argument("--set", action="append", default=[],
                         dest="overrides", metavar="KEY=VALUE",
                         help="override one config value (dotted path)")

    p = subs.add_parser("synth", help="generate a synthetic tube dataset")
    common(p)
    p.add_argument("--out", required=True, help="dataset directory to write")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="optimize a scene on a dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory to write")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("render", help="render checkpoint at dataset poses")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset with poses")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split", default="all",
                   choices=("train", "test", "all"))
    p.set_defaults(func=cmd_render)

    p = subs.add_parser("eval", help="score rendered frames against a dataset")
    common(p)
    p.add_argument("--rendered", required=True, help="render output directory")
    p.add_argument("--data", required=True, help="reference dataset")
    p.add_argument("--out", help="report path (default rendered/metrics.json)")
    p.add_argument("--split", default="all",
                   choices=("train", "test", "all"))
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("gradcheck", help="finite-difference gradient audit")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--frame", type=int, default=0,
                   help="training-frame index to probe")
    p.add_argument("--probes", type=int, default=20,
                   help="coordinates sampled per parameter group")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
