"""Dataset manifest: a single JSON file at the dataset root listing shared
intrinsics, the depth scale, and per-frame image/depth paths with 4x4
world-from-camera poses and train/test split tags.
"""

import json
import os

import numpy as np

from ..dataset import SPLITS, Frame
from ..errors import ValidationError
from ..geom import Camera
from .images import read_pfm, read_ppm

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
ROTATION_TOL = 1e-6


def _check_pose(matrix: np.ndarray, label: str) -> None:
    if matrix.shape != (4, 4):
        raise ValidationError(f"{label}: pose must be 4x4, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{label}: pose contains non-finite values")
    if np.abs(matrix[3] - (0.0, 0.0, 0.0, 1.0)).max() > ROTATION_TOL:
        raise ValidationError(f"{label}: pose bottom row must be [0 0 0 1]")
    rot = matrix[:3, :3]
    err = np.abs(rot @ rot.T - np.eye(3)).max()
    if err > ROTATION_TOL:
        raise ValidationError(
            f"{label}: rotation block is not orthonormal (deviation {err:.3g})")
    if np.linalg.det(rot) < 0.0:
        raise ValidationError(
            f"{label}: rotation block is a reflection (determinant -1)")


def write_manifest(root: str, intrinsics: dict, records: list,
                   depth_scale: float = 1.0) -> str:
    """Write the dataset manifest under `root` and return its path.

    Each record is a dict with keys image, depth (path or None),
    world_from_camera (4x4 nested lists), and split.
    """
    payload = {
        "version": MANIFEST_VERSION,
        "intrinsics": {k: intrinsics[k] for k in
                       ("fx", "fy", "cx", "cy", "width", "height")},
        "depth_scale": depth_scale,
        "frames": records,
    }
    path = os.path.join(root, MANIFEST_NAME)
    with open(path, "w", encoding="ascii") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_dataset(root: str):
    """Read a dataset directory into (frames, base_camera).

    Frames carry decoded RGB in [0, 1] and metric depth (stored values times
    the manifest depth scale); `base_camera` holds the shared intrinsics with
    an identity pose.
    """
    path = os.path.join(root, MANIFEST_NAME)
    if not os.path.isfile(path):
        raise ValidationError(f"{path}: manifest not found")
    try:
        with open(path, "r", encoding="ascii") as f:
            doc = json.load(f)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: unreadable manifest ({exc})") from exc

    if doc.get("version") != MANIFEST_VERSION:
        raise ValidationError(
            f"{path}: unsupported manifest version {doc.get('version')!r}")
    try:
        intr = doc["intrinsics"]
        fx, fy = float(intr["fx"]), float(intr["fy"])
        cx, cy = float(intr["cx"]), float(intr["cy"])
        width, height = int(intr["width"]), int(intr["height"])
        depth_scale = float(doc["depth_scale"])
        frame_docs = doc["frames"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed manifest ({exc})") from exc
    if depth_scale <= 0.0:
        raise ValidationError(f"{path}: depth_scale must be positive")
    if not frame_docs:
        raise ValidationError(f"{path}: manifest lists no frames")

    frames = []
    for i, rec in enumerate(frame_docs):
        label = f"{path}: frame {i}"
        try:
            image_rel = rec["image"]
            depth_rel = rec.get("depth")
            pose = np.asarray(rec["world_from_camera"], dtype=np.float64)
            split = rec["split"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{label}: malformed record ({exc})") from exc
        if split not in SPLITS:
            raise ValidationError(f"{label}: unknown split tag {split!r}")
        _check_pose(pose, label)

        image_path = os.path.join(root, image_rel)
        if not os.path.isfile(image_path):
            raise ValidationError(f"{label}: missing image {image_path}")
        image = read_ppm(image_path)
        if image.shape[:2] != (height, width):
            raise ValidationError(
                f"{label}: image is {image.shape[1]}x{image.shape[0]}, "
                f"manifest says {width}x{height}")

        depth = None
        if depth_rel is not None:
            depth_path = os.path.join(root, depth_rel)
            if not os.path.isfile(depth_path):
                raise ValidationError(f"{label}: missing depth {depth_path}")
            depth = read_pfm(depth_path) * depth_scale
            if depth.shape != (height, width):
                raise ValidationError(
                    f"{label}: depth is {depth.shape[1]}x{depth.shape[0]}, "
                    f"manifest says {width}x{height}")

        camera = Camera.from_world_from_camera(pose, fx=fx, fy=fy, cx=cx,
                                               cy=cy, width=width,
                                               height=height)
        frames.append(Frame(index=i, camera=camera, image=image, depth=depth,
                            split=split))

    base = Camera(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height,
                  rotation=np.eye(3), position=np.zeros(3))
    return frames, base
