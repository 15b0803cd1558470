"""In-memory dataset types shared by training, evaluation, and I/O."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .geom import Camera

SPLITS = ("train", "test")


@dataclass
class Frame:
    """One posed RGB(-D) observation.

    Depth uses 0 (or NaN) for invalid pixels; `valid_depth()` is the mask
    of usable measurements.
    """

    index: int
    camera: Camera
    image: np.ndarray
    depth: Optional[np.ndarray]
    split: str

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        expected = (self.camera.height, self.camera.width, 3)
        if self.image.shape != expected:
            raise ValidationError(
                f"frame {self.index}: image shape {self.image.shape} does not "
                f"match camera {expected}")
        if not np.all(np.isfinite(self.image)):
            raise ValidationError(f"frame {self.index}: non-finite image")
        if self.depth is not None:
            self.depth = np.asarray(self.depth, dtype=np.float64)
            if self.depth.shape != expected[:2]:
                raise ValidationError(
                    f"frame {self.index}: depth shape {self.depth.shape} does "
                    f"not match camera {expected[:2]}")
        if self.split not in SPLITS:
            raise ValidationError(
                f"frame {self.index}: unknown split {self.split!r}")

    def valid_depth(self) -> np.ndarray:
        if self.depth is None:
            raise ValidationError(f"frame {self.index} has no depth map")
        return np.isfinite(self.depth) & (self.depth > 0.0)


def split_frames(frames):
    train = [f for f in frames if f.split == "train"]
    test = [f for f in frames if f.split == "test"]
    return train, test
