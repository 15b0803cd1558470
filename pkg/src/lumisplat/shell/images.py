"""Dependency-free image codecs: 8-bit PPM (P6) for RGB frames and 32-bit
little-endian PFM for lossless metric depth maps.
"""

import numpy as np

from ..errors import ValidationError


def write_ppm(path: str, image: np.ndarray) -> None:
    """Write an (H, W, 3) float image in [0, 1] as binary PPM, maxval 255."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"PPM image must be (H, W, 3), got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValidationError("PPM image contains non-finite values")
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def _read_tokens(f, n: int) -> list:
    """Read `n` whitespace-separated header tokens, skipping # comments."""
    tokens = []
    while len(tokens) < n:
        line = f.readline()
        if not line:
            raise ValidationError("truncated image header")
        text = line.split(b"#", 1)[0]
        tokens.extend(text.split())
    return tokens[:n]


def read_ppm(path: str) -> np.ndarray:
    """Read a binary PPM into an (H, W, 3) float64 array in [0, 1]."""
    with open(path, "rb") as f:
        magic, = _read_tokens(f, 1)
        if magic != b"P6":
            raise ValidationError(f"{path}: not a binary PPM (magic {magic!r})")
        w, h, maxval = (int(t) for t in _read_tokens(f, 3))
        if maxval != 255:
            raise ValidationError(f"{path}: unsupported PPM maxval {maxval}")
        raw = f.read(w * h * 3)
    if len(raw) != w * h * 3:
        raise ValidationError(f"{path}: truncated PPM pixel data")
    data = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)
    return data.astype(np.float64) / 255.0


def write_pfm(path: str, data: np.ndarray) -> None:
    """Write an (H, W) float array as grayscale PFM (float32, little-endian).

    Rows are stored bottom-up with scale -1.0 per the PFM convention.
    """
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise ValidationError(f"PFM data must be (H, W), got {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(arr[::-1].astype("<f4").tobytes())


def read_pfm(path: str) -> np.ndarray:
    """Read a grayscale PFM into an (H, W) float64 array."""
    with open(path, "rb") as f:
        magic, = _read_tokens(f, 1)
        if magic != b"Pf":
            raise ValidationError(
                f"{path}: not a grayscale PFM (magic {magic!r})")
        w, h = (int(t) for t in _read_tokens(f, 2))
        scale = float(_read_tokens(f, 1)[0])
        if scale == 0.0:
            raise ValidationError(f"{path}: PFM scale must be nonzero")
        raw = f.read(w * h * 4)
    if len(raw) != w * h * 4:
        raise ValidationError(f"{path}: truncated PFM pixel data")
    dtype = "<f4" if scale < 0.0 else ">f4"
    data = np.frombuffer(raw, dtype=dtype).reshape(h, w)[::-1]
    return data.astype(np.float64) * (abs(scale) if abs(scale) != 1.0 else 1.0)
