"""File formats: 8-bit PNG for viewing, raw float planar for lossless fixtures,
and a plain-text grid format for kernels."""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

_RAW_MAGIC = b"FIMG"


def save_image_png(path, x) -> None:
    """Store an image in [0, 1] as 8-bit grayscale or RGB PNG."""
    x = np.asarray(x, dtype=np.float64)
    arr = np.clip(np.round(x * 255.0), 0, 255).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def load_image_png(path) -> np.ndarray:
    """Load a PNG as floats in [0, 1]; grayscale gives HxW, color HxWx3."""
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB" if ("A" in img.mode or len(img.mode) > 2) else "L")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_image_raw(path, x) -> None:
    """Lossless float64 planar dump with a small header."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        planes = x[None]
    elif x.ndim == 3:
        planes = np.moveaxis(x, 2, 0)
    else:
        raise ValueError(f"expected 2-D or 3-D image, got shape {x.shape}")
    with open(path, "wb") as f:
        f.write(_RAW_MAGIC)
        f.write(struct.pack("<III", planes.shape[1], planes.shape[2], planes.shape[0]))
        f.write(np.ascontiguousarray(planes, dtype="<f8").tobytes())


def load_image_raw(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != _RAW_MAGIC:
            raise ValueError(f"{path} is not a raw image dump")
        h, w, c = struct.unpack("<III", f.read(12))
        planes = np.frombuffer(f.read(8 * h * w * c), dtype="<f8").reshape(c, h, w)
    planes = planes.astype(np.float64)
    return planes[0] if c == 1 else np.moveaxis(planes, 0, 2)


def save_kernel_txt(path, kernel) -> None:
    """Plain text: first line the side, then one row of floats per line."""
    kernel = np.asarray(kernel, dtype=np.float64)
    with open(path, "w") as f:
        f.write(f"{kernel.shape[0]}\n")
        for row in kernel:
            f.write(" ".join(repr(v) for v in row) + "\n")


def load_kernel_txt(path) -> np.ndarray:
    with open(path) as f:
        side = int(f.readline())
        rows = [[float(v) for v in f.readline().split()] for _ in range(side)]
    k = np.array(rows, dtype=np.float64)
    if k.shape != (side, side):
        raise ValueError(f"{path}: expected {side}x{side} grid, got {k.shape}")
    return k


def save_kernel_png(path, kernel) -> None:
    """Display form: values rescaled by 1/max so the peak is white."""
    kernel = np.asarray(kernel, dtype=np.float64)
    peak = kernel.max()
    scaled = kernel / peak if peak > 0 else kernel
    save_image_png(path, scaled)
