"""Forward degradation y = (x conv k) downsampled + noise, and exact gradients.

Conventions, fixed so tests are bit-stable: reflect padding (edge pixel not
repeated, as in ``np.pad(mode="reflect")``), true convolution (kernel
flipped), subsampling at stride ``scale`` starting from the top-left pixel.
Noise is added only when synthesizing observations, never inside loss
evaluation. Multi-channel images are processed per channel with one kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal


@dataclass(frozen=True)
class DegradeConfig:
    scale: int = 2
    noise_sigma: float = 0.0
    boundary: str = "reflect"

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if self.boundary != "reflect":
            raise ValueError(f"unsupported boundary {self.boundary!r}")


def _channels(x: np.ndarray) -> list[np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return [x]
    if x.ndim == 3 and x.shape[2] in (1, 3):
        return [x[:, :, c] for c in range(x.shape[2])]
    raise ValueError(f"expected HxW or HxWx{{1,3}} image, got shape {x.shape}")


def _stack_like(planes: list[np.ndarray], ref: np.ndarray) -> np.ndarray:
    if np.asarray(ref).ndim == 2:
        return planes[0]
    return np.stack(planes, axis=2)


def _check_geometry(x: np.ndarray, kernel: np.ndarray, scale: int) -> None:
    h, w = np.asarray(x).shape[:2]
    side = kernel.shape[0]
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or side % 2 == 0:
        raise ValueError(f"kernel must be square with odd side, got {kernel.shape}")
    if side > min(h, w):
        raise ValueError(f"kernel side {side} exceeds image extent {(h, w)}")
    if h % scale or w % scale:
        raise ValueError(f"image dims {(h, w)} not divisible by scale {scale}")


def _conv_down(plane: np.ndarray, kernel: np.ndarray, scale: int) -> np.ndarray:
    pad = kernel.shape[0] // 2
    padded = np.pad(plane, pad, mode="reflect")
    full = signal.convolve2d(padded, kernel, mode="valid")
    return full[::scale, ::scale]


def degrade(x, kernel, cfg: DegradeConfig, rng: np.random.Generator | None = None):
    """Blur with ``kernel``, subsample by ``cfg.scale``, optionally add noise."""
    kernel = np.asarray(kernel, dtype=np.float64)
    _check_geometry(x, kernel, cfg.scale)
    planes = [_conv_down(p, kernel, cfg.scale) for p in _channels(x)]
    y = _stack_like(planes, x)
    if cfg.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        y = y + cfg.noise_sigma * rng.standard_normal(y.shape)
    return y


def residual(x, kernel, y, cfg: DegradeConfig):
    """Noiseless data residual r = y - degrade(x, k) and its squared Frobenius norm."""
    clean = degrade(x, kernel, DegradeConfig(cfg.scale, 0.0, cfg.boundary))
    y = np.asarray(y, dtype=np.float64)
    if y.shape != clean.shape:
        raise ValueError(f"observation shape {y.shape} != degraded shape {clean.shape}")
    r = y - clean
    return float((r * r).sum()), r


def _reflect_indices(n: int, pad: int) -> np.ndarray:
    """Source index of each position in a reflect-padded axis of length n + 2*pad."""
    if n == 1:
        return np.zeros(1 + 2 * pad, dtype=int)
    idx = np.abs(np.arange(-pad, n + pad))
    idx = np.mod(idx, 2 * n - 2)
    return np.where(idx >= n, 2 * n - 2 - idx, idx)


def _fold_reflect(padded: np.ndarray, pad: int, shape: tuple[int, int]) -> np.ndarray:
    """Adjoint of reflect padding: accumulate pad contributions onto sources."""
    rows = _reflect_indices(shape[0], pad)
    cols = _reflect_indices(shape[1], pad)
    out = np.zeros(shape)
    np.add.at(out, (rows[:, None], cols[None, :]), padded)
    return out


def _upsample_zero(plane: np.ndarray, scale: int, shape: tuple[int, int]) -> np.ndarray:
    up = np.zeros(shape)
    up[::scale, ::scale] = plane
    return up


def grad_wrt_kernel(x, kernel, y, cfg: DegradeConfig, r=None) -> np.ndarray:
    """Gradient of the squared residual norm with respect to the kernel taps.

    Pass a precomputed residual ``r`` to skip re-degrading ``x``.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if r is None:
        _, r = residual(x, kernel, y, cfg)
    side = kernel.shape[0]
    pad = side // 2
    grad = np.zeros((side, side))
    for xp, rp in zip(_channels(x), _channels(r)):
        padded = np.pad(xp, pad, mode="reflect")
        stuffed = _upsample_zero(-2.0 * rp, cfg.scale, xp.shape)
        corr = signal.correlate2d(padded, stuffed, mode="valid")
        grad += corr[::-1, ::-1]
    return grad


def grad_wrt_image(x, kernel, y, cfg: DegradeConfig, r=None):
    """Gradient of the squared residual norm with respect to the image pixels.

    Pass a precomputed residual ``r`` to skip re-degrading ``x``.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if r is None:
        _, r = residual(x, kernel, y, cfg)
    pad = kernel.shape[0] // 2
    planes = []
    for xp, rp in zip(_channels(x), _channels(r)):
        stuffed = _upsample_zero(-2.0 * rp, cfg.scale, xp.shape)
        padded_grad = signal.correlate2d(stuffed, kernel, mode="full")
        planes.append(_fold_reflect(padded_grad, pad, xp.shape))
    return _stack_like(planes, x)
