"""Reference image restorer: data-consistency gradient steps with optional TV.

This is the pluggable restoration stage of the alternating loop. It refines
the current high-resolution estimate by descending the squared residual of
the re-degraded image against the observation, with a smoothed
total-variation subgradient as an optional regularizer, and clamps to [0, 1].
It is stateless between rounds except through the image itself, so heavier
restorers (a trained generator, a diffusion sampler) can replace it without
touching the loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .degradation import DegradeConfig, grad_wrt_image

TV_EPS = 1e-3


@dataclass(frozen=True)
class RestorerConfig:
    step_image: float = 0.25
    steps_per_iter: int = 5
    tv_weight: float = 1e-3
    init: str = "bilinear"  # "bilinear" or "nearest"
    scale: int = 2

    def __post_init__(self):
        if self.step_image <= 0:
            raise ValueError(f"step_image must be positive, got {self.step_image}")
        if self.tv_weight < 0:
            raise ValueError(f"tv_weight must be >= 0, got {self.tv_weight}")
        if self.init not in ("bilinear", "nearest"):
            raise ValueError(f"unknown init {self.init!r}")


def _planes(x):
    x = np.asarray(x, dtype=np.float64)
    return [x] if x.ndim == 2 else [x[:, :, c] for c in range(x.shape[2])]


def _restack(planes, ref):
    return planes[0] if np.asarray(ref).ndim == 2 else np.stack(planes, axis=2)


def init_image(y, scale: int, cfg: RestorerConfig):
    """Upsample the observation to high-resolution size as the starting image."""
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    if scale == 1:
        return np.asarray(y, dtype=np.float64).copy()
    out = []
    for p in _planes(y):
        if cfg.init == "nearest":
            out.append(np.repeat(np.repeat(p, scale, axis=0), scale, axis=1))
        else:
            out.append(ndimage.zoom(p, scale, order=1, mode="nearest", grid_mode=True))
    return _restack(out, y)


def _tv_terms(plane: np.ndarray, eps: float):
    dr = np.zeros_like(plane)
    dc = np.zeros_like(plane)
    dr[:-1, :] = plane[1:, :] - plane[:-1, :]
    dc[:, :-1] = plane[:, 1:] - plane[:, :-1]
    mag = np.sqrt(dr * dr + dc * dc + eps * eps)
    return dr, dc, mag


def tv_energy(x, eps: float = TV_EPS) -> float:
    """Smoothed isotropic total variation, summed over pixels and channels."""
    return float(sum(_tv_terms(p, eps)[2].sum() for p in _planes(x)))


def tv_subgradient(x, eps: float = TV_EPS):
    """Exact gradient of :func:`tv_energy` (negative divergence of the
    normalized forward-difference field)."""
    out = []
    for p in _planes(x):
        dr, dc, mag = _tv_terms(p, eps)
        fr = dr / mag
        fc = dc / mag
        g = np.zeros_like(p)
        g -= fr
        g[1:, :] += fr[:-1, :]
        g -= fc
        g[:, 1:] += fc[:, :-1]
        out.append(g)
    return _restack(out, x)


def restore_step(x, y, kernel, cfg: RestorerConfig):
    """Apply ``cfg.steps_per_iter`` clamped gradient steps on the data term.

    Zero steps returns the input unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    dcfg = DegradeConfig(scale=cfg.scale)
    for _ in range(cfg.steps_per_iter):
        g = grad_wrt_image(x, kernel, y, dcfg)
        if cfg.tv_weight > 0:
            g = g + cfg.tv_weight * tv_subgradient(x)
        x = np.clip(x - cfg.step_image * g, 0.0, 1.0)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite image during restoration")
    return x
