"""Blur-kernel synthesis: anisotropic Gaussians, random-trajectory motion kernels.

All kernels produced here live on the probability simplex: square, odd-sided,
non-negative, summing to one. The standard side for scale factor ``s`` is
``4 * s + 3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

SIGMA_LO_PER_SCALE = 0.175
SIGMA_HI_PER_SCALE = 2.5


@dataclass(frozen=True)
class GaussianLatent:
    """Parameters of an anisotropic Gaussian kernel.

    sigma1, sigma2 are the principal-axis widths in pixels, theta the rotation
    of the first axis in radians.
    """

    sigma1: float
    sigma2: float
    theta: float


@dataclass(frozen=True)
class MotionLatent:
    """Parameters of a random-trajectory motion kernel.

    The trajectory is a velocity random walk: ``num_steps`` points joined by
    equal-length segments whose headings drift by ``wiggle``-scaled normal
    increments, total arc length ``length_scale`` pixels. Identical latents
    produce identical kernels.
    """

    seed: int
    length_scale: float
    wiggle: float
    num_steps: int = 32


def standard_side(scale: int) -> int:
    """Kernel side used by the synthetic-experiment protocol."""
    return 4 * scale + 3


def sigma_range(scale: int) -> tuple[float, float]:
    """Admissible Gaussian width range for a given scale factor."""
    return (SIGMA_LO_PER_SCALE * scale, SIGMA_HI_PER_SCALE * scale)


def _check_side(side: int) -> None:
    if side < 1 or side % 2 == 0:
        raise ValueError(f"kernel side must be odd and positive, got {side}")


def normalize_kernel(values: np.ndarray) -> np.ndarray:
    """Rescale a non-negative array to sum exactly to one."""
    values = np.asarray(values, dtype=np.float64)
    total = values.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise ValueError("kernel has non-positive or non-finite mass")
    return values / total


def check_kernel(kernel: np.ndarray, tol: float = 1e-9) -> None:
    """Raise ValueError unless ``kernel`` satisfies the simplex invariants."""
    kernel = np.asarray(kernel)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel must be square 2-D, got shape {kernel.shape}")
    if kernel.shape[0] % 2 == 0:
        raise ValueError(f"kernel side must be odd, got {kernel.shape[0]}")
    if np.any(kernel < 0):
        raise ValueError("kernel has negative entries")
    if abs(float(kernel.sum()) - 1.0) > tol:
        raise ValueError(f"kernel sums to {kernel.sum()!r}, not 1")


def gaussian_kernel(latent: GaussianLatent, side: int) -> np.ndarray:
    """Anisotropic Gaussian kernel sampled on the integer pixel grid.

    The density has covariance R(theta) diag(sigma1^2, sigma2^2) R(theta)^T
    and is evaluated at integer offsets from the centre pixel, then
    normalized to sum one. Grid-sampled, not integrated over pixels.
    """
    _check_side(side)
    if latent.sigma1 <= 0 or latent.sigma2 <= 0:
        raise ValueError(f"sigma must be positive, got {latent}")

    c, s = math.cos(latent.theta), math.sin(latent.theta)
    rot = np.array([[c, -s], [s, c]])
    cov = rot @ np.diag([latent.sigma1**2, latent.sigma2**2]) @ rot.T
    icov = np.linalg.inv(cov)

    half = side // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    rr, cc = np.meshgrid(offsets, offsets, indexing="ij")
    quad = icov[0, 0] * rr**2 + 2.0 * icov[0, 1] * rr * cc + icov[1, 1] * cc**2
    return normalize_kernel(np.exp(-0.5 * quad))


def delta_kernel(side: int) -> np.ndarray:
    """Identity kernel: 1 at the centre pixel, 0 elsewhere."""
    _check_side(side)
    k = np.zeros((side, side))
    k[side // 2, side // 2] = 1.0
    return k


def center_of_mass(kernel: np.ndarray) -> tuple[float, float]:
    """Intensity-weighted centroid (row, col) of a kernel."""
    kernel = np.asarray(kernel, dtype=np.float64)
    total = kernel.sum()
    if total <= 0.0:
        raise ValueError("center of mass undefined for zero-mass kernel")
    rows = np.arange(kernel.shape[0])
    cols = np.arange(kernel.shape[1])
    r = float((kernel.sum(axis=1) * rows).sum() / total)
    c = float((kernel.sum(axis=0) * cols).sum() / total)
    return r, c


def _trajectory_points(latent: MotionLatent) -> np.ndarray:
    """Vertices (n, 2) of the velocity random walk, starting at the origin."""
    if latent.num_steps < 2:
        raise ValueError(f"num_steps must be >= 2, got {latent.num_steps}")
    if latent.length_scale <= 0:
        raise ValueError(f"length_scale must be positive, got {latent.length_scale}")
    rng = np.random.default_rng(latent.seed)
    nseg = latent.num_steps - 1
    heading = rng.uniform(0.0, 2.0 * math.pi)
    turns = latent.wiggle * rng.standard_normal(nseg)
    turns[0] = 0.0
    angles = heading + np.cumsum(turns)
    step = latent.length_scale / nseg
    deltas = step * np.stack([np.sin(angles), np.cos(angles)], axis=1)
    points = np.concatenate([np.zeros((1, 2)), np.cumsum(deltas, axis=0)])
    return points


def densify_polyline(points: np.ndarray, spacing: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Resample a polyline at roughly ``spacing`` px; weights carry arc length."""
    samples = []
    weights = []
    for a, b in zip(points[:-1], points[1:]):
        seg = float(np.hypot(*(b - a)))
        m = max(1, int(math.ceil(seg / spacing)))
        t = (np.arange(m) + 0.5) / m
        samples.append(a + t[:, None] * (b - a))
        weights.append(np.full(m, seg / m))
    return np.concatenate(samples), np.concatenate(weights)


def splat_bilinear(samples: np.ndarray, weights: np.ndarray, side: int) -> np.ndarray:
    """Accumulate weighted point masses onto a grid with bilinear splitting.

    Contributions falling outside the grid are dropped.
    """
    grid = np.zeros((side, side))
    r0 = np.floor(samples[:, 0]).astype(int)
    c0 = np.floor(samples[:, 1]).astype(int)
    fr = samples[:, 0] - r0
    fc = samples[:, 1] - c0
    for dr, dc, w in (
        (0, 0, (1 - fr) * (1 - fc)),
        (0, 1, (1 - fr) * fc),
        (1, 0, fr * (1 - fc)),
        (1, 1, fr * fc),
    ):
        rr, cc = r0 + dr, c0 + dc
        ok = (rr >= 0) & (rr < side) & (cc >= 0) & (cc < side)
        np.add.at(grid, (rr[ok], cc[ok]), weights[ok] * w[ok])
    return grid


def shift_to_center(kernel: np.ndarray) -> np.ndarray:
    """Move a kernel's centre of mass onto the grid centre by bilinear resampling."""
    side = kernel.shape[0]
    r, c = center_of_mass(kernel)
    mid = (side - 1) / 2.0
    return ndimage.shift(kernel, (mid - r, mid - c), order=1, mode="constant", cval=0.0)


def motion_kernel(
    latent: MotionLatent,
    side: int,
    smooth_sigma: float = 0.5,
    return_status: bool = False,
):
    """Motion-blur kernel rasterized from a random trajectory.

    The trajectory is splatted bilinearly, recentred on its centre of mass,
    lightly smoothed (``smooth_sigma`` px, isotropic), and normalized. A
    degenerate trajectory (no mass lands on the grid) yields the delta kernel;
    pass ``return_status=True`` to receive ``(kernel, status)`` with status
    ``"ok"`` or ``"degenerate"``.
    """
    _check_side(side)
    points = _trajectory_points(latent)
    samples, weights = densify_polyline(points)
    # place the trajectory's mass centroid at the grid centre before splatting
    centroid = (samples * weights[:, None]).sum(axis=0) / weights.sum()
    mid = (side - 1) / 2.0
    grid = splat_bilinear(samples - centroid + mid, weights, side)

    status = "ok"
    if grid.sum() <= 0.0 or np.ptp(points) < 1e-12:
        grid = delta_kernel(side)
        status = "degenerate"
    else:
        grid = shift_to_center(grid)
        if smooth_sigma > 0:
            grid = ndimage.gaussian_filter(grid, smooth_sigma, mode="constant", cval=0.0)
        grid = normalize_kernel(np.maximum(grid, 0.0))

    if return_status:
        return grid, status
    return grid
