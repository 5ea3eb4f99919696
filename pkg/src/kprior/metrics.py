"""Image and kernel quality metrics: PSNR, SSIM, aligned kernel PSNR."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .kernels import center_of_mass

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    image_psnr: float
    ssim: float
    kernel_psnr: float | None
    runtime_seconds: float


def _check_same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) over all pixels and channels, capped at 100 dB."""
    a, b = _check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    g = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_plane(a: np.ndarray, b: np.ndarray, drange: float) -> float:
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * drange) ** 2
    c2 = (SSIM_K2 * drange) ** 2

    def win(im):
        return signal.correlate2d(im, w, mode="valid")

    mu_a = win(a)
    mu_b = win(b)
    var_a = win(a * a) - mu_a**2
    var_b = win(b * b) - mu_b**2
    cov = win(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5, dynamic range 1),
    averaged over channels for color images."""
    a, b = _check_same_shape(a, b)
    if a.ndim == 2:
        return _ssim_plane(a, b, 1.0)
    return float(np.mean([_ssim_plane(a[:, :, c], b[:, :, c], 1.0) for c in range(a.shape[2])]))


def _integer_shift(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Shift with zero fill (content pushed off the edge is lost)."""
    out = np.zeros_like(arr)
    h, w = arr.shape
    src_r = slice(max(0, -dr), min(h, h - dr))
    src_c = slice(max(0, -dc), min(w, w - dc))
    dst_r = slice(max(0, dr), min(h, h + dr))
    dst_c = slice(max(0, dc), min(w, w + dc))
    out[dst_r, dst_c] = arr[src_r, src_c]
    return out


def kernel_psnr(k_est, k_true) -> float:
    """PSNR between kernels after integer centre-of-mass alignment.

    The estimate is shifted so its centre of mass matches the reference
    (nearest-integer offset), then scored with peak = max(k_true); the score
    is therefore invariant to integer translations of the estimate that do
    not truncate its support.
    """
    k_est, k_true = _check_same_shape(k_est, k_true)
    if k_est.ndim != 2 or k_est.shape[0] != k_est.shape[1]:
        raise ValueError(f"kernels must be square 2-D, got {k_est.shape}")
    r_e, c_e = center_of_mass(k_est)
    r_t, c_t = center_of_mass(k_true)
    aligned = _integer_shift(k_est, round(r_t - r_e), round(c_t - c_e))
    return psnr(aligned, k_true, peak=float(k_true.max()))
