"""Independent reference implementations used as test oracles.

Everything here is written the slow, obvious way (scalar loops, direct
formulas) and must stay independent of the library's fast paths.
"""

import math

import numpy as np


def reflect_index(i: int, n: int) -> int:
    """Index into [0, n) for reflect padding without edge repetition."""
    if n == 1:
        return 0
    period = 2 * n - 2
    i = abs(i) % period
    return period - i if i >= n else i


def degrade_loop(x: np.ndarray, kernel: np.ndarray, scale: int) -> np.ndarray:
    """Quadruple-loop blur + stride-subsample with reflect boundary."""
    h, w = x.shape
    side = kernel.shape[0]
    pad = side // 2
    out = np.zeros((h // scale, w // scale))
    for i in range(h // scale):
        for j in range(w // scale):
            acc = 0.0
            for a in range(side):
                for b in range(side):
                    r = reflect_index(scale * i + pad - a, h)
                    c = reflect_index(scale * j + pad - b, w)
                    acc += kernel[a, b] * x[r, c]
            out[i, j] = acc
    return out


def loss_loop(x: np.ndarray, kernel: np.ndarray, y: np.ndarray, scale: int) -> float:
    """Direct squared-residual sum against the loop degrader (2-D only)."""
    diff = y - degrade_loop(x, kernel, scale)
    total = 0.0
    for v in diff.ravel():
        total += v * v
    return total


def fd_gradient(loss_fn, arr: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function over every entry."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = loss_fn(arr)
        flat[i] = orig - step
        lo = loss_fn(arr)
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * step)
    return grad


def rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    """Norm-wise relative error with a floor to avoid 0/0."""
    denom = max(float(np.linalg.norm(exact)), 1e-12)
    return float(np.linalg.norm(np.asarray(approx) - np.asarray(exact))) / denom


def isotropic_gaussian_direct(side: int, sigma: float) -> np.ndarray:
    """Scalar-loop grid Gaussian exp(-(i^2+j^2)/(2 sigma^2)), normalized."""
    half = side // 2
    vals = np.zeros((side, side))
    for i in range(side):
        for j in range(side):
            d2 = (i - half) ** 2 + (j - half) ** 2
            vals[i, j] = math.exp(-d2 / (2.0 * sigma * sigma))
    return vals / vals.sum()


def splat_loop(samples: np.ndarray, weights: np.ndarray, side: int) -> np.ndarray:
    """Scalar bilinear splatting of weighted points onto a grid."""
    grid = np.zeros((side, side))
    for (r, c), w in zip(samples, weights):
        r0, c0 = math.floor(r), math.floor(c)
        fr, fc = r - r0, c - c0
        for dr, dc, frac in (
            (0, 0, (1 - fr) * (1 - fc)),
            (0, 1, (1 - fr) * fc),
            (1, 0, fr * (1 - fc)),
            (1, 1, fr * fc),
        ):
            rr, cc = r0 + dr, c0 + dc
            if 0 <= rr < side and 0 <= cc < side:
                grid[rr, cc] += w * frac
    return grid


def mse_direct(a: np.ndarray, b: np.ndarray) -> float:
    total = 0.0
    for u, v in zip(np.asarray(a).ravel(), np.asarray(b).ravel()):
        total += (u - v) ** 2
    return total / a.size


def make_test_image(seed: int, size: int = 64, channels: int = 1) -> np.ndarray:
    """Synthetic HR image with edges and texture so kernels are identifiable."""
    from scipy import ndimage

    rng = np.random.default_rng(seed)
    planes = []
    for _ in range(channels):
        cartoon = ndimage.gaussian_filter(rng.standard_normal((size, size)), 4.0)
        cartoon = np.digitize(cartoon, np.quantile(cartoon, [0.25, 0.5, 0.75])) / 3.0
        texture = ndimage.gaussian_filter(rng.standard_normal((size, size)), 0.8)
        texture = (texture - texture.min()) / max(np.ptp(texture), 1e-12)
        plane = 0.65 * cartoon + 0.35 * texture
        planes.append(0.05 + 0.9 * plane)
    if channels == 1:
        return planes[0]
    return np.stack(planes, axis=2)
