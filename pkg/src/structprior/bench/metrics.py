"""Image-quality metrics relative to a reference image."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = ["psnr", "ssim"]

SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # radius 5, i.e. an 11 x 11 window


def _check(x, ref):
    if np.shape(x) != np.shape(ref):
        raise ValueError(f"grid mismatch: {np.shape(x)} vs {np.shape(ref)}")


def psnr(x: np.ndarray, ref: np.ndarray) -> float:
    """``10 log10(R^2 / MSE)`` with ``R = max(ref) - min(ref)``; ``inf`` if equal."""
    _check(x, ref)
    R = float(np.max(ref) - np.min(ref))
    if R == 0:
        raise ValueError("reference image is constant")
    mse = float(np.mean((np.asarray(x, float) - ref) ** 2))
    if mse == 0:
        return np.inf
    return 10.0 * np.log10(R * R / mse)


def ssim(x: np.ndarray, ref: np.ndarray) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    ``C1 = (0.01 R)^2``, ``C2 = (0.03 R)^2`` with ``R`` the range of ``ref``.
    Local statistics use population (not sample) covariances; a 5-pixel
    border affected by the reflective padding is excluded from the mean.
    """
    _check(x, ref)
    x = np.asarray(x, dtype=float)
    y = np.asarray(ref, dtype=float)
    R = float(y.max() - y.min())
    c1, c2 = (0.01 * R) ** 2, (0.03 * R) ** 2

    def blur(a):
        return gaussian_filter(a, SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="reflect")

    mx, my = blur(x), blur(y)
    vx = blur(x * x) - mx * mx
    vy = blur(y * y) - my * my
    cxy = blur(x * y) - mx * my
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    pad = int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5)
    return float(s[pad:-pad, pad:-pad].mean())
