"""Dense 2-D kernels and rank filtering.

All operators share one convolution engine: true convolution (the kernel
is flipped in both axes) with replicate border padding, so image borders
never pick up dark halos. Outputs keep the input dimensions.
"""

import math

import numpy as np

from lungprep import _kernels
from lungprep.errors import UsageError
from lungprep.image_core import require_float

KERNEL_LAPLACIAN = np.array(
    [[0.0, 1.0, 0.0],
     [1.0, -4.0, 1.0],
     [0.0, 1.0, 0.0]]
)

KERNEL_SOBEL_X = np.array(
    [[-1.0, 0.0, 1.0],
     [-2.0, 0.0, 2.0],
     [-1.0, 0.0, 1.0]]
)


def _require_kernel(kernel) -> np.ndarray:
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2:
        raise UsageError("kernel must be 2-D")
    kh, kw = k.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise UsageError(f"kernel dimensions must be odd, got {kh}x{kw}")
    if not np.isfinite(k).all():
        raise UsageError("kernel weights must be finite")
    return k


def convolve2d(img: np.ndarray, kernel) -> np.ndarray:
    """True 2-D convolution with replicate border padding.

    The kernel may be larger than the image; replicate padding supplies
    the margins either way.
    """
    require_float(img)
    k = _require_kernel(kernel)
    ph, pw = k.shape[0] // 2, k.shape[1] // 2
    padded = np.pad(img, ((ph, ph), (pw, pw)), mode="edge")
    kflip = np.ascontiguousarray(k[::-1, ::-1])
    return _kernels.conv2d_padded(padded, kflip)


def laplacian(img: np.ndarray) -> np.ndarray:
    """4-neighbor discrete Laplacian (center weight -4)."""
    return convolve2d(img, KERNEL_LAPLACIAN)


def sharpen(img: np.ndarray) -> np.ndarray:
    """Edge-boosting sharpen: clamp(img - laplacian(img), 0, 1).

    With the -4-center kernel, subtracting the Laplacian response raises
    intensity on the bright side of edges and lowers it on the dark side.
    """
    return np.clip(img - laplacian(img), 0.0, 1.0)


def median_filter(img: np.ndarray, k: int = 3) -> np.ndarray:
    """k x k median with replicate padding; k must be odd (k*k windows
    always hold an odd count, so the median is an input value)."""
    require_float(img)
    if k < 1 or k % 2 == 0:
        raise UsageError(f"median window must be odd and >= 1, got {k}")
    pad = k // 2
    padded = np.pad(img, pad, mode="edge")
    return _kernels.median2d_padded(padded, k)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps over [-ceil(3*sigma), +ceil(3*sigma)]."""
    if sigma <= 0:
        raise UsageError(f"sigma must be positive, got {sigma}")
    r = math.ceil(3.0 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(img: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Separable Gaussian blur: rows first, then columns.

    The 1-D kernel is normalized to sum 1, so constant regions (and the
    global mean of images with wide constant borders) are preserved.
    """
    g = gaussian_kernel1d(sigma)
    rows = convolve2d(img, g.reshape(1, -1))
    return convolve2d(rows, g.reshape(-1, 1))


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    """Euclidean gradient magnitude sqrt(Gx^2 + Gy^2), unclamped.

    Gx comes from the horizontal Sobel kernel and Gy from its transpose,
    both applied as true convolutions; the flip negates the responses but
    the magnitude is unaffected.
    """
    gx = convolve2d(img, KERNEL_SOBEL_X)
    gy = convolve2d(img, KERNEL_SOBEL_X.T)
    return np.sqrt(gx * gx + gy * gy)
