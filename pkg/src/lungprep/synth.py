"""Synthetic raster generation for end-to-end exercises and self-tests.

A generated chest slice is three nested intensity shells on a uint16
canvas: a bright torso ellipse, two dark lung ellipses inside it, and a
class-dependent sprinkle of mid-intensity speckle disks inside the
lungs. Class identity is carried by speckle count and size (CI crowded,
CP moderate, N nearly clean), which downstream histogram features
separate cleanly. Shell geometry is size-relative so larger canvases
render the same scene; speckles use fixed pixel radii, which is why the
canvas has a minimum size.
"""

from pathlib import Path

import numpy as np

from lungprep.dataset_manifest import VALID_LABELS, ManifestRow, write_manifest
from lungprep.errors import UsageError
from lungprep.image_core import save_image
from lungprep.lung_segmentation import bounding_box

_TORSO_VAL = 60000
_LUNG_VAL = 3000
_SPECKLE_VAL = 30000

_MIN_SIZE = 256

# label -> (count_lo, count_hi, radius_lo, radius_hi), all inclusive
_SPECKLES = {
    "CI": (60, 80, 2, 5),
    "CP": (20, 30, 2, 4),
    "N": (2, 4, 1, 2),
}


def _fill_ellipse(img, cy, cx, ry, rx, value) -> None:
    h, w = img.shape
    yy, xx = np.ogrid[:h, :w]
    inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    img[inside] = value


def _fill_disk(img, cy, cx, rad, value) -> None:
    h, w = img.shape
    y0 = max(int(np.floor(cy - rad)) - 1, 0)
    y1 = min(int(np.ceil(cy + rad)) + 2, h)
    x0 = max(int(np.floor(cx - rad)) - 1, 0)
    x1 = min(int(np.ceil(cx + rad)) + 2, w)
    yy, xx = np.ogrid[y0:y1, x0:x1]
    inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= rad * rad
    img[y0:y1, x0:x1][inside] = value


def make_ct_phantom(rng, label: str, size: int = 512) -> np.ndarray:
    """Render one labeled uint16 phantom slice.

    The lung shells are sized and placed so the standard lung-window
    region of interest lands almost entirely on lung interior, keeping
    the dark fraction near 0.85 at the default selection settings.
    """
    if label not in _SPECKLES:
        raise UsageError(f"unknown label {label!r} (must be one of {VALID_LABELS})")
    if size < _MIN_SIZE:
        # fixed speckle radii need this much room to stay inside the lungs
        raise UsageError(f"size must be >= {_MIN_SIZE}, got {size}")
    img = np.zeros((size, size), dtype=np.uint16)

    jit = size * 0.01
    torso_cy = 0.500 * size + rng.uniform(-jit, jit)
    torso_cx = 0.500 * size + rng.uniform(-jit, jit)
    torso_ry = 0.330 * size + rng.uniform(-jit, jit)
    torso_rx = 0.410 * size + rng.uniform(-jit, jit)
    _fill_ellipse(img, torso_cy, torso_cx, torso_ry, torso_rx, _TORSO_VAL)

    lung_cy = 0.530 * size + rng.uniform(-jit, jit)
    lung_dx = 0.155 * size + rng.uniform(-jit, jit)
    lung_ry = 0.255 * size + rng.uniform(-jit, jit)
    lung_rx = 0.140 * size + rng.uniform(-jit, jit)
    centers = (0.5 * size - lung_dx, 0.5 * size + lung_dx)
    for cx in centers:
        _fill_ellipse(img, lung_cy, cx, lung_ry, lung_rx, _LUNG_VAL)

    count_lo, count_hi, rad_lo, rad_hi = _SPECKLES[label]
    n_speckles = int(rng.integers(count_lo, count_hi + 1))
    for i in range(n_speckles):
        cx = centers[i % 2]
        theta = rng.uniform(0.0, 2.0 * np.pi)
        u = np.sqrt(rng.uniform(0.0, 1.0))
        rad = int(rng.integers(rad_lo, rad_hi + 1))
        # centers uniform over the 0.85-scaled lung keep whole disks inside it
        sy = lung_cy + 0.85 * lung_ry * u * np.sin(theta)
        sx = cx + 0.85 * lung_rx * u * np.cos(theta)
        _fill_disk(img, sy, sx, rad, _SPECKLE_VAL)
    return img


def make_blob_phantom(rng, size: int = 96) -> tuple:
    """Render a two-lobed bright blob on black and report its true extent.

    Returns (image, extent) where image is a float raster in [0, 1] and
    extent is the tight bounding box of the painted pixels. The blob
    keeps a clear border margin so a cropper's halo has room to grow
    without clamping at the image edge.
    """
    if size < 48:
        raise UsageError(f"size must be >= 48, got {size}")
    margin = size // 6
    ry = rng.uniform(0.10 * size, 0.18 * size)
    rx = rng.uniform(0.10 * size, 0.18 * size)
    cy = rng.uniform(margin + 1.5 * ry, size - 1 - margin - 1.5 * ry)
    cx = rng.uniform(margin + 1.5 * rx, size - 1 - margin - 1.5 * rx)

    marker = np.zeros((size, size), dtype=np.uint16)
    _fill_ellipse(marker, cy, cx, ry, rx, 1)
    cy2 = cy + rng.uniform(-0.5, 0.5) * ry
    cx2 = cx + rng.uniform(-0.5, 0.5) * rx
    _fill_ellipse(marker, cy2, cx2, rng.uniform(0.6, 0.9) * ry, rng.uniform(0.6, 0.9) * rx, 1)
    mask = marker > 0

    img = np.where(mask, 0.85, 0.0)
    return img, bounding_box(mask)


def write_synth_dataset(out_dir, per_class: int = 24, seed: int = 0, size: int = 512) -> list:
    """Write a labeled phantom dataset and its manifest; return the rows.

    Images land in <out_dir>/images as {label}_{index:04d}.pgm and the
    manifest (manifest.csv, image paths relative to out_dir) groups every
    four consecutive images of a class under one synthetic patient. One
    generator seeded once drives the whole dataset in CI, CP, N order, so
    equal (per_class, seed, size) always reproduce identical bytes.
    """
    if per_class < 1:
        raise UsageError(f"per_class must be >= 1, got {per_class}")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for label in VALID_LABELS:
        for i in range(per_class):
            img = make_ct_phantom(rng, label, size=size)
            name = f"{label}_{i:04d}.pgm"
            save_image(img, out / "images" / name)
            rows.append(
                ManifestRow(
                    image_path=f"images/{name}",
                    patient_id=f"{label}P{i // 4:03d}",
                    label=label,
                    source="synth",
                )
            )
    write_manifest(rows, out / "manifest.csv")
    return rows
