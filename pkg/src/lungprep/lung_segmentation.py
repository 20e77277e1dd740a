"""Slice selection, binarization, morphology, and the automated crop chain.

The crop pipeline mirrors how a radiology slice is reduced to its lung
region: smooth, take the gradient magnitude, threshold it, dilate to close
gaps, fill enclosed holes, keep the largest blob, and crop both the
grayscale and the mask to its bounding box before resampling to 224x224.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lungprep import _kernels
from lungprep.errors import InputDataError, NoLungStructureError, UsageError
from lungprep.filters import gaussian_smooth, median_filter, sharpen, sobel_magnitude
from lungprep.image_core import (
    normalize_max,
    require_float,
    require_gray,
    require_mask,
    resize_bilinear,
    resize_nearest_mask,
    round_half_away,
    save_image,
    to_u8,
)

log = logging.getLogger(__name__)

# selection ROI coordinates are defined on this reference frame and scaled
# proportionally for other image sizes
_ROI_FRAME = 512

OUT_SIZE = 224


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in pixel coordinates (0-based, inclusive top/left)."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise UsageError("rect dimensions must be >= 1")
        if self.top < 0 or self.left < 0:
            raise UsageError("rect origin must be >= 0")


@dataclass(frozen=True)
class SelectionConfig:
    """Dark-fraction slice-selection parameters.

    roi_rows/roi_cols are 1-based inclusive ranges in a 512x512 reference
    frame; other image sizes scale them proportionally (half-away
    rounding). A slice is kept when at least min_dark_fraction of the ROI
    falls below intensity_threshold on the 8-bit normalized image.
    """

    roi_rows: tuple = (241, 340)
    roi_cols: tuple = (121, 370)
    intensity_threshold: int = 200
    min_dark_fraction: float = 0.40

    def __post_init__(self):
        for name, (lo, hi) in (("roi_rows", self.roi_rows), ("roi_cols", self.roi_cols)):
            if lo < 1 or hi < lo:
                raise UsageError(f"{name} must be a nonempty 1-based range, got {lo}..{hi}")
        if not 0 <= self.intensity_threshold <= 255:
            raise UsageError("intensity_threshold must be in [0, 255]")
        if not 0.0 <= self.min_dark_fraction <= 1.0:
            raise UsageError("min_dark_fraction must be in [0, 1]")


@dataclass
class PreprocessedRecord:
    """Per-slice pipeline output.

    gray_224/mask_224/crop_rect are present exactly when selected is true;
    reason explains rejection (empty for selected slices).
    """

    image_id: str
    selected: bool
    dark_fraction: float
    reason: str = ""
    crop_rect: Rect | None = None
    gray_224: np.ndarray | None = None
    mask_224: np.ndarray | None = None


def _scale_span(lo_1b: int, hi_1b: int, size: int) -> tuple:
    lo = round_half_away(lo_1b * size / _ROI_FRAME)
    hi = round_half_away(hi_1b * size / _ROI_FRAME)
    return lo, hi


def select_slice(img: np.ndarray, cfg: SelectionConfig = SelectionConfig()) -> tuple:
    """Decide whether a slice shows open lung, by ROI dark-pixel fraction.

    Returns (selected, dark_fraction) where dark_fraction is the share of
    ROI pixels strictly below the intensity threshold. Input must be the
    8-bit normalized image.
    """
    require_gray(img)
    if img.dtype != np.uint8:
        raise UsageError("select_slice expects an 8-bit image")
    h, w = img.shape
    r_lo, r_hi = _scale_span(*cfg.roi_rows, h)
    c_lo, c_hi = _scale_span(*cfg.roi_cols, w)
    if r_lo < 1 or c_lo < 1 or r_hi > h or c_hi > w or r_hi < r_lo or c_hi < c_lo:
        raise InputDataError(
            f"ROI outside image after scaling: rows {r_lo}..{r_hi}, "
            f"cols {c_lo}..{c_hi} in {w}x{h}"
        )
    roi = img[r_lo - 1:r_hi, c_lo - 1:c_hi]
    dark = int(np.count_nonzero(roi < cfg.intensity_threshold))
    fraction = dark / roi.size
    return fraction >= cfg.min_dark_fraction, fraction


def binarize_otsu(img: np.ndarray) -> tuple:
    """Otsu binarization over the 256-bin quantized image.

    Samples are quantized with the to_u8 mapping; the threshold t in
    [0, 254] maximizes the between-class variance c0*c1*(mu0 - mu1)^2 with
    ties going to the smallest t, and the mask is true where bin > t.
    A constant image has no second class: all-false mask, threshold 0.
    """
    require_float(img)
    q = to_u8(img)
    hist = np.bincount(q.ravel(), minlength=256).astype(np.int64)
    if int(np.count_nonzero(hist)) <= 1:
        return np.zeros(img.shape, dtype=bool), 0
    # cumulative counts/sums are integers below 2^53, so the float64
    # divisions below are exact functions of the histogram
    c = np.cumsum(hist).astype(np.float64)
    s = np.cumsum(hist * np.arange(256, dtype=np.int64)).astype(np.float64)
    total_n = c[-1]
    total_s = s[-1]
    c0 = c[:255]
    s0 = s[:255]
    c1 = total_n - c0
    s1 = total_s - s0
    valid = (c0 > 0) & (c1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = s0 / c0 - s1 / c1
        v = c0 * c1 * d * d
    v = np.where(valid, v, -1.0)
    t = int(np.argmax(v))
    return q > t, t


def edge_mask(grad: np.ndarray) -> np.ndarray:
    """Binarize a gradient-magnitude image: rescale by its max, then Otsu."""
    require_float(grad)
    if (grad < 0).any():
        raise UsageError("edge_mask input must be nonnegative (negative samples)")
    peak = float(grad.max())
    if peak == 0.0:
        return np.zeros(grad.shape, dtype=bool)
    mask, _ = binarize_otsu(grad / peak)
    return mask


def dilate(mask: np.ndarray, iterations: int = 2) -> np.ndarray:
    """Repeat 3x3 binary dilation; pixels outside the image count false."""
    require_mask(mask)
    if iterations < 1:
        raise UsageError(f"iterations must be >= 1, got {iterations}")
    out = np.ascontiguousarray(mask)
    for _ in range(iterations):
        out = _kernels.dilate_once(out)
    return out


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Set true every false region not 4-connected to the image border."""
    require_mask(mask)
    return _kernels.fill_holes(np.ascontiguousarray(mask))


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest 8-connected component.

    Size ties go to the component whose row-major first pixel comes first;
    an empty mask stays empty.
    """
    require_mask(mask)
    if not mask.any():
        return np.zeros_like(mask)
    return _kernels.largest_component(np.ascontiguousarray(mask))


def bounding_box(mask: np.ndarray) -> Rect:
    """Tightest rectangle containing all true pixels."""
    require_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        raise UsageError("bounding_box of an empty mask")
    cols = np.flatnonzero(mask.any(axis=0))
    return Rect(
        top=int(rows[0]),
        left=int(cols[0]),
        height=int(rows[-1] - rows[0] + 1),
        width=int(cols[-1] - cols[0] + 1),
    )


def auto_crop(
    gray: np.ndarray,
    sigma: float = 1.0,
    dilate_iterations: int = 2,
    out_size: int = OUT_SIZE,
) -> tuple:
    """Locate the dominant structure and crop/resample around it.

    Chain: gaussian_smooth -> sobel_magnitude -> edge_mask -> dilate ->
    fill_holes -> largest_component -> bounding_box. Both the input
    grayscale and the structure mask are cropped to the box, then resized
    (bilinear / nearest) to out_size x out_size.

    Returns (gray_out, mask_out, rect). Raises NoLungStructureError when
    the gradient image binarizes to nothing (constant input).
    """
    require_float(gray)
    smoothed = gaussian_smooth(gray, sigma)
    grad = sobel_magnitude(smoothed)
    edges = edge_mask(grad)
    if not edges.any():
        raise NoLungStructureError("no lung structure found")
    m = dilate(edges, dilate_iterations)
    m = fill_holes(m)
    m = largest_component(m)
    rect = bounding_box(m)
    rs = slice(rect.top, rect.top + rect.height)
    cs = slice(rect.left, rect.left + rect.width)
    gray_out = resize_bilinear(np.ascontiguousarray(gray[rs, cs]), out_size, out_size)
    mask_out = resize_nearest_mask(np.ascontiguousarray(m[rs, cs]), out_size, out_size)
    return gray_out, mask_out, rect


def preprocess_image(
    raw: np.ndarray,
    image_id: str,
    selection: SelectionConfig = SelectionConfig(),
    sigma: float = 1.0,
    dilate_iterations: int = 2,
) -> PreprocessedRecord:
    """Run the full per-slice chain and bundle the outputs.

    normalize_max -> to_u8 -> select_slice gates the slice; selected
    slices continue through sharpen -> median_filter(3) -> auto_crop. A
    crop failure demotes the slice to rejected with a diagnostic reason
    rather than raising, so batch callers can log and continue.
    """
    require_gray(raw)
    norm = normalize_max(raw)
    selected, fraction = select_slice(to_u8(norm), selection)
    if not selected:
        return PreprocessedRecord(
            image_id=image_id,
            selected=False,
            dark_fraction=fraction,
            reason="dark fraction below minimum",
        )
    filtered = median_filter(sharpen(norm), 3)
    try:
        gray_224, mask_224, rect = auto_crop(filtered, sigma, dilate_iterations)
    except NoLungStructureError as exc:
        return PreprocessedRecord(
            image_id=image_id,
            selected=False,
            dark_fraction=fraction,
            reason=str(exc),
        )
    return PreprocessedRecord(
        image_id=image_id,
        selected=True,
        dark_fraction=fraction,
        crop_rect=rect,
        gray_224=gray_224,
        mask_224=mask_224,
    )


LOG_FIELDS = ("image_id", "selected", "dark_fraction", "top", "left", "height", "width", "reason")


def log_row(rec: PreprocessedRecord) -> tuple:
    """One preprocess_log.csv row for a record (all fields as strings)."""
    if rec.crop_rect is not None:
        rect_cells = tuple(
            str(v)
            for v in (rec.crop_rect.top, rec.crop_rect.left, rec.crop_rect.height, rec.crop_rect.width)
        )
    else:
        rect_cells = ("", "", "", "")
    return (
        rec.image_id,
        "true" if rec.selected else "false",
        f"{rec.dark_fraction:.6f}",
        *rect_cells,
        rec.reason,
    )


def save_record_rasters(rec: PreprocessedRecord, out_dir) -> None:
    """Persist a selected record's rasters as <id>_gray.pgm and <id>_mask.pgm.

    The grayscale goes through to_u8; the mask is written as 0/255.
    Rejected records have no rasters and are a no-op.
    """
    if not rec.selected:
        return
    out_dir = Path(out_dir)
    save_image(to_u8(rec.gray_224), out_dir / f"{rec.image_id}_gray.pgm")
    save_image(
        np.where(rec.mask_224, np.uint8(255), np.uint8(0)),
        out_dir / f"{rec.image_id}_mask.pgm",
    )
