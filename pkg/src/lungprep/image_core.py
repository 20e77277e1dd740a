"""Core raster types, PGM I/O, normalization, resizing, and augmentation.

Rasters are bare numpy arrays with conventions instead of wrapper classes:

  grayscale   2-D uint8 or uint16, row-major; the bit depth (8 or 16)
              follows the dtype
  float image 2-D float64, nominally in [0, 1]; filter outputs may leave
              that range until clamped
  mask        2-D bool

The ``require_*`` helpers enforce those conventions at API boundaries.
Every float-to-integer conversion in the package rounds half away from
zero (see round_half_away) so independent reimplementations agree
byte-for-byte.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lungprep.errors import FormatError, UsageError

log = logging.getLogger(__name__)

_ALLOWED_ROTATIONS = (90, 180, 270)


def require_gray(img) -> np.ndarray:
    """Validate an 8/16-bit grayscale raster, returning it unchanged."""
    if not isinstance(img, np.ndarray) or img.ndim != 2:
        raise UsageError("grayscale image must be a 2-D numpy array")
    if img.dtype not in (np.uint8, np.uint16):
        raise UsageError(f"grayscale image must be uint8 or uint16, got {img.dtype}")
    if img.size == 0:
        raise UsageError("empty image")
    return img


def require_float(img) -> np.ndarray:
    """Validate a float64 raster with finite samples, returning it unchanged."""
    if not isinstance(img, np.ndarray) or img.ndim != 2:
        raise UsageError("float image must be a 2-D numpy array")
    if img.dtype != np.float64:
        raise UsageError(f"float image must be float64, got {img.dtype}")
    if img.size == 0:
        raise UsageError("empty image")
    if not np.isfinite(img).all():
        raise UsageError("float image contains NaN or infinity")
    return img


def require_mask(mask) -> np.ndarray:
    """Validate a boolean mask, returning it unchanged."""
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise UsageError("mask must be a 2-D numpy array")
    if mask.dtype != np.bool_:
        raise UsageError(f"mask must be bool, got {mask.dtype}")
    if mask.size == 0:
        raise UsageError("empty mask array")
    return mask


def bit_depth(img: np.ndarray) -> int:
    """Bit depth of a grayscale raster (8 for uint8, 16 for uint16)."""
    require_gray(img)
    return 8 if img.dtype == np.uint8 else 16


def round_half_away(x: float) -> int:
    """Round to the nearest integer with halves going away from zero."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


@dataclass(frozen=True)
class AugmentSpec:
    """Which exact-permutation augmentations to apply.

    Only lossless transforms are offered: horizontal flip and right-angle
    rotations, so augmented samples are permutations of the original.
    """

    horizontal_flip: bool = False
    rotations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        rots = tuple(self.rotations)
        object.__setattr__(self, "rotations", rots)
        for r in rots:
            if r not in _ALLOWED_ROTATIONS:
                raise UsageError(f"rotation must be one of {_ALLOWED_ROTATIONS}, got {r}")
        if len(set(rots)) != len(rots):
            raise UsageError("duplicate rotation angles")


# ---------------------------------------------------------------------------
# PGM (binary P5) I/O. Header: "P5\n<width> <height>\n<maxval>\n" followed by
# big-endian samples, one byte per sample when maxval <= 255, else two.
# The reader also accepts standard '#' comments and arbitrary whitespace
# between header tokens.
# ---------------------------------------------------------------------------

def _read_pgm_tokens(data: bytes, count: int, start: int):
    """Read whitespace/comment-separated ASCII tokens from a PGM header."""
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in (ord("\n"), ord("\r")):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PGM header")
        tokens.append(data[i:j])
        i = j
    if i >= n or not data[i:i + 1].isspace():
        raise FormatError("truncated PGM header")
    return tokens, i + 1  # consume exactly one whitespace byte after maxval


def _load_pgm(data: bytes, path: Path) -> np.ndarray:
    try:
        tokens, offset = _read_pgm_tokens(data, 3, 2)
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise FormatError(f"{path}: PGM maxval {maxval} outside 1..65535")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    body = data[offset:offset + need]
    if len(body) != need:
        raise FormatError(f"{path}: PGM sample data truncated")
    samples = np.frombuffer(body, dtype=dtype).reshape(height, width)
    if maxval > 255:
        return samples.astype(np.uint16)
    return samples.astype(np.uint8)


def _load_pillow(path: Path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as exc:
        raise FormatError(
            f"{path}: unsupported format (install Pillow for PNG/TIFF support)"
        ) from exc
    try:
        opened = Image.open(path)
    except OSError as exc:
        raise FormatError(f"{path}: unsupported format: {exc}") from exc
    with opened as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        if im.mode in ("I;16", "I;16B", "I;16L"):
            return np.asarray(im, dtype=np.uint16)
        if im.mode == "I":
            arr = np.asarray(im, dtype=np.int64)
            if arr.min() < 0 or arr.max() > 65535:
                raise FormatError(f"{path}: sample values outside 16-bit range")
            return arr.astype(np.uint16)
        raise FormatError(f"{path}: multi-channel input (mode {im.mode})")


def load_image(path) -> np.ndarray:
    """Load a single-channel image as uint8 or uint16.

    Binary PGM (P5) is decoded natively and is the canonical interchange
    format; PNG/TIFF grayscale are handled through Pillow when it is
    installed. The file is sniffed by magic bytes, not extension.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: unreadable file: {exc}") from exc
    if data[:2] == b"P5":
        return _load_pgm(data, path)
    return _load_pillow(path)


def save_image(img: np.ndarray, path) -> None:
    """Write a grayscale raster as binary PGM (P5), byte-deterministically.

    maxval is 255 for uint8 input and 65535 for uint16; 16-bit samples are
    written big-endian.
    """
    require_gray(img)
    h, w = img.shape
    if img.dtype == np.uint8:
        maxval, body = 255, img.tobytes()
    else:
        maxval, body = 65535, img.astype(">u2").tobytes()
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + body)


# ---------------------------------------------------------------------------
# Intensity transforms
# ---------------------------------------------------------------------------

def normalize_max(img: np.ndarray) -> np.ndarray:
    """Scale a grayscale raster into [0, 1] by its maximum sample.

    An all-zero image has no usable maximum; it maps to all zeros with a
    logged warning and is left for slice selection to reject.
    """
    require_gray(img)
    peak = int(img.max())
    if peak == 0:
        log.warning("normalize_max: all-zero image, returning zeros")
        return np.zeros(img.shape, dtype=np.float64)
    return img.astype(np.float64) / float(peak)


def to_u8(img: np.ndarray) -> np.ndarray:
    """Quantize a float image to uint8: round(clamp(x, 0, 1) * 255).

    Rounding is half away from zero; with nonnegative inputs that is
    floor(x + 0.5).
    """
    require_float(img)
    scaled = np.clip(img, 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# Resizing. Source coordinates use pixel-center alignment:
#   src = (i + 0.5) * in_size / out_size - 0.5, clamped to [0, in_size - 1]
# which makes resizing to the input dimensions an exact identity.
# ---------------------------------------------------------------------------

def _src_coords(out_size: int, in_size: int) -> np.ndarray:
    c = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    return np.clip(c, 0.0, float(in_size - 1))


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize of a float image with pixel-center alignment.

    Each output sample is (1-wy)*((1-wx)*a + wx*b) + wy*((1-wx)*c + wx*d)
    over the four neighbors of the clamped source coordinate.
    """
    require_float(img)
    if out_w < 1 or out_h < 1:
        raise UsageError("zero output dimension")
    in_h, in_w = img.shape
    if (out_h, out_w) == (in_h, in_w):
        return img.copy()
    ys = _src_coords(out_h, in_h)
    xs = _src_coords(out_w, in_w)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = (1.0 - wx) * img[np.ix_(y0, x0)] + wx * img[np.ix_(y0, x1)]
    bot = (1.0 - wx) * img[np.ix_(y1, x0)] + wx * img[np.ix_(y1, x1)]
    return (1.0 - wy) * top + wy * bot


def resize_nearest_mask(mask: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Nearest-neighbor mask resize using the bilinear coordinate mapping.

    Source indices are the half-away rounding of the same clamped
    pixel-center coordinates resize_bilinear uses, keeping the two
    resamplers geometrically aligned while the output stays binary.
    """
    require_mask(mask)
    if out_w < 1 or out_h < 1:
        raise UsageError("zero output dimension")
    in_h, in_w = mask.shape
    if (out_h, out_w) == (in_h, in_w):
        return mask.copy()
    iy = np.floor(_src_coords(out_h, in_h) + 0.5).astype(np.int64)
    ix = np.floor(_src_coords(out_w, in_w) + 0.5).astype(np.int64)
    return mask[np.ix_(iy, ix)]


def augment(img: np.ndarray, spec: AugmentSpec) -> list:
    """Return the original image plus one exact permutation per transform.

    Order: original, horizontal flip (if enabled), then rotations as
    listed in the given AugmentSpec. Rotations are counterclockwise.
    """
    require_gray(img)
    out = [img.copy()]
    if spec.horizontal_flip:
        out.append(np.ascontiguousarray(np.fliplr(img)))
    for angle in spec.rotations:
        out.append(np.ascontiguousarray(np.rot90(img, k=angle // 90)))
    return out
