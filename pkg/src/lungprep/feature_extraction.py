"""Fixed-schema feature vectors: built-in classical descriptors or
externally computed CNN embeddings loaded from CSV.

The classical "classic-v1" descriptor is a 38-value summary of the masked
lung region: a 32-bin intensity histogram plus area, shape, moment, and
perimeter statistics. The embedding loader accepts any fixed-width CSV so
real network features can replace the classical ones without code changes.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lungprep.errors import FormatError, InputDataError, UsageError
from lungprep.image_core import require_float, require_mask
from lungprep.lung_segmentation import bounding_box

_HIST_BINS = 32


@dataclass(frozen=True)
class FeatureSchema:
    """Names and dimension for one family of feature vectors."""

    schema_id: str
    dimension: int
    names: tuple

    def __post_init__(self):
        if len(self.names) != self.dimension:
            raise UsageError("schema names must match the declared dimension")


CLASSIC_V1 = FeatureSchema(
    schema_id="classic-v1",
    dimension=_HIST_BINS + 6,
    names=tuple(f"hist_{i:02d}" for i in range(_HIST_BINS))
    + ("area_fraction", "aspect_ratio", "mean", "std", "skewness", "perimeter_fraction"),
)


def external_schema(dimension: int) -> FeatureSchema:
    """Schema for externally computed embeddings of a given width."""
    if dimension < 1:
        raise UsageError("embedding dimension must be >= 1")
    return FeatureSchema(
        schema_id=f"ext-{dimension}",
        dimension=dimension,
        names=tuple(f"f{i}" for i in range(dimension)),
    )


@dataclass
class FeatureVector:
    """One image's features under a named schema."""

    image_id: str
    schema_id: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise UsageError("feature values must be 1-D")
        if not np.isfinite(vals).all():
            raise InputDataError(f"{self.image_id}: non-finite feature value")
        self.values = vals


def classical_features(gray: np.ndarray, mask: np.ndarray, image_id: str) -> FeatureVector:
    """classic-v1 descriptor of the masked region of a float image.

    Values, in order: 32-bin normalized histogram of masked intensities
    (bin = min(floor(x*32), 31), bins sum to 1), mask area fraction,
    bounding-box aspect ratio (width/height), masked mean, masked
    population standard deviation, masked skewness (0 when std is 0), and
    perimeter fraction (true pixels with at least one false 4-neighbor,
    counting pixels outside the image as false, divided by mask area).
    Pixels outside the mask never influence the result.
    """
    require_float(gray)
    require_mask(mask)
    if gray.shape != mask.shape:
        raise UsageError("image and mask dimensions differ")
    if not mask.any():
        raise UsageError("empty mask")
    vals = gray[mask]
    n = vals.size

    idx = np.clip(np.floor(vals * _HIST_BINS).astype(np.int64), 0, _HIST_BINS - 1)
    hist = np.bincount(idx, minlength=_HIST_BINS).astype(np.float64) / n

    area_fraction = n / mask.size
    bb = bounding_box(mask)
    aspect_ratio = bb.width / bb.height

    mean = float(vals.mean())
    centered = vals - mean
    var = float(np.mean(centered * centered))
    std = math.sqrt(var)
    if std == 0.0:
        skewness = 0.0
    else:
        skewness = float(np.mean(centered * centered * centered)) / std**3

    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    all4 = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    perimeter_fraction = int(np.count_nonzero(mask & ~all4)) / n

    values = np.concatenate(
        [hist, [area_fraction, aspect_ratio, mean, std, skewness, perimeter_fraction]]
    )
    return FeatureVector(image_id=image_id, schema_id=CLASSIC_V1.schema_id, values=values)


def _schema_for(schema_id: str, dimension: int) -> FeatureSchema:
    if schema_id == CLASSIC_V1.schema_id:
        if dimension != CLASSIC_V1.dimension:
            raise FormatError(
                f"schema {schema_id} declares {CLASSIC_V1.dimension} values, file has {dimension}"
            )
        return CLASSIC_V1
    return FeatureSchema(schema_id=schema_id, dimension=dimension, names=tuple(f"f{i}" for i in range(dimension)))


def load_embeddings(path) -> list:
    """Load feature vectors from CSV.

    Layout: an optional first line "# schema: <id>", a header whose first
    column is image_id, then one row per image. All rows must share the
    header's width; the schema defaults to "ext-<dimension>" when no
    sidecar line names one.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: unreadable file: {exc}") from exc
    lines = text.splitlines()
    schema_id = None
    if lines and lines[0].startswith("#"):
        head = lines.pop(0)
        if not head.startswith("# schema: "):
            raise FormatError(f"{path}: unrecognized comment line {head!r}")
        schema_id = head[len("# schema: "):].strip()
        if not schema_id:
            raise FormatError(f"{path}: empty schema id")
    if not lines:
        raise FormatError(f"{path}: missing header")
    rows = list(csv.reader(lines))
    header = rows[0]
    if not header or header[0] != "image_id" or len(header) < 2:
        raise FormatError(f"{path}: header must be image_id,<feature columns>")
    dim = len(header) - 1
    if schema_id is None:
        schema_id = f"ext-{dim}"
    _schema_for(schema_id, dim)
    out = []
    seen = set()
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 1:
            raise FormatError(f"{path}:{ln}: expected {dim + 1} cells, got {len(row)}")
        image_id = row[0]
        if image_id in seen:
            raise InputDataError(f"{path}:{ln}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        try:
            values = np.array([float(c) for c in row[1:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: non-numeric cell") from exc
        out.append(FeatureVector(image_id=image_id, schema_id=schema_id, values=values))
    return out


def write_features(vectors, path, schema: FeatureSchema | None = None) -> None:
    """Write feature vectors as CSV, sorted by image_id.

    Values are rendered with 9 significant digits, which reparses to the
    same text, so load/write round-trips are stable. The schema may be
    passed explicitly to write a header-only file for an empty collection.
    """
    vectors = list(vectors)
    if vectors:
        schema_id = vectors[0].schema_id
        dim = vectors[0].values.size
        for v in vectors:
            if v.schema_id != schema_id or v.values.size != dim:
                raise UsageError("mixed feature schemas in one file")
        if schema is not None and schema.schema_id != schema_id:
            raise UsageError("explicit schema does not match the vectors")
        schema = _schema_for(schema_id, dim)
    elif schema is None:
        raise UsageError("schema required to write an empty feature file")
    ids = [v.image_id for v in vectors]
    if len(set(ids)) != len(ids):
        raise InputDataError("duplicate image_id among feature vectors")
    for image_id in ids:
        if any(ch in image_id for ch in ",\r\n\""):
            raise UsageError(f"image_id {image_id!r} contains CSV delimiter characters")
    lines = [f"# schema: {schema.schema_id}", "image_id," + ",".join(schema.names)]
    for v in sorted(vectors, key=lambda fv: fv.image_id):
        lines.append(v.image_id + "," + ",".join(f"{x:.9g}" for x in v.values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
