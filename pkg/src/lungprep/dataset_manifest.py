"""Dataset manifests and deterministic patient-wise train/test splitting.

Split assignment is hash-keyed rather than RNG-streamed so any language
can reproduce it from two well-specified 64-bit functions:

  fnv1a64(bytes): h = 0xcbf29ce484222325; per byte: h ^= b;
                  h = (h * 0x100000001b3) mod 2^64
  splitmix64(x):  x = (x + 0x9E3779B97F4A7C15) mod 2^64
                  x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
                  x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) mod 2^64
                  return x ^ (x >> 31)

A patient's key is splitmix64(seed XOR fnv1a64(utf-8 patient_id));
patients ascending by key join the test side until its image count first
reaches test_fraction of the total, so no patient ever appears on both
sides and per-patient slice counts are respected.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

from lungprep.errors import FormatError, InputDataError, UsageError

VALID_LABELS = ("CI", "CP", "N")

_COLUMNS = ("image_path", "patient_id", "label", "source")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ManifestRow:
    """One dataset image: where it lives, whose scan it is, and its label."""

    image_path: str
    patient_id: str
    label: str
    source: str

    def __post_init__(self):
        if not self.image_path:
            raise InputDataError("empty image_path")
        if self.label not in VALID_LABELS:
            raise InputDataError(f"bad label {self.label!r} (must be one of {VALID_LABELS})")


def parse_manifest(path) -> list:
    """Read and validate a manifest CSV with header image_path,patient_id,label,source."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: unreadable file: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise FormatError(f"{path}: empty manifest")
    if tuple(rows[0]) != _COLUMNS:
        raise FormatError(
            f"{path}: header must be {','.join(_COLUMNS)}, got {','.join(rows[0])}"
        )
    out = []
    seen = set()
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(_COLUMNS):
            raise FormatError(f"{path}:{ln}: expected {len(_COLUMNS)} cells, got {len(row)}")
        try:
            rec = ManifestRow(*row)
        except InputDataError as exc:
            raise InputDataError(f"{path}:{ln}: {exc}") from exc
        if rec.image_path in seen:
            raise InputDataError(f"{path}:{ln}: duplicate image_path {rec.image_path!r}")
        seen.add(rec.image_path)
        out.append(rec)
    return out


def write_manifest(rows, path) -> None:
    """Write manifest rows (in the given order) as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_COLUMNS)
        for r in rows:
            writer.writerow((r.image_path, r.patient_id, r.label, r.source))


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & _MASK64
    return h


def splitmix64(x: int) -> int:
    """One splitmix64 step, used as a 64-bit mixing finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def patient_key(seed: int, patient_id: str) -> int:
    """Deterministic 64-bit sort key for one patient under one seed."""
    return splitmix64((seed & _MASK64) ^ fnv1a64(patient_id.encode("utf-8")))


def split_by_patient(rows, test_fraction: float, seed: int) -> tuple:
    """Split manifest rows into (train, test) without crossing patients.

    Patients sorted ascending by key enter the test side until the test
    image count first reaches test_fraction of all images; everyone else
    trains. Row order within each side follows the input. The test side is
    minimal: dropping its last-assigned patient would fall below the
    target coverage.
    """
    rows = list(rows)
    if not 0.0 < test_fraction < 1.0:
        raise UsageError(f"test_fraction must be in (0, 1), got {test_fraction}")
    counts = {}
    for r in rows:
        counts[r.patient_id] = counts.get(r.patient_id, 0) + 1
    if len(counts) < 2:
        raise InputDataError(f"need at least 2 distinct patients, got {len(counts)}")
    # patient_id is a tiebreaker only; 64-bit key collisions are freak events
    order = sorted(counts, key=lambda p: (patient_key(seed, p), p))
    target = test_fraction * len(rows)
    test_patients = set()
    covered = 0
    for p in order:
        if covered >= target:
            break
        test_patients.add(p)
        covered += counts[p]
    train = [r for r in rows if r.patient_id not in test_patients]
    test = [r for r in rows if r.patient_id in test_patients]
    return train, test


def class_counts(rows) -> dict:
    """Per-label row counts in class-list order."""
    out = {label: 0 for label in VALID_LABELS}
    for r in rows:
        out[r.label] += 1
    return out
