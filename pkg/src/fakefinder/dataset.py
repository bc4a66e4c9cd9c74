"""Labeled sample manifests, stratified splitting, and tensor storage.

Face crops are indexed into a manifest (one record per crop file), split
into train/val/test with per-class largest-remainder rounding, and stored
on disk as float32 tensors in a small self-describing binary format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import InvalidArgumentError, TensorFormatError

if TYPE_CHECKING:
    from .media_ingest import FaceCrop

LABELS = ("real", "fake")
SPLITS = ("train", "val", "test")

TENSOR_MAGIC = b"TNSR"
TENSOR_SUFFIX = ".tsr"
CROP_SUFFIXES = (".png", TENSOR_SUFFIX)


@dataclass
class SampleRecord:
    """One labeled face-crop sample."""

    sample_id: str
    label: str
    split: str = "unassigned"
    tensor_path: str = ""
    source_id: str = ""


@dataclass
class DatasetManifest:
    """An ordered collection of sample records."""

    records: list[SampleRecord] = field(default_factory=list)

    def class_counts(self, split: str | None = None) -> dict[str, int]:
        """Per-label record counts, optionally restricted to one split."""
        counts: dict[str, int] = {}
        for rec in self.records:
            if split is not None and rec.split != split:
                continue
            counts[rec.label] = counts.get(rec.label, 0) + 1
        return counts

    def split_records(self, split: str) -> list[SampleRecord]:
        return [r for r in self.records if r.split == split]

    def save(self, path: str | Path) -> None:
        """Write the manifest as JSON Lines, one record per line."""
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(asdict(rec)) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(SampleRecord(**json.loads(line)))
        return cls(records=records)


def _scan_crop_files(root: Path) -> list[Path]:
    return sorted(
        p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in CROP_SUFFIXES
    )


def build_manifest(real_dir: str | Path, fake_dir: str | Path) -> DatasetManifest:
    """Index face-crop files under two label directories into a manifest.

    Sample ids are prefixed with the label so identical relative filenames
    in the two trees stay distinct. The source id is the crop's parent
    directory name (one directory per source video), or the file stem for
    crops sitting directly at the root.
    """
    records = []
    for label, root in (("real", Path(real_dir)), ("fake", Path(fake_dir))):
        if not root.is_dir():
            raise InvalidArgumentError(f"{label} directory does not exist: {root}")
        for path in _scan_crop_files(root):
            rel = path.relative_to(root)
            source = rel.parent.name if rel.parent != Path(".") else path.stem
            records.append(
                SampleRecord(
                    sample_id=f"{label}/{rel.as_posix()}",
                    label=label,
                    tensor_path=str(path) if path.suffix == TENSOR_SUFFIX else "",
                    source_id=source,
                )
            )
    if not records:
        raise InvalidArgumentError("no face-crop files found in either directory")
    return DatasetManifest(records=records)


def _largest_remainder(count: int, ratios: tuple[float, ...]) -> list[int]:
    """Integer split quotas whose error vs count*ratio is at most 1 each."""
    quotas = [count * r for r in ratios]
    base = [int(np.floor(q)) for q in quotas]
    leftover = count - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def stratified_split(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetManifest:
    """Assign every record to train/val/test, stratified by class.

    Within each class, records are shuffled by a generator seeded with
    ``seed`` and then partitioned by largest-remainder rounding of the
    ratios, so each split's class count is within 1 of ratio * class_count.
    Returns a new manifest; the input is not modified.
    """
    if any(r <= 0 for r in ratios) or len(ratios) != 3:
        raise InvalidArgumentError(f"ratios must be 3 positive values, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"ratios must sum to 1, got sum={sum(ratios)!r}")

    by_class: dict[str, list[SampleRecord]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.label, []).append(rec)
    for label, recs in sorted(by_class.items()):
        if len(recs) < 3:
            raise InvalidArgumentError(
                f"class {label!r} has {len(recs)} samples; need at least 3 to split"
            )

    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    for label in sorted(by_class):
        recs = sorted(by_class[label], key=lambda r: r.sample_id)
        perm = rng.permutation(len(recs))
        quotas = _largest_remainder(len(recs), ratios)
        cursor = 0
        for split, quota in zip(SPLITS, quotas):
            for k in perm[cursor : cursor + quota]:
                assignment[recs[k].sample_id] = split
            cursor += quota

    out = [
        SampleRecord(
            sample_id=r.sample_id,
            label=r.label,
            split=assignment[r.sample_id],
            tensor_path=r.tensor_path,
            source_id=r.source_id,
        )
        for r in manifest.records
    ]
    return DatasetManifest(records=out)


def save_tensor(array: np.ndarray, path: str | Path) -> None:
    """Write a 3D array as little-endian float32 with a 16-byte header.

    Layout: 4-byte magic, three little-endian uint32 dims, then the C-order
    float32 payload.
    """
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim != 3:
        raise InvalidArgumentError(f"tensor must be 3D, got shape {arr.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<III", *arr.shape))
        fh.write(arr.tobytes())


def load_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor written by :func:`save_tensor`; returns float32."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != TENSOR_MAGIC:
        raise TensorFormatError(f"bad magic in {path}", offset=0)
    if len(data) < 16:
        raise TensorFormatError(f"truncated header in {path}", offset=len(data))
    dims = struct.unpack("<III", data[4:16])
    for i, d in enumerate(dims):
        if d == 0:
            raise TensorFormatError(f"zero dimension {i} in {path}", offset=4 + 4 * i)
    expected = 16 + 4 * int(np.prod(dims, dtype=np.int64))
    if len(data) != expected:
        raise TensorFormatError(
            f"payload size mismatch in {path}: expected {expected} bytes, got {len(data)}",
            offset=16,
        )
    return np.frombuffer(data[16:], dtype="<f4").reshape(dims).copy()


def save_samples(crops: Iterable["FaceCrop"], out_dir: str | Path) -> list[str]:
    """Persist face crops as [0, 1] float32 tensors; returns the paths.

    Files land at <out_dir>/<source_id>/<frame_index>_<ordinal>.tsr where
    the ordinal counts crops sharing a (source, frame) pair.
    """
    out_root = Path(out_dir)
    seen: dict[tuple[str, int], int] = {}
    paths = []
    for crop in crops:
        key = (crop.source_id, crop.frame_index)
        ordinal = seen.get(key, 0)
        seen[key] = ordinal + 1
        path = out_root / crop.source_id / f"{crop.frame_index}_{ordinal}{TENSOR_SUFFIX}"
        save_tensor((crop.image.astype(np.float64) / 255.0).astype("<f4"), path)
        paths.append(str(path))
    return paths


def load_sample(path: str | Path) -> np.ndarray:
    """Load one stored sample tensor (float32, values in [0, 1])."""
    return load_tensor(path)
