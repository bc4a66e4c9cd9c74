"""Synthetic video builders for the ingest and pipeline tests."""

from pathlib import Path

import cv2
import numpy as np

from fakefinder.media_ingest import BBox, plant_marker


def write_video(path: Path, frames: np.ndarray, fps: float = 30.0, codec: str = "FFV1") -> Path:
    """Encode RGB frames; FFV1 keeps the pixels bit-exact."""
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = frames.shape[1:3]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*codec), fps, (w, h))
    assert writer.isOpened(), f"VideoWriter refused {codec} at {path}"
    for frame in frames:
        writer.write(frame[:, :, ::-1])  # RGB -> BGR
    writer.release()
    return path


def indexed_frames(n: int, size=(64, 96)) -> np.ndarray:
    """Frames whose uniform gray value encodes the frame index (lossless-safe)."""
    h, w = size
    frames = np.zeros((n, h, w, 3), dtype=np.uint8)
    for i in range(n):
        frames[i] = (i * 2) % 256
    return frames


def _segment_texture(label: str, seg: int, size: int) -> np.ndarray:
    """Per-segment face interior: smooth ramps for real, checkers for fake."""
    if label == "real":
        ramp = np.linspace(40 + 10 * seg, 160 + 5 * seg, size) % 256
        tile = np.stack(
            [
                np.tile(ramp, (size, 1)),
                np.full((size, size), 90.0 + 12 * seg),
                np.tile(ramp[::-1], (size, 1)),
            ],
            axis=2,
        )
    else:
        grid = ((np.add.outer(np.arange(size), np.arange(size)) // 4 + seg) % 2) * 255.0
        tile = np.stack([grid, grid * 0.2, 255.0 - grid], axis=2)
    return tile.astype(np.uint8)


def fixture_video(
    path: Path,
    label: str,
    seed: int = 0,
    segments: int = 10,
    seg_len: int = 4,
    size=(96, 128),
    fps: float = 30.0,
) -> Path:
    """A clip whose single marked face changes texture at segment boundaries.

    The texture jumps give the face-crop difference curve sharp spikes, so
    keyframe selection lands on the boundaries.
    """
    rng = np.random.default_rng(seed)
    h, w = size
    face = 40
    frames = np.zeros((segments * seg_len, h, w, 3), dtype=np.uint8)
    for seg in range(segments):
        base = np.full((h, w, 3), 120, dtype=np.uint8)
        top = int(rng.integers(8, h - face - 8))
        left = int(rng.integers(8, w - face - 8))
        box = BBox(top, left, top + face, left + face)
        base[box.top : box.bottom, box.left : box.right] = _segment_texture(label, seg, face)
        plant_marker(base, box, thickness=4)
        for k in range(seg_len):
            frames[seg * seg_len + k] = base
    return write_video(path, frames, fps=fps)


def zero_byte_video(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"")
    return path


def truncated_video(path: Path, n_frames: int = 90, keep_fraction: float = 0.2) -> Path:
    """An MJPG clip cut mid-stream so only a prefix of frames decodes."""
    rng = np.random.default_rng(123)
    frames = (rng.random((n_frames, 64, 96, 3)) * 255).astype(np.uint8)
    full = path.with_name("full_" + path.name)
    write_video(full, frames, fps=30.0, codec="MJPG")
    data = full.read_bytes()
    path.write_bytes(data[: int(len(data) * keep_fraction)])
    full.unlink()
    return path
