"""Video decoding, corruption screening, face detection, and face crops.

All frames are handled in RGB channel order. Decoding is backed by OpenCV;
face detection is a pluggable interface so any external detector can be
adapted in, and a deterministic marker detector ships for tests and
synthetic runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import cv2
import numpy as np
from PIL import Image

from .errors import InvalidArgumentError
from .imageops import bilinear_resize

log = logging.getLogger(__name__)

CROP_SIZE = 224
VIDEO_SUFFIXES = (".avi", ".mkv", ".mov", ".mp4", ".mpeg", ".mpg", ".webm")


@dataclass
class VideoMeta:
    """Probe result for one video file.

    ``frame_count`` is the number of frames that actually decode, which can
    be fewer than the container declares for damaged files; ``partial`` is
    set in that case. ``readable`` implies at least one decodable frame and
    a positive frame rate.
    """

    path: str
    frame_count: int = 0
    fps: float = 0.0
    width: int = 0
    height: int = 0
    readable: bool = False
    partial: bool = False


@dataclass
class FrameSequence:
    """Ordered decoded RGB frames of one video."""

    source_id: str
    fps: float
    frames: np.ndarray  # (N, H, W, 3) uint8
    partial: bool = False

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class BBox:
    """Pixel rectangle with exclusive bottom/right edges."""

    top: int
    left: int
    bottom: int
    right: int

    @property
    def area(self) -> int:
        return max(0, self.bottom - self.top) * max(0, self.right - self.left)


@dataclass
class FaceCrop:
    """A 224x224 RGB face crop with its provenance."""

    image: np.ndarray  # (224, 224, 3) uint8
    source_id: str
    frame_index: int
    bbox: BBox


class FaceDetector(Protocol):
    """Detection backend interface: one frame in, zero or more boxes out."""

    def detect(self, frame: np.ndarray) -> list[BBox]: ...


class CallableDetector:
    """Adapter wrapping any ``frame -> list[BBox]`` callable as a backend."""

    def __init__(self, fn: Callable[[np.ndarray], list[BBox]]):
        self._fn = fn

    def detect(self, frame: np.ndarray) -> list[BBox]:
        return self._fn(frame)


MARKER_COLOR = (255, 0, 255)


@dataclass
class MarkerDetector:
    """Deterministic detector that finds planted marker rectangles.

    A marker is a connected region of pixels within ``tolerance`` of the
    marker color on every channel; the detection is that region's bounding
    box. Synthetic frames plant markers with :func:`plant_marker`, and the
    tolerance absorbs lossy-codec drift when markers travel through video
    files.
    """

    color: tuple[int, int, int] = MARKER_COLOR
    tolerance: int = 60
    min_area: int = 9

    def detect(self, frame: np.ndarray) -> list[BBox]:
        img = np.asarray(frame)
        if img.ndim != 3 or img.shape[2] != 3:
            raise InvalidArgumentError(f"expected HxWx3 frame, got shape {img.shape}")
        diff = np.abs(img.astype(np.int16) - np.array(self.color, dtype=np.int16))
        mask = np.all(diff <= self.tolerance, axis=2)
        boxes = []
        visited = np.zeros_like(mask)
        for r0, c0 in zip(*np.nonzero(mask)):
            if visited[r0, c0]:
                continue
            stack = [(r0, c0)]
            visited[r0, c0] = True
            rows, cols = [r0], [c0]
            while stack:
                r, c = stack.pop()
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if (
                        0 <= rr < mask.shape[0]
                        and 0 <= cc < mask.shape[1]
                        and mask[rr, cc]
                        and not visited[rr, cc]
                    ):
                        visited[rr, cc] = True
                        stack.append((rr, cc))
                        rows.append(rr)
                        cols.append(cc)
            box = BBox(min(rows), min(cols), max(rows) + 1, max(cols) + 1)
            if box.area >= self.min_area:
                boxes.append(box)
        return boxes


def plant_marker(
    frame: np.ndarray,
    bbox: BBox,
    thickness: int = 0,
    color: tuple[int, int, int] = MARKER_COLOR,
) -> None:
    """Draw a marker rectangle in place for the marker detector to find.

    ``thickness`` 0 fills the whole box; a positive value draws only a ring
    of that width, leaving the interior untouched.
    """
    t, l, b, r = bbox.top, bbox.left, bbox.bottom, bbox.right
    col = np.array(color, dtype=frame.dtype)
    if thickness <= 0:
        frame[t:b, l:r] = col
        return
    frame[t : min(t + thickness, b), l:r] = col
    frame[max(b - thickness, t) : b, l:r] = col
    frame[t:b, l : min(l + thickness, r)] = col
    frame[t:b, max(r - thickness, l) : r] = col


def probe_video(path: str | Path) -> VideoMeta:
    """Inspect a video file by decoding it end to end.

    Missing files raise FileNotFoundError; unopenable or zero-frame files
    come back with ``readable=False``. Counting decoded frames (rather than
    trusting container metadata) is what lets damaged-but-salvageable files
    be distinguished from dead ones.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"video does not exist: {p}")
    cap = cv2.VideoCapture(str(p))
    if not cap.isOpened():
        return VideoMeta(path=str(p))
    fps = float(cap.get(cv2.CAP_PROP_FPS) or 0.0)
    width = int(cap.get(cv2.CAP_PROP_FRAME_WIDTH) or 0)
    height = int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT) or 0)
    declared = int(cap.get(cv2.CAP_PROP_FRAME_COUNT) or 0)
    decoded = 0
    while True:
        ok, _ = cap.read()
        if not ok:
            break
        decoded += 1
    cap.release()
    partial = 0 < decoded < declared
    if partial:
        log.warning("partial decode of %s: %d of %d frames", p, decoded, declared)
    return VideoMeta(
        path=str(p),
        frame_count=decoded,
        fps=fps,
        width=width,
        height=height,
        readable=decoded >= 1 and fps > 0,
        partial=partial,
    )


def purge_corrupted(directory: str | Path, dry_run: bool = False) -> list[str]:
    """Delete (or with ``dry_run``, just list) unreadable videos in a directory.

    Only files with a known video suffix are considered. Deletion failures
    are logged per file and do not stop the sweep. Running twice is a no-op:
    the second call returns an empty list.
    """
    root = Path(directory)
    if not root.is_dir():
        raise InvalidArgumentError(f"not a directory: {root}")
    removed = []
    for path in sorted(root.iterdir()):
        if not path.is_file() or path.suffix.lower() not in VIDEO_SUFFIXES:
            continue
        if probe_video(path).readable:
            continue
        if dry_run:
            removed.append(str(path))
            continue
        try:
            path.unlink()
            removed.append(str(path))
        except OSError as exc:
            log.error("could not delete %s: %s", path, exc)
    return removed


def decode_frames(path: str | Path, target_fps: float = 30.0) -> FrameSequence:
    """Decode a video and resample it to ``target_fps`` frames per second.

    Resampling picks the nearest source frame: output frame i comes from
    source index round(i * src_fps / target_fps) (half rounds up), clamped
    to the last decoded frame. Output length is round(n_src * target_fps /
    src_fps). If decoding stops early the salvaged frames are returned with
    ``partial`` set.
    """
    if target_fps <= 0:
        raise InvalidArgumentError(f"target_fps must be positive, got {target_fps}")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"video does not exist: {p}")
    cap = cv2.VideoCapture(str(p))
    if not cap.isOpened():
        raise InvalidArgumentError(f"cannot open video: {p}")
    src_fps = float(cap.get(cv2.CAP_PROP_FPS) or 0.0)
    declared = int(cap.get(cv2.CAP_PROP_FRAME_COUNT) or 0)
    frames = []
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        frames.append(frame[:, :, ::-1])  # BGR -> RGB
    cap.release()
    if not frames or src_fps <= 0:
        raise InvalidArgumentError(f"no decodable frames in {p}")
    src = np.stack(frames)
    n_src = len(src)
    n_out = int(np.floor(n_src * target_fps / src_fps + 0.5))
    idx = np.floor(np.arange(n_out) * (src_fps / target_fps) + 0.5).astype(np.intp)
    idx = np.minimum(idx, n_src - 1)
    return FrameSequence(
        source_id=p.stem,
        fps=target_fps,
        frames=src[idx],
        partial=0 < n_src < declared,
    )


def detect_faces(frame: np.ndarray, detector: FaceDetector) -> list[BBox]:
    """Run a detection backend and order the boxes largest-area first.

    Ties break on (top, left, bottom, right), making the ordering total and
    deterministic for a fixed backend.
    """
    if np.asarray(frame).size == 0:
        raise InvalidArgumentError("frame is empty")
    boxes = detector.detect(frame)
    return sorted(boxes, key=lambda b: (-b.area, b.top, b.left, b.bottom, b.right))


def crop_and_resize(frame: np.ndarray, bbox: BBox, source_id: str = "", frame_index: int = 0) -> FaceCrop:
    """Cut a box out of a frame and bilinearly resample it to 224x224."""
    img = np.asarray(frame)
    h, w = img.shape[:2]
    if not (0 <= bbox.top < bbox.bottom <= h and 0 <= bbox.left < bbox.right <= w):
        raise InvalidArgumentError(f"bbox {bbox} invalid or degenerate for {h}x{w} frame")
    region = img[bbox.top : bbox.bottom, bbox.left : bbox.right].astype(np.float64)
    resized = bilinear_resize(region, CROP_SIZE, CROP_SIZE)
    out = np.clip(np.rint(resized), 0, 255).astype(np.uint8)
    return FaceCrop(image=out, source_id=source_id, frame_index=frame_index, bbox=bbox)


def save_crop_png(crop: FaceCrop, out_dir: str | Path, ordinal: int = 0) -> str:
    """Write a crop as <out_dir>/<source_id>/<frame_index>_<ordinal>.png."""
    path = Path(out_dir) / crop.source_id / f"{crop.frame_index}_{ordinal}.png"
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(crop.image, mode="RGB").save(path)
    return str(path)
