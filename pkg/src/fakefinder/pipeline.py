"""End-to-end pipeline: scan, preprocess, split, weights, train, evaluate, explain.

Each stage writes its artifacts under one run directory, appends journal
entries, and records a content hash of its inputs; a rerun skips any stage
whose inputs are unchanged and whose outputs still exist. Within the
preprocess stage, videos are handled by a bounded worker pool.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import media_ingest
from .config import RunConfig
from .dataset import (
    DatasetManifest,
    build_manifest,
    load_sample,
    save_samples,
    stratified_split,
)
from .errors import InvalidArgumentError
from .explain import explain, resolve_class, write_heatmap, write_overlay
from .imbalance import ClassWeights, class_weights
from .keyframe import extract_keyframes
from .metrics import evaluate, predict_index
from .models import HeadConfig, make_backbone
from .trainer import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
    write_history_csv,
)

STAGES = ("scan", "preprocess", "split", "weights", "train", "evaluate", "explain")

DETECTORS = {
    "marker": media_ingest.MarkerDetector,
}


class RunJournal:
    """Append-only JSON Lines journal shared by all stages of a run."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, **entry) -> None:
        entry = {"ts": datetime.now(timezone.utc).isoformat(), **entry}
        line = json.dumps(entry)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    @staticmethod
    def read(path: str | Path) -> list[dict]:
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entries.append(json.loads(line))
        return entries


def journal_artifacts(path: str | Path) -> list[str]:
    """Replay a journal and list every artifact it records as written."""
    return [e["path"] for e in RunJournal.read(path) if e.get("event") == "artifact"]


def _hash_inputs(files: list[Path], params: dict) -> str:
    digest = hashlib.sha256()
    digest.update(json.dumps(params, sort_keys=True, default=str).encode())
    for path in sorted(files):
        digest.update(str(path).encode())
        digest.update(hashlib.sha256(path.read_bytes()).digest())
    return digest.hexdigest()


def _collect_videos_in(directory: str | Path) -> list[Path]:
    root = Path(directory)
    if not root.is_dir():
        return []
    return [
        p
        for p in sorted(root.iterdir())
        if p.is_file() and p.suffix.lower() in media_ingest.VIDEO_SUFFIXES
    ]


def _collect_videos(config: RunConfig) -> list[Path]:
    return _collect_videos_in(config.real_dir) + _collect_videos_in(config.fake_dir)


@dataclass
class _Paths:
    run_dir: Path

    @property
    def crops(self) -> Path:
        return self.run_dir / "crops"

    @property
    def tensors(self) -> Path:
        return self.run_dir / "tensors"

    @property
    def manifest(self) -> Path:
        return self.run_dir / "manifest.jsonl"

    @property
    def weights(self) -> Path:
        return self.run_dir / "weights.json"

    @property
    def checkpoint(self) -> Path:
        return self.run_dir / "checkpoint"

    @property
    def history(self) -> Path:
        return self.run_dir / "history.csv"

    @property
    def report(self) -> Path:
        return self.run_dir / "report.json"

    @property
    def confusion_image(self) -> Path:
        return self.run_dir / "confusion.png"

    @property
    def explain_dir(self) -> Path:
        return self.run_dir / "explain"

    @property
    def state(self) -> Path:
        return self.run_dir / "state"

    @property
    def journal(self) -> Path:
        return self.run_dir / "journal.jsonl"


def _stage_scan(config: RunConfig, paths: _Paths, journal: RunJournal) -> list[Path]:
    for directory in (config.real_dir, config.fake_dir):
        removed = media_ingest.purge_corrupted(directory, dry_run=config.scan_dry_run)
        journal.append(
            stage="scan",
            event="purged",
            directory=str(directory),
            dry_run=config.scan_dry_run,
            removed=removed,
        )
    return []


def _preprocess_one(video: Path, label: str, config: RunConfig, paths: _Paths):
    """Decode one video, pick keyframes on its face-crop track, emit crops.

    Returns (journal entries, artifact paths). The keyframe curve runs over
    the largest face per frame; at each selected frame every detected face
    is emitted.
    """
    detector = DETECTORS[config.detector]()
    entries: list[dict] = []
    artifacts: list[Path] = []
    seq = media_ingest.decode_frames(video, target_fps=config.target_fps)
    per_frame: list[tuple[int, list[media_ingest.BBox]]] = []
    faces_found = 0
    for idx in range(len(seq.frames)):
        boxes = media_ingest.detect_faces(seq.frames[idx], detector)
        faces_found += len(boxes)
        if boxes:
            per_frame.append((idx, boxes))
    entries.append(
        dict(
            stage="preprocess",
            event="video",
            source_id=seq.source_id,
            label=label,
            frame_count=len(seq.frames),
            faces_found=faces_found,
            partial=seq.partial,
        )
    )
    if len(per_frame) < 3:
        entries.append(
            dict(
                stage="preprocess",
                event="skipped",
                source_id=seq.source_id,
                reason=f"only {len(per_frame)} frames with faces; need 3",
            )
        )
        return entries, artifacts

    track = [
        media_ingest.crop_and_resize(seq.frames[i], boxes[0], seq.source_id, i).image
        for i, boxes in per_frame
    ]
    window = min(config.window, 2 * (len(track) - 1) - 1)
    keyset = extract_keyframes(track, window=window, order=config.order)
    entries.append(
        dict(
            stage="preprocess",
            event="keyframes",
            source_id=seq.source_id,
            indices=keyset.indices,
            scores=keyset.scores,
            window=window,
            order=config.order,
        )
    )
    crops = []
    for track_pos in keyset.indices:
        frame_idx, boxes = per_frame[track_pos]
        for box in boxes:
            crops.append(
                media_ingest.crop_and_resize(seq.frames[frame_idx], box, seq.source_id, frame_idx)
            )
    ordinals: dict[int, int] = {}
    for crop in crops:
        k = ordinals.get(crop.frame_index, 0)
        ordinals[crop.frame_index] = k + 1
        artifacts.append(Path(media_ingest.save_crop_png(crop, paths.crops / label, ordinal=k)))
    artifacts.extend(Path(p) for p in save_samples(crops, paths.tensors / label))
    return entries, artifacts


def _stage_preprocess(config: RunConfig, paths: _Paths, journal: RunJournal) -> list[Path]:
    jobs = [
        (video, label)
        for label, root in (("real", config.real_dir), ("fake", config.fake_dir))
        for video in _collect_videos_in(root)
    ]
    artifacts: list[Path] = []
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [
            pool.submit(_preprocess_one, video, label, config, paths) for video, label in jobs
        ]
        for future in futures:
            entries, paths_out = future.result()
            for entry in entries:
                journal.append(**entry)
            for p in paths_out:
                journal.append(stage="preprocess", event="artifact", path=str(p))
            artifacts.extend(paths_out)
    if not artifacts:
        raise InvalidArgumentError("preprocess produced no face crops")
    return artifacts


def _stage_split(config: RunConfig, paths: _Paths, journal: RunJournal) -> list[Path]:
    manifest = build_manifest(paths.tensors / "real", paths.tensors / "fake")
    manifest = stratified_split(manifest, ratios=tuple(config.ratios), seed=config.seed)
    manifest.save(paths.manifest)
    journal.append(stage="split", event="artifact", path=str(paths.manifest))
    journal.append(
        stage="split",
        event="counts",
        train=manifest.class_counts("train"),
        val=manifest.class_counts("val"),
        test=manifest.class_counts("test"),
    )
    return [paths.manifest]


def _stage_weights(config: RunConfig, paths: _Paths, journal: RunJournal) -> list[Path]:
    manifest = DatasetManifest.load(paths.manifest)
    weights = class_weights(manifest.class_counts("train"))
    with open(paths.weights, "w", encoding="utf-8") as fh:
        json.dump(weights.weights, fh, indent=2)
    journal.append(stage="weights", event="artifact", path=str(paths.weights))
    journal.append(stage="weights", event="computed", weights=weights.weights)
    return [paths.weights]


def _stage_train(config: RunConfig, paths: _Paths, journal: RunJournal) -> list[Path]:
    manifest = DatasetManifest.load(paths.manifest)
    with open(paths.weights, "r", encoding="utf-8") as fh:
        weights = ClassWeights(json.load(fh))
    backbone = make_backbone(config.backbone, config.seed)
    head_cfg = HeadConfig(dense_units=config.dense_units, dropout_rate=config.dropout_rate)
    train_cfg = TrainConfig(
        max_epochs=config.max_epochs,
        lr0=config.lr0,
        batch_size=config.batch_size,
        plateau_patience=config.plateau_patience,
        plateau_factor=config.plateau_factor,
        min_lr=config.min_lr,
        seed=config.seed,
        freeze_backbone=config.freeze_backbone,
    )
    model, history = train(manifest, backbone, head_cfg, train_cfg, weights)
    save_checkpoint(model, paths.checkpoint)
    write_history_csv(history, paths.history)
    journal.append(stage="train", event="artifact", path=str(paths.checkpoint / "params.json"))
    journal.append(stage="train", event="artifact", path=str(paths.history))
    journal.append(
        stage="train",
        event="finished",
        epochs=len(history.records),
        best_val_loss=history.best_val_loss(),
    )
    return [paths.checkpoint / "params.json", paths.history]


def _stage_evaluate(config: RunConfig, paths: _Paths, journal: RunJournal) -> list[Path]:
    model = load_checkpoint(paths.checkpoint)
    manifest = DatasetManifest.load(paths.manifest)
    result = evaluate(model, manifest, split="test", image_path=paths.confusion_image)
    with open(paths.report, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    journal.append(stage="evaluate", event="artifact", path=str(paths.report))
    journal.append(stage="evaluate", event="artifact", path=str(paths.confusion_image))
    journal.append(stage="evaluate", event="accuracy", accuracy=result.accuracy)
    return [paths.report, paths.confusion_image]


def _stage_explain(config: RunConfig, paths: _Paths, journal: RunJournal) -> list[Path]:
    model = load_checkpoint(paths.checkpoint)
    manifest = DatasetManifest.load(paths.manifest)
    records = manifest.split_records("test")[: config.explain_samples]
    if not records:
        raise InvalidArgumentError("manifest has no test records to explain")
    artifacts = []
    for record in records:
        x = np.asarray(load_sample(record.tensor_path), dtype=np.float64)
        crop = np.clip(np.rint(x * 255), 0, 255).astype(np.uint8)
        if config.explain_class == "predicted":
            target = predict_index(model.predict_proba(x))
        else:
            target = resolve_class(config.explain_class)
        stem = record.sample_id.replace("/", "_").rsplit(".", 1)[0]
        for method in config.explain_methods:
            heatmap = explain(
                model,
                x,
                method,
                target,
                n=config.smoothgrad_n,
                sigma=config.smoothgrad_sigma,
                seed=config.seed,
                top_k=min(config.scorecam_top_k, model.backbone.feature_dim),
            )
            base = paths.explain_dir / method
            artifacts.append(Path(write_overlay(heatmap, crop, base / f"{stem}.png")))
            artifacts.append(Path(write_heatmap(heatmap, base / f"{stem}.tsr")))
            journal.append(
                stage="explain",
                event="heatmap",
                sample_id=record.sample_id,
                method=method,
                target_class=heatmap.target_class,
            )
    for p in artifacts:
        journal.append(stage="explain", event="artifact", path=str(p))
    return artifacts


_STAGE_FUNCS = {
    "scan": _stage_scan,
    "preprocess": _stage_preprocess,
    "split": _stage_split,
    "weights": _stage_weights,
    "train": _stage_train,
    "evaluate": _stage_evaluate,
    "explain": _stage_explain,
}


def _stage_inputs(stage: str, config: RunConfig, paths: _Paths) -> tuple[list[Path], dict]:
    """Files and parameters whose content decides whether a stage can be skipped."""
    tensor_files = sorted(paths.tensors.rglob("*.tsr")) if paths.tensors.is_dir() else []
    ckpt_files = sorted(paths.checkpoint.glob("*")) if paths.checkpoint.is_dir() else []
    manifest_files = [paths.manifest] if paths.manifest.exists() else []
    weight_files = [paths.weights] if paths.weights.exists() else []
    if stage == "scan":
        return _collect_videos(config), {"scan_dry_run": config.scan_dry_run}
    if stage == "preprocess":
        return _collect_videos(config), {
            "target_fps": config.target_fps,
            "window": config.window,
            "order": config.order,
            "detector": config.detector,
        }
    if stage == "split":
        return tensor_files, {"ratios": config.ratios, "seed": config.seed}
    if stage == "weights":
        return manifest_files, {}
    if stage == "train":
        return manifest_files + weight_files + tensor_files, {
            "max_epochs": config.max_epochs,
            "lr0": config.lr0,
            "batch_size": config.batch_size,
            "plateau_patience": config.plateau_patience,
            "plateau_factor": config.plateau_factor,
            "min_lr": config.min_lr,
            "seed": config.seed,
            "freeze_backbone": config.freeze_backbone,
            "backbone": config.backbone,
            "dense_units": config.dense_units,
            "dropout_rate": config.dropout_rate,
        }
    if stage == "evaluate":
        return manifest_files + ckpt_files + tensor_files, {}
    if stage == "explain":
        return manifest_files + ckpt_files + tensor_files, {
            "explain_methods": config.explain_methods,
            "explain_class": config.explain_class,
            "explain_samples": config.explain_samples,
            "smoothgrad_n": config.smoothgrad_n,
            "smoothgrad_sigma": config.smoothgrad_sigma,
            "scorecam_top_k": config.scorecam_top_k,
            "seed": config.seed,
        }
    raise InvalidArgumentError(f"unknown stage {stage!r}")


def run_pipeline(config: RunConfig, stages: list[str] | None = None) -> int:
    """Execute the requested stages in order; returns a process exit code.

    Zero means every requested stage completed or was skipped as already
    up to date; any failure stops the run, is journaled with the failing
    stage, and yields a nonzero code.
    """
    requested = list(stages) if stages is not None else list(STAGES)
    for stage in requested:
        if stage not in STAGES:
            raise InvalidArgumentError(f"unknown stage {stage!r}; have {STAGES}")
    for directory in (config.real_dir, config.fake_dir):
        if not Path(directory).is_dir():
            raise InvalidArgumentError(f"input directory does not exist: {directory}")

    paths = _Paths(run_dir=config.run_dir)
    paths.run_dir.mkdir(parents=True, exist_ok=True)
    paths.state.mkdir(parents=True, exist_ok=True)
    journal = RunJournal(paths.journal)

    for stage in STAGES:
        if stage not in requested:
            continue
        state_file = paths.state / f"{stage}.json"
        files, params = _stage_inputs(stage, config, paths)
        current = _hash_inputs(files, params)
        if state_file.exists():
            state = json.loads(state_file.read_text())
            outputs_ok = all(Path(p).exists() for p in state.get("outputs", []))
            if state.get("input_hash") == current and outputs_ok:
                journal.append(stage=stage, event="stage_skipped", reason="inputs unchanged")
                continue
        started = time.monotonic()
        try:
            outputs = _STAGE_FUNCS[stage](config, paths, journal)
        except Exception as exc:
            journal.append(stage=stage, event="stage_failed", error=str(exc))
            return 1
        # hash recomputed after the stage so self-mutating stages (scan) settle
        files, params = _stage_inputs(stage, config, paths)
        state_file.write_text(
            json.dumps(
                {
                    "input_hash": _hash_inputs(files, params),
                    "outputs": [str(p) for p in outputs],
                    "completed_at": datetime.now(timezone.utc).isoformat(),
                }
            )
        )
        journal.append(
            stage=stage,
            event="stage_completed",
            seconds=round(time.monotonic() - started, 3),
            outputs=len(outputs),
        )
    return 0
