"""Run configuration: one document holding every pipeline parameter.

Validation rejects unknown keys, fills documented defaults, and reports
every problem at once rather than stopping at the first.
"""

from __future__ import annotations

from dataclasses import MISSING, dataclass, fields as dataclass_fields
from pathlib import Path
from typing import Any, Callable

from .explain import METHODS
from .models import BACKBONES

EXPLAIN_CLASSES = ("predicted", "real", "fake")


@dataclass
class RunConfig:
    """All pipeline knobs; paths and max_epochs are the only required ones."""

    real_dir: str
    fake_dir: str
    out_dir: str
    max_epochs: int
    run_id: str = "run"
    seed: int = 0
    target_fps: float = 30.0
    detector: str = "marker"
    scan_dry_run: bool = False
    workers: int = 1
    window: int = 9
    order: int = 3
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    backbone: str = "tiny"
    dense_units: int = 256
    dropout_rate: float = 0.5
    lr0: float = 1e-3
    batch_size: int = 16
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    freeze_backbone: bool = True
    explain_methods: tuple[str, ...] = METHODS
    explain_class: str = "predicted"
    explain_samples: int = 1
    smoothgrad_n: int = 25
    smoothgrad_sigma: float = 0.10
    scorecam_top_k: int = 8

    @property
    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.run_id


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _as_float(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _as_str(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _as_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected a boolean, got {value!r}")
    return value


def _as_ratios(value: Any) -> tuple[float, ...]:
    if isinstance(value, str):
        value = [part.strip() for part in value.split(",")]
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"expected three numbers, got {value!r}")
    return tuple(float(v) for v in value)


def _as_methods(value: Any) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [part.strip() for part in value.split(",")]
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"expected method names, got {value!r}")
    return tuple(value)


@dataclass
class Field:
    parse: Callable[[Any], Any]
    check: Callable[[Any], str | None] = lambda v: None
    required: bool = False
    help: str = ""


def _ok(_v: Any) -> str | None:
    return None


FIELDS: dict[str, Field] = {
    "real_dir": Field(_as_str, required=True, help="directory of real videos"),
    "fake_dir": Field(_as_str, required=True, help="directory of fake videos"),
    "out_dir": Field(_as_str, required=True, help="output root; run artifacts land in out_dir/run_id"),
    "max_epochs": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1", required=True,
        help="training epoch budget",
    ),
    "run_id": Field(_as_str, help="name of this run's artifact directory"),
    "seed": Field(_as_int, help="seed for splitting, initialization, and shuffling"),
    "target_fps": Field(
        _as_float, lambda v: None if v > 0 else "must be positive",
        help="frame rate videos are resampled to",
    ),
    "detector": Field(
        _as_str, lambda v: None if v in ("marker",) else "unknown detector",
        help="face detection backend",
    ),
    "scan_dry_run": Field(_as_bool, help="list corrupted videos instead of deleting them"),
    "workers": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1",
        help="parallel workers for per-video preprocessing",
    ),
    "window": Field(
        _as_int, lambda v: None if v >= 1 and v % 2 == 1 else "must be a positive odd integer",
        help="smoothing window (curve samples) for keyframe selection",
    ),
    "order": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1",
        help="neighborhood radius for local maxima",
    ),
    "ratios": Field(
        _as_ratios,
        lambda v: (
            None
            if len(v) == 3 and all(r > 0 for r in v) and abs(sum(v) - 1.0) <= 1e-9
            else "must be three positive values summing to 1"
        ),
        help="train/val/test fractions",
    ),
    "backbone": Field(
        _as_str, lambda v: None if v in BACKBONES else f"unknown backbone (have {sorted(BACKBONES)})",
        help="feature extractor to train on",
    ),
    "dense_units": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1", help="classifier head width",
    ),
    "dropout_rate": Field(
        _as_float, lambda v: None if 0 <= v < 1 else "must be in [0, 1)",
        help="head dropout rate (training only)",
    ),
    "lr0": Field(
        _as_float, lambda v: None if v >= 0 else "must be >= 0", help="initial learning rate",
    ),
    "batch_size": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1", help="training batch size",
    ),
    "plateau_patience": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1",
        help="epochs without improvement before the rate drops",
    ),
    "plateau_factor": Field(
        _as_float, lambda v: None if 0 < v < 1 else "must be in (0, 1)",
        help="multiplier applied to the rate on a plateau",
    ),
    "min_lr": Field(
        _as_float, lambda v: None if v > 0 else "must be positive", help="learning rate floor",
    ),
    "freeze_backbone": Field(_as_bool, help="train only the head (default) or fine-tune everything"),
    "explain_methods": Field(
        _as_methods,
        lambda v: (
            None
            if v and all(m in METHODS for m in v)
            else f"must be a non-empty subset of {METHODS}"
        ),
        help="heatmap methods to emit",
    ),
    "explain_class": Field(
        _as_str,
        lambda v: None if v in EXPLAIN_CLASSES else f"must be one of {EXPLAIN_CLASSES}",
        help="class to explain: the model's prediction, or a fixed label",
    ),
    "explain_samples": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1",
        help="how many test samples to explain",
    ),
    "smoothgrad_n": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1",
        help="noisy copies averaged by smoothgrad",
    ),
    "smoothgrad_sigma": Field(
        _as_float, lambda v: None if v >= 0 else "must be >= 0",
        help="noise level as a fraction of input dynamic range",
    ),
    "scorecam_top_k": Field(
        _as_int, lambda v: None if v >= 1 else "must be >= 1",
        help="channels scored by faster_scorecam",
    ),
}


_DEFAULTS = {
    f.name: f.default for f in dataclass_fields(RunConfig) if f.default is not MISSING
}


def validate_config(document: dict) -> tuple[RunConfig | None, list[str]]:
    """Normalize a config document; returns (config, []) or (None, errors).

    Every error is reported: unknown keys, missing required fields, type
    problems, and constraint violations.
    """
    errors = [f"unknown field {key!r}" for key in document if key not in FIELDS]
    values = {}
    for name, spec in FIELDS.items():
        if name in document:
            try:
                parsed = spec.parse(document[name])
            except (ValueError, TypeError) as exc:
                errors.append(f"{name}: {exc}")
                continue
        elif spec.required:
            errors.append(f"{name}: required field is missing")
            continue
        else:
            parsed = _DEFAULTS[name]
        problem = spec.check(parsed)
        if problem:
            errors.append(f"{name}: {problem}")
            continue
        values[name] = parsed
    if errors:
        return None, errors
    return RunConfig(**values), []
