"""Command line interface.

Every subcommand reads an optional JSON config file; any config field can
be overridden by a flag of the same name (dashes for underscores). The
``explain`` subcommand additionally accepts its conventional short flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import FIELDS, validate_config
from .pipeline import STAGES, run_pipeline

_COMMANDS = {
    "scan": "screen input directories and erase corrupted videos",
    "preprocess": "decode videos, pick keyframes, emit face crops",
    "split": "build the labeled manifest and assign train/val/test",
    "weights": "compute class weights from the training split",
    "train": "fit the classifier with the weighted loss",
    "evaluate": "score the test split and render the confusion matrix",
    "explain": "emit relevance heatmaps for test samples",
    "run": "run every stage in order",
}

_EXPLAIN_ALIASES = {
    "method": "explain_methods",
    "class": "explain_class",
    "n": "smoothgrad_n",
    "sigma": "smoothgrad_sigma",
    "top_k": "scorecam_top_k",
    "out": "out_dir",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fakefinder",
        description="Detect deepfake faces in videos and explain the verdicts.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, help_text in _COMMANDS.items():
        sp = subparsers.add_parser(command, help=help_text)
        sp.add_argument("--config", help="path to a JSON config file")
        for name, spec in FIELDS.items():
            flag = "--" + name.replace("_", "-")
            if spec.parse.__name__ == "_as_bool":
                sp.add_argument(
                    flag,
                    dest=f"cfg_{name}",
                    action=argparse.BooleanOptionalAction,
                    default=None,
                    help=spec.help,
                )
            else:
                sp.add_argument(flag, dest=f"cfg_{name}", default=None, help=spec.help)
        if command == "scan":
            sp.add_argument(
                "--dry-run",
                dest="cfg_scan_dry_run",
                action="store_true",
                default=None,
                help="alias for --scan-dry-run",
            )
        if command == "explain":
            for short, target in _EXPLAIN_ALIASES.items():
                sp.add_argument(
                    "--" + short.replace("_", "-"),
                    dest=f"alias_{target}",
                    default=None,
                    help=f"alias for --{target.replace('_', '-')}",
                )
    return parser


def _coerce_flag(name: str, raw):
    """Flags arrive as strings; convert numerics so validation sees real types."""
    if not isinstance(raw, str):
        return raw
    if name in ("ratios", "explain_methods"):
        return raw
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _document_from_args(args: argparse.Namespace) -> dict | None:
    document = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            print(f"config file not found: {cfg_path}", file=sys.stderr)
            return None
        try:
            document = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as exc:
            print(f"config file is not valid JSON: {exc}", file=sys.stderr)
            return None
        if not isinstance(document, dict):
            print("config file must hold a JSON object", file=sys.stderr)
            return None
    for key, value in vars(args).items():
        if value is None:
            continue
        if key.startswith("cfg_"):
            document[key[4:]] = _coerce_flag(key[4:], value)
        elif key.startswith("alias_"):
            document[key[6:]] = _coerce_flag(key[6:], value)
    return document


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    document = _document_from_args(args)
    if document is None:
        return 2
    config, errors = validate_config(document)
    if errors:
        for err in errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    stages = list(STAGES) if args.command == "run" else [args.command]
    code = run_pipeline(config, stages)
    if code == 0 and args.command == "weights":
        weights_path = config.run_dir / "weights.json"
        print(weights_path.read_text().strip())
    return code


if __name__ == "__main__":
    sys.exit(main())
