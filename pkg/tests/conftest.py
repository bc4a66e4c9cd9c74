import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from fakefinder.models import FaceClassifier, HeadConfig, TinyConvBackbone, build_head

import benchmarks
import video_fixtures


@pytest.fixture(scope="session")
def tiny_model() -> FaceClassifier:
    """A small random classifier (seeded backbone + seeded head)."""
    backbone = TinyConvBackbone(seed=7)
    head = build_head(backbone.feature_dim, HeadConfig())
    head.init_random(np.random.default_rng(42))
    return FaceClassifier(backbone, head)


@pytest.fixture(scope="session")
def patch_model() -> FaceClassifier:
    """A classifier trained on the balanced patch benchmark."""
    return benchmarks.trained_patch_model()


@pytest.fixture(scope="session")
def e2e_run(tmp_path_factory):
    """One full pipeline run over the two-video synthetic fixture.

    Returns (config, exit_code, elapsed_seconds); shared across tests since
    the run is deterministic.
    """
    from fakefinder.config import validate_config
    from fakefinder.pipeline import run_pipeline

    root = tmp_path_factory.mktemp("e2e")
    real_dir = root / "videos" / "real"
    fake_dir = root / "videos" / "fake"
    video_fixtures.fixture_video(real_dir / "real_clip.avi", "real", seed=1)
    video_fixtures.fixture_video(fake_dir / "fake_clip.avi", "fake", seed=2)
    config, errors = validate_config(
        {
            "real_dir": str(real_dir),
            "fake_dir": str(fake_dir),
            "out_dir": str(root / "out"),
            "max_epochs": 20,
            "seed": 3,
            "explain_samples": 1,
            "smoothgrad_n": 8,
        }
    )
    assert not errors, errors
    started = time.monotonic()
    code = run_pipeline(config)
    elapsed = time.monotonic() - started
    return config, code, elapsed
