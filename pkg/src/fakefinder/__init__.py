"""Deepfake face detection for videos.

Pipeline pieces: corruption screening and face-crop extraction, keyframe
selection on inter-frame difference curves, stratified manifests,
cost-sensitive training of a pluggable-backbone classifier, evaluation
reports, and gradient-based heatmap explanations.
"""

from .config import RunConfig, validate_config
from .dataset import (
    LABELS,
    DatasetManifest,
    SampleRecord,
    build_manifest,
    load_sample,
    load_tensor,
    save_samples,
    save_tensor,
    stratified_split,
)
from .errors import (
    ConfigError,
    InvalidArgumentError,
    TensorFormatError,
    TrainingDivergedError,
)
from .explain import (
    Heatmap,
    explain,
    faster_scorecam,
    gradcam,
    gradcam_pp,
    overlay,
    saliency,
    smoothgrad,
)
from .imbalance import ClassWeights, class_weights, weighted_cross_entropy
from .keyframe import (
    DifferenceCurve,
    KeyframeSet,
    difference_curve,
    extract_keyframes,
    frame_difference,
    local_maxima,
    smooth,
)
from .media_ingest import (
    BBox,
    FaceCrop,
    FrameSequence,
    MarkerDetector,
    VideoMeta,
    crop_and_resize,
    decode_frames,
    detect_faces,
    plant_marker,
    probe_video,
    purge_corrupted,
)
from .metrics import ConfusionMatrix, EvalReport, confusion, evaluate, report
from .models import (
    ClassifierHead,
    FaceClassifier,
    HeadConfig,
    TinyConvBackbone,
    build_head,
)
from .pipeline import STAGES, run_pipeline
from .trainer import (
    AdamState,
    TrainConfig,
    TrainHistory,
    adam_step,
    load_checkpoint,
    plateau_schedule,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
