"""starkit: beat-wise ECG resampling, comparator augmentations and diagnostics."""

__version__ = "0.1.0"

from .records import (
    EcgRecord,
    StarMetadata,
    StarParams,
    load_metadata,
    load_record,
    save_metadata,
    save_record,
    validate_record,
)
from .rpeaks import RPeakSet, SegmentMap, detect_rpeaks, rr_segments
from .star import (
    equalized_targets,
    interp_resample,
    sinusoidal_schedule,
    star_forward,
    star_inverse,
)
from .augment import (
    PolicyConfig,
    PolicyStep,
    TriangleParams,
    apply_policy,
    apply_transform,
    load_policy,
    multiply_triangle,
    save_policy,
    transform_kinds,
)
from .spectral import (
    DiagnosticsParams,
    apex_bias_sweep,
    local_snr,
    psd_shift,
    triangle_spectrum,
)
from .dataset import (
    CorpusIndex,
    FoldAssignment,
    encode_labels,
    harmonize_window,
    load_corpus_index,
    normalize_leads,
    save_fold_assignment,
    stratify_folds,
)
from .metrics import (
    PredictionSet,
    auroc,
    average_precision,
    bootstrap_ci,
    load_predictions,
    select_threshold,
)
from .synth import SynthSpec, WaveSpec, synth_ecg

__all__ = [
    "__version__",
    "EcgRecord", "StarMetadata", "StarParams",
    "load_record", "save_record", "validate_record",
    "load_metadata", "save_metadata",
    "RPeakSet", "SegmentMap", "detect_rpeaks", "rr_segments",
    "sinusoidal_schedule", "equalized_targets", "interp_resample",
    "star_forward", "star_inverse",
    "TriangleParams", "PolicyStep", "PolicyConfig",
    "multiply_triangle", "apply_transform", "apply_policy",
    "load_policy", "save_policy", "transform_kinds",
    "DiagnosticsParams", "triangle_spectrum", "psd_shift",
    "local_snr", "apex_bias_sweep",
    "CorpusIndex", "FoldAssignment", "harmonize_window", "normalize_leads",
    "stratify_folds", "encode_labels", "load_corpus_index",
    "save_fold_assignment",
    "PredictionSet", "auroc", "average_precision", "select_threshold",
    "bootstrap_ci", "load_predictions",
    "SynthSpec", "WaveSpec", "synth_ecg",
]
