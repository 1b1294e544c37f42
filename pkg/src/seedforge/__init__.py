"""seedforge: superpixel-driven complementary patches, affinity-refined class
activation maps, conflict-aware pseudo labels, and mIoU evaluation."""

__version__ = "0.1.0"

from .acm import AcmParams, ConflictField, apply_acm, conflict_count, initial_pseudo_label, saliency_conflict
from .cam_refine import (
    CamStack,
    affinity_from_qk,
    average_affinity,
    clamp_negative,
    compute_cam,
    multiscale_aggregate,
    normalize_cam,
    refine_cam,
    resample_bilinear,
    strip_class_token,
)
from .errors import SeedforgeError
from .evaluation import ConfusionMatrix, accumulate, confusion_matrix, miou
from .fixtures import FixtureSpec, generate_fixtures
from .mecp import (
    ComplementaryPair,
    EstimationSchedule,
    HideMask,
    apply_complementary,
    derive_seed,
    generate_hide_mask,
    k_for_epoch,
    mecp_for_epoch,
)
from .pipeline import PipelineConfig, load_config, run_pipeline
from .slic import (
    SlicParams,
    SuperpixelLabeling,
    enforce_connectivity,
    rgb_to_lab,
    slic_segment,
    slic_segment_with_info,
)
from .tensor_io import read_png, read_tensor, write_png, write_tensor

__all__ = [
    "AcmParams",
    "CamStack",
    "ComplementaryPair",
    "ConflictField",
    "ConfusionMatrix",
    "EstimationSchedule",
    "FixtureSpec",
    "HideMask",
    "PipelineConfig",
    "SeedforgeError",
    "SlicParams",
    "SuperpixelLabeling",
    "accumulate",
    "affinity_from_qk",
    "apply_acm",
    "apply_complementary",
    "average_affinity",
    "clamp_negative",
    "compute_cam",
    "confusion_matrix",
    "conflict_count",
    "derive_seed",
    "enforce_connectivity",
    "generate_fixtures",
    "generate_hide_mask",
    "initial_pseudo_label",
    "k_for_epoch",
    "load_config",
    "mecp_for_epoch",
    "miou",
    "multiscale_aggregate",
    "normalize_cam",
    "read_png",
    "read_tensor",
    "refine_cam",
    "resample_bilinear",
    "rgb_to_lab",
    "run_pipeline",
    "saliency_conflict",
    "slic_segment",
    "slic_segment_with_info",
    "strip_class_token",
    "write_png",
    "write_tensor",
]
