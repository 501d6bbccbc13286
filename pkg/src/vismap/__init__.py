"""Embedding-agnostic scene retrieval, visual map sampling, and localization benchmarking."""

from .core import (
    DescriptorMatrix,
    DescriptorStore,
    Frame,
    SceneGallery,
    Traversal,
    UNDEFINED_LABEL,
    euclidean_distance,
    mean_gallery_distance,
)
from .dataset_io import (
    ClassSpec,
    SyntheticSpec,
    generate_synthetic,
    load_traversal,
    write_traversal,
)
from .errors import (
    BundleFormatError,
    ConfigError,
    DimensionMismatch,
    MissingReference,
    ValidationError,
    VismapError,
)
from .localization import (
    LocalizationConfig,
    LocalizationReport,
    MapView,
    evaluate_localization,
    localize,
)
from .retrieval import Classification, SceneClassifier, classify, classify_traversal
from .sampling import (
    SamplerConfig,
    VisualMap,
    budgeted_distance_map,
    enforce_budget,
    sample_contextual,
    sample_distance,
    sample_dmc,
    sample_memorability,
)
from .scoring import GrayImage, biased_confidence, local_entropy_score

__version__ = "0.1.0"

__all__ = [
    "BundleFormatError",
    "Classification",
    "ClassSpec",
    "ConfigError",
    "DescriptorMatrix",
    "DescriptorStore",
    "DimensionMismatch",
    "Frame",
    "GrayImage",
    "LocalizationConfig",
    "LocalizationReport",
    "MapView",
    "MissingReference",
    "SamplerConfig",
    "SceneClassifier",
    "SceneGallery",
    "SyntheticSpec",
    "Traversal",
    "UNDEFINED_LABEL",
    "ValidationError",
    "VismapError",
    "VisualMap",
    "biased_confidence",
    "budgeted_distance_map",
    "classify",
    "classify_traversal",
    "enforce_budget",
    "euclidean_distance",
    "evaluate_localization",
    "generate_synthetic",
    "load_traversal",
    "local_entropy_score",
    "localize",
    "mean_gallery_distance",
    "sample_contextual",
    "sample_distance",
    "sample_dmc",
    "sample_memorability",
    "write_traversal",
]
