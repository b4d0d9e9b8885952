"""Post-training confidence scores. Higher always means more in-distribution."""

from .features import layer_features, load_feature_csv, save_feature_csv
from .gram import (
    GramSignature,
    StateError,
    compute_normalizers,
    fit_gram,
    gram_deviation,
    gram_entries,
    gram_score,
)
from .mahalanobis import (
    EnsembleWeights,
    GaussianStats,
    MahalanobisDetector,
    fit_ensemble,
    fit_mahalanobis,
    input_preprocess,
    mahalanobis_score,
)
from .msp import msp_score

__all__ = [
    "EnsembleWeights",
    "GaussianStats",
    "GramSignature",
    "MahalanobisDetector",
    "StateError",
    "compute_normalizers",
    "fit_ensemble",
    "fit_gram",
    "fit_mahalanobis",
    "gram_deviation",
    "gram_entries",
    "gram_score",
    "input_preprocess",
    "layer_features",
    "load_feature_csv",
    "mahalanobis_score",
    "msp_score",
    "save_feature_csv",
]
