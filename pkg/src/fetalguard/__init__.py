"""Semi-supervised abnormality detection for fetal heart rate recordings."""

from .autoencoder import AeConfig, AeModel, train_ae
from .errors import FetalGuardError
from .ganomaly import GanomalyConfig, GanomalyModel, train_ganomaly
from .iforest import IforestConfig, IsolationForestModel, build_forest
from .ingest import ClassLabel, ClinicalMetadata, SignalRecord, assign_label
from .preprocess import FeatureVector, PreprocessConfig, preprocess_pipeline

__version__ = "0.1.0"

__all__ = [
    "AeConfig",
    "AeModel",
    "ClassLabel",
    "ClinicalMetadata",
    "FeatureVector",
    "FetalGuardError",
    "GanomalyConfig",
    "GanomalyModel",
    "IforestConfig",
    "IsolationForestModel",
    "PreprocessConfig",
    "SignalRecord",
    "assign_label",
    "build_forest",
    "preprocess_pipeline",
    "train_ae",
    "train_ganomaly",
    "__version__",
]
