"""Multi-sensor maritime situational awareness with fused, security-aware
confidence scoring (DFCR), plus the attack generators and baseline defenses
needed to evaluate it."""

from .core import (
    AisStaticData,
    BoundingBox,
    ClassLabel,
    DetectionVector,
    GroundTruthObject,
    RadarBlob,
    Scenario,
    SensorConfig,
    SensorKind,
    build_feature_vectors,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    truth_vector,
)
from .geometry import (
    GaussianGate,
    Homography,
    estimate_homography,
    position_likelihood,
    project_point,
    sector_map,
)
from .scoring import ConfidenceTrace, DeltaConfig, adjust_confidence, run_pipeline
from .validation import MatchRecord, SvmModel, associate_contacts, svm_decide, train_svm
from .metrics import MetricSet, WilcoxonResult, compute_metrics, wilcoxon_signed_rank
from .experiments import ExperimentConfig, default_experiment_config, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AisStaticData",
    "BoundingBox",
    "ClassLabel",
    "ConfidenceTrace",
    "DeltaConfig",
    "DetectionVector",
    "ExperimentConfig",
    "GaussianGate",
    "GroundTruthObject",
    "Homography",
    "MatchRecord",
    "MetricSet",
    "RadarBlob",
    "Scenario",
    "SensorConfig",
    "SensorKind",
    "SvmModel",
    "WilcoxonResult",
    "adjust_confidence",
    "associate_contacts",
    "build_feature_vectors",
    "compute_metrics",
    "default_experiment_config",
    "estimate_homography",
    "generate_scenario",
    "position_likelihood",
    "project_point",
    "run_experiment",
    "run_pipeline",
    "scenario_from_json",
    "scenario_to_json",
    "sector_map",
    "svm_decide",
    "train_svm",
    "truth_vector",
    "wilcoxon_signed_rank",
]
