"""Facial growth-direction prediction from longitudinal cephalometric landmarks.

Modules: ``geometry`` (landmarks, angles, Procrustes), ``features`` (feature
matrices and growth classes), ``augment`` (SMOTE-family oversampling and
cleaning), ``models`` (from-scratch classifiers), ``evaluation``
(cross-validation, t-tests, forward selection, rater agreement), ``synth``
(synthetic cohorts) and ``cli``.
"""

from .augment import AugmentationPlan, LabeledSet, augment
from .evaluation import CVConfig, ExperimentConfig, ExperimentResult, forward_selection, run_experiment, t_test
from .features import FeatureMatrix, GrowthClass, build_feature_matrix, categorize_target, default_specs
from .geometry import Cephalogram, Landmark, LandmarkRegistry, procrustes_align, sella_transform, sn_mp_angle
from .models import ClassifierConfig, make_classifier, parse_model
from .synth import CohortConfig, generate_cohort

__version__ = "0.1.0"

__all__ = [
    "AugmentationPlan", "LabeledSet", "augment",
    "CVConfig", "ExperimentConfig", "ExperimentResult", "forward_selection", "run_experiment", "t_test",
    "FeatureMatrix", "GrowthClass", "build_feature_matrix", "categorize_target", "default_specs",
    "Cephalogram", "Landmark", "LandmarkRegistry", "procrustes_align", "sella_transform", "sn_mp_angle",
    "ClassifierConfig", "make_classifier", "parse_model",
    "CohortConfig", "generate_cohort",
]
