"""Evaluation: Fréchet distance, downstream accuracy, discrimination and model selection."""

from .ablations import AblationRow, ensemble_gain, sample_size_scaling, summarize
from .classifier import ConvClassifier, FeatureExtractor, TrainedClassifier, train_classifier, train_feature_extractor
from .downstream import domain_discriminator, ensemble_accuracy, ensemble_members, train_downstream
from .frechet import fid_like_score, fit_gaussian, frechet_distance
from .models import (
    CLASSIFIER_ARCHS,
    ClassifierConfig,
    DiscriminatorResult,
    FidResult,
    GaussianFit,
    ModelSelectionRecord,
    SelectionStudy,
)
from .selection import best_in_top_k, expand_grid, model_selection_study, spearman

__all__ = [
    "CLASSIFIER_ARCHS",
    "ClassifierConfig",
    "GaussianFit",
    "FidResult",
    "DiscriminatorResult",
    "ModelSelectionRecord",
    "SelectionStudy",
    "ConvClassifier",
    "TrainedClassifier",
    "FeatureExtractor",
    "train_classifier",
    "train_feature_extractor",
    "fit_gaussian",
    "frechet_distance",
    "fid_like_score",
    "train_downstream",
    "ensemble_accuracy",
    "ensemble_members",
    "domain_discriminator",
    "spearman",
    "expand_grid",
    "best_in_top_k",
    "model_selection_study",
    "AblationRow",
    "summarize",
    "sample_size_scaling",
    "ensemble_gain",
]
