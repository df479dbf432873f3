"""Data models for evaluation results."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import (
    CLASSIFIER_BATCH_SIZE,
    CLASSIFIER_LEARNING_RATE,
    CLASSIFIER_MOMENTUM,
    CLASSIFIER_STEPS,
    DISCRIMINATOR_MIN_ACCURACY,
    FEATURE_DIM,
)
from ..utils.errors import EvaluationError

CLASSIFIER_ARCHS = {
    "conv-small": (8, 16),
    "conv-wide": (16, 32),
}

EIGENVALUE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class GaussianFit:
    """Mean μ (F,) and symmetric PSD covariance Σ (F, F) of a feature cloud."""

    mean: np.ndarray
    cov: np.ndarray
    count: int = 0
    regularized: bool = False

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise EvaluationError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        scale = max(1.0, float(np.abs(cov).max()) if cov.size else 1.0)
        if not np.allclose(cov, cov.T, atol=EIGENVALUE_TOLERANCE * scale, rtol=0):
            raise EvaluationError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if cov.size:
            eigvals, eigvecs = np.linalg.eigh(cov)
            if eigvals.min() < -EIGENVALUE_TOLERANCE * scale:
                raise EvaluationError(f"covariance is not positive semi-definite (eigenvalue {eigvals.min():.3g})")
            if eigvals.min() < 0:
                cov = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    def same_as(self, other: "GaussianFit") -> bool:
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)


@dataclass(frozen=True)
class ClassifierConfig:
    """
    Non-private classifier training: SGD with (Nesterov) momentum, weight
    decay, label smoothing and flip/shift augmentation.

    `init_seed` drives weight initialisation, `batch_seed` minibatch
    sampling and augmentation; ensemble members differ only in the latter.
    """

    arch: str = "conv-small"
    steps: int = CLASSIFIER_STEPS
    batch_size: int = CLASSIFIER_BATCH_SIZE
    learning_rate: float = CLASSIFIER_LEARNING_RATE
    momentum: float = CLASSIFIER_MOMENTUM
    nesterov: bool = True
    weight_decay: float = 0.0
    label_smoothing: float = 0.0
    flip: bool = True
    max_shift: int = 2
    feature_dim: int = FEATURE_DIM
    init_seed: int = 0
    batch_seed: int = 0

    def __post_init__(self):
        if self.arch not in CLASSIFIER_ARCHS:
            raise EvaluationError(f"unknown classifier architecture '{self.arch}'")
        if self.steps < 0 or self.batch_size < 1:
            raise EvaluationError("classifier steps must be >= 0 and batch_size >= 1")
        if not self.learning_rate > 0 or not 0 <= self.momentum < 1:
            raise EvaluationError("classifier learning_rate must be > 0 and momentum in [0, 1)")
        if self.weight_decay < 0 or not 0 <= self.label_smoothing < 1:
            raise EvaluationError("weight_decay must be >= 0 and label_smoothing in [0, 1)")


@dataclass(frozen=True)
class FidResult:
    score: float
    per_class: Dict[int, float] = field(default_factory=dict)
    regularized: bool = False
    real_count: int = 0
    synthetic_count: int = 0


@dataclass(frozen=True)
class DiscriminatorResult:
    """Share of synthetic samples the domain discriminator calls fine-tune."""

    fraction_finetune: float
    test_accuracy: float
    finetune_recall: float
    pretrain_recall: float
    per_class: Dict[int, float] = field(default_factory=dict)

    @property
    def reliable(self) -> bool:
        return self.test_accuracy >= DISCRIMINATOR_MIN_ACCURACY


@dataclass(frozen=True)
class ModelSelectionRecord:
    """One grid point: accuracy when trained and tested on synthetic vs real sources."""

    arch: str
    learning_rate: float
    weight_decay: float
    accuracy_synthetic: float
    accuracy_real: float

    def __post_init__(self):
        for name in ("accuracy_synthetic", "accuracy_real"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise EvaluationError(f"{name} must lie in [0, 1], got {value}")

    @property
    def key(self) -> str:
        return f"{self.arch}/lr={self.learning_rate:g}/wd={self.weight_decay:g}"


@dataclass(frozen=True)
class SelectionStudy:
    """
    Setting (a) trains on synthetic data and tests on synthetic and real test
    splits; setting (b) trains each config on each source and tests on that
    source. Undefined rank correlations are None.
    """

    setting_a: List[ModelSelectionRecord]
    setting_b: List[ModelSelectionRecord]
    rho_a: Optional[float]
    rho_b: Optional[float]
    best_real_in_top2_a: bool
    best_real_in_top2_b: bool
