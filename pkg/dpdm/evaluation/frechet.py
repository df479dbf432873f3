"""Fréchet distance between Gaussian fits of classifier embeddings."""

import logging
import math
from typing import Dict

import numpy as np

from .classifier import TrainedClassifier
from .models import FidResult, GaussianFit
from ..config import FID_REGULARIZATION
from ..data.models import LabeledImageSet
from ..utils.errors import EvaluationError

logger = logging.getLogger(__name__)


def fit_gaussian(features: np.ndarray, regularization: float = FID_REGULARIZATION) -> GaussianFit:
    """
    Sample mean and covariance. With fewer than F+1 rows the covariance is
    singular and gets `regularization`·I added; the fit is flagged.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise EvaluationError(f"need a non-empty (n, F) feature matrix, got shape {features.shape}")
    n, dim = features.shape
    mean = features.mean(axis=0)
    cov = np.cov(features, rowvar=False).reshape(dim, dim) if n > 1 else np.zeros((dim, dim))
    regularized = n < dim + 1
    if regularized:
        cov = cov + regularization * np.eye(dim)
    return GaussianFit(mean=mean, cov=cov, count=n, regularized=regularized)


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def frechet_distance(a: GaussianFit, b: GaussianFit) -> float:
    """
    ‖μ_a − μ_b‖² + Tr(Σ_a + Σ_b − 2(Σ_a Σ_b)^{1/2}).

    Tr (Σ_a Σ_b)^{1/2} equals the sum of square roots of the eigenvalues of
    the symmetric product Σ_a^{1/2} Σ_b Σ_a^{1/2}; tiny negative eigenvalues
    are clipped to zero.
    """
    if a.dim != b.dim:
        raise EvaluationError(f"Gaussian fits have different dimensions: {a.dim} vs {b.dim}")
    if a.same_as(b):
        return 0.0
    sqrt_a = _sqrt_psd(a.cov)
    product = sqrt_a @ b.cov @ sqrt_a
    eigvals = np.linalg.eigvalsh(0.5 * (product + product.T))
    trace_sqrt = float(np.sum(np.sqrt(np.clip(eigvals, 0.0, None))))
    diff = a.mean - b.mean
    distance = float(diff @ diff) + float(np.trace(a.cov) + np.trace(b.cov)) - 2.0 * trace_sqrt
    return max(distance, 0.0)


def fid_like_score(
    real: LabeledImageSet,
    synthetic: LabeledImageSet,
    extractor: TrainedClassifier,
    per_class: bool = False,
) -> FidResult:
    """Fréchet distance between embedded real and synthetic sets, optionally per class."""
    if len(real) == 0 or len(synthetic) == 0:
        raise EvaluationError("FID needs non-empty real and synthetic sets")
    if real.image_shape != synthetic.image_shape:
        raise EvaluationError(f"image shapes differ: {real.image_shape} vs {synthetic.image_shape}")

    real_features = extractor.embed(real.images)
    synthetic_features = extractor.embed(synthetic.images)
    real_fit = fit_gaussian(real_features)
    synthetic_fit = fit_gaussian(synthetic_features)
    regularized = real_fit.regularized or synthetic_fit.regularized
    if regularized:
        logger.warning(
            f"FID on {len(real)} real / {len(synthetic)} synthetic samples is below F+1={real_fit.dim + 1}; "
            "covariances were regularised"
        )
    score = frechet_distance(real_fit, synthetic_fit)

    breakdown: Dict[int, float] = {}
    if per_class:
        for c in range(min(real.num_classes, synthetic.num_classes)):
            real_rows = real_features[real.labels == c]
            synthetic_rows = synthetic_features[synthetic.labels == c]
            if len(real_rows) == 0 or len(synthetic_rows) == 0:
                breakdown[c] = math.nan
                continue
            a, b = fit_gaussian(real_rows), fit_gaussian(synthetic_rows)
            regularized = regularized or a.regularized or b.regularized
            breakdown[c] = frechet_distance(a, b)

    return FidResult(
        score=score,
        per_class=breakdown,
        regularized=regularized,
        real_count=len(real),
        synthetic_count=len(synthetic),
    )
