"""Differentially private training of diffusion models."""

from .clipping import clip
from .models import (
    OPTIMIZER_KINDS,
    STATUS_BUDGET_EXHAUSTED,
    STATUS_COMPLETED,
    AugmentationPolicy,
    DpTrainConfig,
    StepStats,
    TrainResult,
)
from .optimizers import AdamHyper, AdamState, Optimizer, dp_adam_update, learning_rate_at, sgd_update
from .private_step import (
    AugmentedDraws,
    PrivateGradient,
    StepOutcome,
    augmented_value_and_grad,
    draw_augmented_views,
    per_example_augmented_gradient,
    private_step,
    privatized_gradient,
)
from .trainer import default_architecture, poisson_batch_indices, run_accounting, train

__all__ = [
    "DpTrainConfig",
    "AugmentationPolicy",
    "StepStats",
    "TrainResult",
    "OPTIMIZER_KINDS",
    "STATUS_COMPLETED",
    "STATUS_BUDGET_EXHAUSTED",
    "clip",
    "AdamHyper",
    "AdamState",
    "Optimizer",
    "sgd_update",
    "dp_adam_update",
    "learning_rate_at",
    "AugmentedDraws",
    "PrivateGradient",
    "StepOutcome",
    "draw_augmented_views",
    "augmented_value_and_grad",
    "per_example_augmented_gradient",
    "privatized_gradient",
    "private_step",
    "poisson_batch_indices",
    "default_architecture",
    "run_accounting",
    "train",
]
