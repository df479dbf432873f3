"""Data models for differentially private training."""

import math
from dataclasses import dataclass, field
from typing import List, Optional

from ..config import (
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ADAM_EPS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CLIP_NORM,
    DEFAULT_EMA_DECAY,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MICROBATCH_SIZE,
    DEFAULT_OPTIMIZER,
    DEFAULT_STEPS,
)
from ..parsers.checkpoint_parser import Checkpoint
from ..utils.errors import ConfigError

OPTIMIZER_KINDS = ("dp-sgd", "dp-adam")

STATUS_COMPLETED = "completed"
STATUS_BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class DpTrainConfig:
    """
    Hyperparameters of one DP-SGD / DP-Adam run.

    `clip_norm=math.inf` together with `noise_multiplier=0` is the
    non-private sentinel used for pre-training.
    """

    clip_norm: float = DEFAULT_CLIP_NORM
    noise_multiplier: float = 0.0
    batch_size: int = DEFAULT_BATCH_SIZE
    microbatch_size: int = DEFAULT_MICROBATCH_SIZE
    steps: int = DEFAULT_STEPS
    augmult: int = 1
    optimizer: str = DEFAULT_OPTIMIZER
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_ADAM_BETA1
    beta2: float = DEFAULT_ADAM_BETA2
    adam_eps: float = DEFAULT_ADAM_EPS
    warmup_steps: int = 0
    ema_decay: float = DEFAULT_EMA_DECAY
    max_epsilon: Optional[float] = None
    delta: Optional[float] = None
    max_workers: Optional[int] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm", f"must be > 0 (or inf), got {self.clip_norm}")
        if not self.noise_multiplier >= 0 or math.isinf(self.noise_multiplier):
            raise ConfigError("noise_multiplier", f"must be a finite value >= 0, got {self.noise_multiplier}")
        if self.noise_multiplier > 0 and math.isinf(self.clip_norm):
            raise ConfigError("noise_multiplier", "noise needs a finite clip_norm")
        if self.batch_size < 1:
            raise ConfigError("batch_size", f"must be >= 1, got {self.batch_size}")
        if not 1 <= self.microbatch_size <= self.batch_size:
            raise ConfigError("microbatch_size", f"must lie in [1, batch_size={self.batch_size}], got {self.microbatch_size}")
        if self.steps < 0:
            raise ConfigError("steps", f"must be >= 0, got {self.steps}")
        if self.augmult < 1:
            raise ConfigError("augmult", f"must be >= 1, got {self.augmult}")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ConfigError("optimizer", f"must be one of {', '.join(OPTIMIZER_KINDS)}, got '{self.optimizer}'")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate", f"must be > 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1", "Adam betas must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise ConfigError("adam_eps", f"must be > 0, got {self.adam_eps}")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps", f"must be >= 0, got {self.warmup_steps}")
        if not 0 <= self.ema_decay <= 1:
            raise ConfigError("ema_decay", f"must lie in [0, 1], got {self.ema_decay}")
        if self.max_epsilon is not None and not self.max_epsilon > 0:
            raise ConfigError("max_epsilon", f"must be > 0, got {self.max_epsilon}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ConfigError("delta", f"must lie in (0, 1), got {self.delta}")

    @property
    def is_private(self) -> bool:
        return self.noise_multiplier > 0 or not math.isinf(self.clip_norm)


@dataclass(frozen=True)
class AugmentationPolicy:
    """
    What varies across the K views of one example: horizontal flip,
    shift-crop by up to `max_shift` pixels, and the diffusion timestep.
    """

    flip: bool = True
    max_shift: int = 0
    resample_timesteps: bool = True
    samples: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.samples < 1:
            raise ConfigError("augmult", f"must be >= 1, got {self.samples}")
        if self.max_shift < 0:
            raise ConfigError("max_shift", f"must be >= 0, got {self.max_shift}")
        if self.samples > 1 and not self.varies:
            raise ConfigError("augmult", "K > 1 needs at least one active augmentation")

    @property
    def varies(self) -> bool:
        return self.flip or self.max_shift > 0 or self.resample_timesteps


@dataclass
class StepStats:
    """
    Per-step summary. Gradient-norm quantiles are taken over clipped norms
    only; they are None when nothing was clipped (non-private steps).
    """

    step: int
    loss: float
    batch_size: int
    learning_rate: float
    grad_norm_median_clipped: Optional[float] = None
    grad_norm_p95_clipped: Optional[float] = None
    epsilon_spent: Optional[float] = None

    def to_record(self) -> dict:
        """JSON-safe record; non-finite numbers become null."""
        return {
            "step": self.step,
            "loss": self.loss if math.isfinite(self.loss) else None,
            "epsilon_spent": self.epsilon_spent,
            "grad_norm_median_clipped": self.grad_norm_median_clipped,
            "grad_norm_p95_clipped": self.grad_norm_p95_clipped,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
        }


@dataclass
class TrainResult:
    """Outcome of `train`: the final checkpoint and its per-step log."""

    checkpoint: Checkpoint
    log: List[StepStats] = field(default_factory=list)
    status: str = STATUS_COMPLETED
    steps_completed: int = 0
    epsilon: Optional[float] = None
    delta: Optional[float] = None

    @property
    def budget_exhausted(self) -> bool:
        return self.status == STATUS_BUDGET_EXHAUSTED
