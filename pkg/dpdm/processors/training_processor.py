"""Pre-training and private fine-tuning runs."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .datasets import DomainData
from .factories import (
    architecture_from,
    mixture_from,
    policy_from,
    pretrain_config,
    private_train_config,
    schedule_from,
)
from .run_config import RunConfig
from .run_directory import FINETUNE_CHECKPOINT, PRETRAIN_CHECKPOINT, RunDirectory
from ..config import TRAIN_LOG_NAME
from ..data.models import LabeledImageSet
from ..parsers.checkpoint_parser import Checkpoint, CheckpointParser
from ..privacy.calibrate import calibrate_sigma
from ..privacy.models import PrivacySpend
from ..training.models import StepStats, TrainResult
from ..training.trainer import train
from ..utils.errors import CheckpointError, ConfigError

logger = logging.getLogger(__name__)


@dataclass
class FinetuneOutcome:
    result: TrainResult
    spend: PrivacySpend
    noise_multiplier: float
    checkpoint_path: Optional[Path] = None


class TrainingProcessor:
    """Runs the diffusion training loop for the `pretrain` and `finetune` commands."""

    def __init__(
        self,
        config: RunConfig,
        run_dir: RunDirectory,
        data: Optional[DomainData] = None,
        progress: Optional[Callable[[StepStats], None]] = None,
    ):
        self.config = config
        self.run_dir = run_dir
        self.data = data or DomainData(config)
        self.progress = progress
        self.checkpoints = CheckpointParser()

    def pretrain(self) -> TrainResult:
        """Non-private training on the pre-train domain."""
        dataset = self.data.pretrain
        result = train(
            dataset,
            pretrain_config(self.config),
            policy_from(self.config, samples=1),
            mixture_from(self.config),
            schedule_from(self.config),
            seed=self.config.seed,
            arch=architecture_from(self.config, dataset.image_shape, dataset.num_classes),
            log_path=self.run_dir.logs / "pretrain.jsonl",
            progress=self.progress,
        )
        self.checkpoints.write(self.run_dir.checkpoints / PRETRAIN_CHECKPOINT, result.checkpoint)
        return result

    def noise_multiplier_for(self, dataset: LabeledImageSet) -> float:
        """Explicit sigma, or sigma calibrated to the target epsilon for this run's q and steps."""
        if self.config["noise_multiplier"] is not None:
            return float(self.config["noise_multiplier"])
        target = self.config["target_epsilon"]
        if target is None:
            raise ConfigError("target_epsilon", "private training needs target_epsilon or noise_multiplier")
        q = min(1.0, self.config["batch_size"] / len(dataset))
        sigma = calibrate_sigma(q, self.config["steps"], PrivacySpend(target, self.delta_for(dataset)))
        logger.info(f"Calibrated noise multiplier {sigma:.4f} for epsilon={target}")
        return sigma

    def delta_for(self, dataset: LabeledImageSet) -> float:
        delta = self.config["delta"]
        return float(delta) if delta is not None else 1.0 / len(dataset)

    def train_private(
        self,
        dataset: LabeledImageSet,
        init: Optional[Checkpoint],
        seed: int,
        mixture_name: Optional[str] = None,
        log_path: Optional[Path] = None,
    ) -> FinetuneOutcome:
        """One private run on `dataset`; from scratch when `init` is None."""
        sigma = self.noise_multiplier_for(dataset)
        delta = self.delta_for(dataset)
        arch = architecture_from(self.config, dataset.image_shape, dataset.num_classes)
        if init is not None and init.arch != arch:
            raise CheckpointError(f"init checkpoint architecture {init.arch} does not match the configured {arch}")
        result = train(
            dataset,
            private_train_config(self.config, sigma, delta),
            policy_from(self.config),
            mixture_from(self.config, mixture_name),
            schedule_from(self.config),
            seed=seed,
            init=init,
            arch=arch,
            log_path=log_path,
            progress=self.progress,
        )
        epsilon = result.epsilon if result.epsilon is not None else float("inf")
        return FinetuneOutcome(
            result=result,
            spend=PrivacySpend(epsilon, delta),
            noise_multiplier=sigma,
        )

    def finetune(self, init_path: Optional[str] = None) -> FinetuneOutcome:
        """Private training on the fine-tune train split, starting from every parameter of `init_path`."""
        init_path = init_path or self.config["init_checkpoint"]
        init = self.checkpoints.read(init_path) if init_path else None
        if init is None:
            logger.warning("No init checkpoint given: training the private model from scratch")
        outcome = self.train_private(
            self.data.train, init, self.config.seed, log_path=self.run_dir.logs / TRAIN_LOG_NAME
        )
        outcome.checkpoint_path = self.checkpoints.write(
            self.run_dir.checkpoints / FINETUNE_CHECKPOINT, outcome.result.checkpoint
        )
        return outcome
