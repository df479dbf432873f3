"""The training loop shared by pre-training and private fine-tuning."""

import json
import logging
import math
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from .models import (
    STATUS_BUDGET_EXHAUSTED,
    STATUS_COMPLETED,
    AugmentationPolicy,
    DpTrainConfig,
    StepStats,
    TrainResult,
)
from .optimizers import Optimizer
from .private_step import private_step
from ..data.models import LabeledImageSet
from ..diffusion.ema import EmaTracker, ema_update
from ..diffusion.model import ArchitectureDescriptor, DenoiserModel
from ..diffusion.schedule import NoiseSchedule
from ..diffusion.timesteps import TimestepMixture
from ..parsers.checkpoint_parser import Checkpoint
from ..privacy.rdp import PrivacyAccountant
from ..utils.errors import CheckpointError, ValidationError
from ..utils.rng import RngStreams

logger = logging.getLogger(__name__)


def poisson_batch_indices(n: int, sampling_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Each of the n examples is included independently with probability q."""
    return np.flatnonzero(rng.random(n) < sampling_rate)


def run_accounting(config: DpTrainConfig, n: int) -> Tuple[float, float, Optional[PrivacyAccountant]]:
    """Sampling rate q = B/n, δ (default 1/n) and the accountant; no accountant without noise."""
    if n < 1:
        raise ValidationError("cannot account for an empty dataset")
    q = min(1.0, config.batch_size / n)
    delta = config.delta if config.delta is not None else 1.0 / n
    accountant = PrivacyAccountant(config.noise_multiplier, q) if config.noise_multiplier > 0 else None
    return q, delta, accountant


def default_architecture(dataset: LabeledImageSet) -> ArchitectureDescriptor:
    return ArchitectureDescriptor(image_shape=dataset.image_shape, num_classes=dataset.num_classes)


def _resolve_architecture(
    dataset: LabeledImageSet, arch: Optional[ArchitectureDescriptor], init: Optional[Checkpoint]
) -> ArchitectureDescriptor:
    if init is not None:
        if arch is not None and arch != init.arch:
            raise CheckpointError(f"init checkpoint architecture {init.arch} does not match {arch}")
        arch = init.arch
    arch = arch or default_architecture(dataset)
    if tuple(arch.image_shape) != tuple(dataset.image_shape):
        raise CheckpointError(f"model expects images {arch.image_shape}, dataset has {dataset.image_shape}")
    if arch.num_classes and arch.num_classes < dataset.num_classes:
        raise CheckpointError(f"model knows {arch.num_classes} classes, dataset has {dataset.num_classes}")
    return arch


def train(
    dataset: LabeledImageSet,
    config: DpTrainConfig,
    policy: AugmentationPolicy,
    mixture: TimestepMixture,
    schedule: NoiseSchedule,
    seed: int,
    init: Optional[Checkpoint] = None,
    arch: Optional[ArchitectureDescriptor] = None,
    log_path: Optional[Union[str, Path]] = None,
    progress: Optional[Callable[[StepStats], None]] = None,
    dtype=np.float32,
) -> TrainResult:
    """
    Run `config.steps` steps on Poisson batches with expected size B.

    Fine-tuning starts from every parameter of `init`; without it the model
    is freshly initialised from the seed's init stream. A hard ε cap stops
    the run before the step that would exceed it.
    """
    if len(dataset) == 0:
        raise ValidationError("cannot train on an empty dataset")
    if policy.samples != config.augmult:
        raise ValidationError(f"policy draws {policy.samples} views but augmult is {config.augmult}")
    if mixture.T != schedule.T:
        raise ValidationError(f"timestep mixture is for T={mixture.T}, schedule has T={schedule.T}")

    rngs = RngStreams(seed)
    arch = _resolve_architecture(dataset, arch, init)
    model = DenoiserModel(arch)
    if init is not None:
        model.check_params(init.params)
        params = init.params.astype(dtype)
    else:
        params = model.init_params(rngs.init, dtype)

    n = len(dataset)
    q, delta, accountant = run_accounting(config, n)

    optimizer = Optimizer(config)
    opt_state = optimizer.init_state(params)
    ema = EmaTracker.start(params, config.ema_decay)
    labels = dataset.labels if arch.num_classes else None

    log = []
    status = STATUS_COMPLETED
    epsilon: Optional[float] = 0.0 if accountant is not None else None
    log_file = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log_file = open(log_path, "w", encoding="utf-8")

    logger.info(
        f"Training {arch.kind} denoiser on {n} examples: steps={config.steps} B={config.batch_size} "
        f"sigma={config.noise_multiplier} C={config.clip_norm} K={config.augmult}"
    )
    try:
        completed = 0
        for step in range(config.steps):
            if accountant is not None:
                next_epsilon = accountant.epsilon_after(step + 1, delta)
                if config.max_epsilon is not None and next_epsilon > config.max_epsilon:
                    status = STATUS_BUDGET_EXHAUSTED
                    logger.warning(
                        f"Privacy budget exhausted after {step} steps "
                        f"(next step would spend epsilon={next_epsilon:.3f} > {config.max_epsilon})"
                    )
                    break

            batch = poisson_batch_indices(n, q, rngs.batch)
            outcome = private_step(
                model,
                params,
                dataset.images[batch],
                None if labels is None else labels[batch],
                config,
                policy,
                mixture,
                schedule,
                rngs,
                optimizer=optimizer,
                opt_state=opt_state,
                step=step,
            )
            params, opt_state = outcome.params, outcome.opt_state
            ema = ema_update(ema, params)
            completed = step + 1

            if accountant is not None:
                epsilon = next_epsilon
            stats = outcome.stats
            stats.epsilon_spent = epsilon
            log.append(stats)
            if log_file is not None:
                log_file.write(json.dumps(stats.to_record()) + "\n")
            if progress is not None:
                progress(stats)
    finally:
        if log_file is not None:
            log_file.close()

    meta: Dict[str, str] = {
        "seed": str(seed),
        "steps": str(completed),
        "status": status,
        "noise_multiplier": repr(config.noise_multiplier),
        "clip_norm": repr(config.clip_norm),
        "sampling_rate": repr(q),
        "delta": repr(delta),
        "epsilon": repr(epsilon if epsilon is not None else math.inf),
    }
    checkpoint = Checkpoint(params=params, arch=arch, ema=ema.shadow, meta=meta)
    logger.info(f"Training finished: status={status} steps={completed} epsilon={meta['epsilon']}")
    return TrainResult(
        checkpoint=checkpoint,
        log=log,
        status=status,
        steps_completed=completed,
        epsilon=epsilon,
        delta=delta,
    )
