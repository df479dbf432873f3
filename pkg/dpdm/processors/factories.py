"""Build domain objects from a resolved run configuration."""

import math
from typing import Optional

from .run_config import RunConfig
from ..diffusion.model import ArchitectureDescriptor
from ..diffusion.schedule import NoiseSchedule, make_linear_schedule
from ..diffusion.timesteps import TimestepMixture
from ..evaluation.models import ClassifierConfig
from ..training.models import AugmentationPolicy, DpTrainConfig


def schedule_from(config: RunConfig) -> NoiseSchedule:
    return make_linear_schedule(config["timesteps"], config["beta_start"], config["beta_end"])


def mixture_from(config: RunConfig, name: Optional[str] = None) -> TimestepMixture:
    return TimestepMixture.from_preset(name or config["mixture"], config["timesteps"])


def architecture_from(config: RunConfig, image_shape, num_classes: int) -> ArchitectureDescriptor:
    return ArchitectureDescriptor(
        image_shape=tuple(image_shape),
        kind=config["model_kind"],
        channels=tuple(config["model_channels"]),
        embedding_dim=config["embedding_dim"],
        num_classes=num_classes if config["conditional"] else 0,
    )


def policy_from(config: RunConfig, samples: Optional[int] = None) -> AugmentationPolicy:
    return AugmentationPolicy(
        flip=config["flip"],
        max_shift=config["max_shift"],
        resample_timesteps=config["resample_timesteps"],
        samples=config["augmult"] if samples is None else samples,
    )


def private_train_config(config: RunConfig, noise_multiplier: float, delta: float) -> DpTrainConfig:
    return DpTrainConfig(
        clip_norm=config["clip_norm"],
        noise_multiplier=noise_multiplier,
        batch_size=config["batch_size"],
        microbatch_size=min(config["microbatch_size"], config["batch_size"]),
        steps=config["steps"],
        augmult=config["augmult"],
        optimizer=config["optimizer"],
        learning_rate=config["learning_rate"],
        beta1=config["beta1"],
        beta2=config["beta2"],
        adam_eps=config["adam_eps"],
        warmup_steps=config["warmup_steps"],
        ema_decay=config["ema_decay"],
        max_epsilon=config["max_epsilon"],
        delta=delta,
        max_workers=config.threads,
    )


def pretrain_config(config: RunConfig) -> DpTrainConfig:
    """The same loop without clipping or noise."""
    batch = config["pretrain_batch_size"]
    return DpTrainConfig(
        clip_norm=math.inf,
        noise_multiplier=0.0,
        batch_size=batch,
        microbatch_size=batch,
        steps=config["pretrain_steps"],
        augmult=1,
        optimizer="dp-adam",
        learning_rate=config["pretrain_learning_rate"],
        beta1=config["beta1"],
        beta2=config["beta2"],
        adam_eps=config["adam_eps"],
        warmup_steps=config["pretrain_warmup_steps"],
        ema_decay=config["ema_decay"],
        max_workers=config.threads,
    )


def classifier_config_from(config: RunConfig, seed: Optional[int] = None) -> ClassifierConfig:
    seed = config.seed if seed is None else seed
    return ClassifierConfig(
        arch=config["classifier_arch"],
        steps=config["classifier_steps"],
        batch_size=config["classifier_batch_size"],
        learning_rate=config["classifier_learning_rate"],
        momentum=config["classifier_momentum"],
        weight_decay=config["classifier_weight_decay"],
        label_smoothing=config["label_smoothing"],
        feature_dim=config["feature_dim"],
        init_seed=seed,
        batch_seed=seed,
    )
