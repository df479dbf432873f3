"""Run configuration: typed key schema, layered resolution and `config.resolved`."""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple

from ..config import (
    CLASSIFIER_BATCH_SIZE,
    CLASSIFIER_LEARNING_RATE,
    CLASSIFIER_MOMENTUM,
    CLASSIFIER_STEPS,
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ADAM_EPS,
    DEFAULT_AUGMULT,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_CLIP_NORM,
    DEFAULT_EMA_DECAY,
    DEFAULT_EMBEDDING_DIM,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_SHIFT,
    DEFAULT_MICROBATCH_SIZE,
    DEFAULT_MODEL_CHANNELS,
    DEFAULT_MODEL_KIND,
    DEFAULT_OPTIMIZER,
    DEFAULT_STEPS,
    DEFAULT_TARGET_EPSILON,
    DEFAULT_TIMESTEP_MIXTURE,
    DEFAULT_TIMESTEPS,
    ENSEMBLE_SIZE,
    FEATURE_DIM,
    PRETRAIN_BATCH_SIZE,
    PRETRAIN_STEPS,
    PRETRAIN_WARMUP_STEPS,
    THREADS_ENV_VAR,
    TIMESTEP_MIXTURE_PRESETS,
    TOY_CHANNELS,
    TOY_FINETUNE_SIZES,
    TOY_IMAGE_SIZE,
    TOY_JITTER,
    TOY_PRETRAIN_SIZE,
)
from ..parsers.config_parser import ConfigParser
from ..utils.errors import ConfigError, ParseError

COMMANDS = ("pretrain", "finetune", "sample", "calibrate", "eval-fid", "eval-downstream", "model-select", "ablate")


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _float(text: str) -> float:
    return float(text.strip())


def _int_tuple(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_tuple(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _str_tuple(text: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _render(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ConfigKey:
    """One configuration key. An empty string means unset for optional keys."""

    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str
    choices: Tuple[str, ...] = ()
    optional: bool = False

    def convert(self, text: str) -> Any:
        text = text.strip()
        if self.optional and text in ("", "none"):
            return None
        if self.choices and text not in self.choices:
            raise ConfigError(self.name, f"must be one of {', '.join(self.choices)}, got '{text}'")
        try:
            return self.parse(text)
        except ValueError as e:
            raise ConfigError(self.name, f"cannot parse '{text}': {e}")


def _key(name, parse, default, help, choices=(), optional=False) -> ConfigKey:
    return ConfigKey(name, parse, default, help, tuple(choices), optional)


SCHEMA: Dict[str, ConfigKey] = {
    k.name: k
    for k in (
        # data
        _key("dataset", str, "toy", "toy | idx", choices=("toy", "idx")),
        _key("image_size", int, TOY_IMAGE_SIZE, "toy image side length"),
        _key("channels", int, TOY_CHANNELS, "toy image channels (1 or 3)"),
        _key("data_seed", int, 0, "seed of the procedural toy data"),
        _key("toy_jitter", _float, TOY_JITTER, "toy shape position jitter in pixels"),
        _key("pretrain_size", int, TOY_PRETRAIN_SIZE, "toy pre-train set size"),
        _key("train_size", int, TOY_FINETUNE_SIZES["train"], "toy fine-tune train split size"),
        _key("val_size", int, TOY_FINETUNE_SIZES["val"], "toy fine-tune val split size"),
        _key("test_size", int, TOY_FINETUNE_SIZES["test"], "toy fine-tune test split size"),
        _key("dataset_size", int, None, "private training set size n for calibrate (default: the train split)", optional=True),
        _key("pretrain_images", str, None, "IDX pre-train images", optional=True),
        _key("pretrain_labels", str, None, "IDX pre-train labels", optional=True),
        _key("train_images", str, None, "IDX fine-tune train images", optional=True),
        _key("train_labels", str, None, "IDX fine-tune train labels", optional=True),
        _key("test_images", str, None, "IDX fine-tune test images", optional=True),
        _key("test_labels", str, None, "IDX fine-tune test labels", optional=True),
        # diffusion
        _key("timesteps", int, DEFAULT_TIMESTEPS, "diffusion steps T"),
        _key("beta_start", _float, DEFAULT_BETA_START, "first beta of the linear schedule"),
        _key("beta_end", _float, DEFAULT_BETA_END, "last beta of the linear schedule"),
        _key("mixture", str, DEFAULT_TIMESTEP_MIXTURE, "timestep mixture preset", choices=sorted(TIMESTEP_MIXTURE_PRESETS)),
        _key("model_kind", str, DEFAULT_MODEL_KIND, "denoiser kind", choices=("conv", "mlp")),
        _key("model_channels", _int_tuple, DEFAULT_MODEL_CHANNELS, "hidden widths, comma separated"),
        _key("embedding_dim", int, DEFAULT_EMBEDDING_DIM, "timestep/class embedding width"),
        _key("conditional", _bool, True, "class-conditional denoiser"),
        # private training
        _key("clip_norm", _float, DEFAULT_CLIP_NORM, "per-example clip norm C"),
        _key("noise_multiplier", _float, None, "explicit noise multiplier sigma", optional=True),
        _key("target_epsilon", _float, None, "calibrate sigma to this epsilon", optional=True),
        _key("delta", _float, None, "target delta (default 1/n)", optional=True),
        _key("max_epsilon", _float, None, "hard epsilon cap during training", optional=True),
        _key("batch_size", int, DEFAULT_BATCH_SIZE, "expected Poisson batch size B"),
        _key("microbatch_size", int, DEFAULT_MICROBATCH_SIZE, "examples per accumulation slice"),
        _key("steps", int, DEFAULT_STEPS, "private training steps"),
        _key("augmult", int, DEFAULT_AUGMULT, "augmentation multiplicity K"),
        _key("flip", _bool, True, "random horizontal flips"),
        _key("max_shift", int, DEFAULT_MAX_SHIFT, "max shift-crop in pixels"),
        _key("resample_timesteps", _bool, True, "fresh timestep per augmented view"),
        _key("optimizer", str, DEFAULT_OPTIMIZER, "dp-sgd | dp-adam", choices=("dp-sgd", "dp-adam")),
        _key("learning_rate", _float, DEFAULT_LEARNING_RATE, "learning rate"),
        _key("beta1", _float, DEFAULT_ADAM_BETA1, "Adam beta1"),
        _key("beta2", _float, DEFAULT_ADAM_BETA2, "Adam beta2"),
        _key("adam_eps", _float, DEFAULT_ADAM_EPS, "Adam stability constant"),
        _key("warmup_steps", int, 0, "linear learning-rate warm-up steps"),
        _key("ema_decay", _float, DEFAULT_EMA_DECAY, "EMA decay of sampled parameters"),
        _key("init_checkpoint", str, None, "checkpoint to fine-tune from", optional=True),
        # pre-training
        _key("pretrain_steps", int, PRETRAIN_STEPS, "non-private pre-training steps"),
        _key("pretrain_batch_size", int, PRETRAIN_BATCH_SIZE, "pre-training batch size"),
        _key("pretrain_learning_rate", _float, DEFAULT_LEARNING_RATE, "pre-training learning rate"),
        _key("pretrain_warmup_steps", int, PRETRAIN_WARMUP_STEPS, "pre-training warm-up steps"),
        # sampling
        _key("checkpoint", str, None, "checkpoint to sample from / evaluate", optional=True),
        _key("num_samples", int, 1000, "synthetic images to draw"),
        _key("balanced", _bool, True, "equal samples per class"),
        _key("synthetic_images", str, None, "IDX synthetic images to evaluate", optional=True),
        _key("synthetic_labels", str, None, "IDX synthetic labels to evaluate", optional=True),
        # privacy reports
        _key("epsilons", _float_tuple, (), "extra epsilons for the calibration sweep"),
        # evaluation
        _key("classifier_arch", str, "conv-small", "downstream classifier", choices=("conv-small", "conv-wide")),
        _key("classifier_steps", int, CLASSIFIER_STEPS, "classifier SGD steps"),
        _key("classifier_batch_size", int, CLASSIFIER_BATCH_SIZE, "classifier batch size"),
        _key("classifier_learning_rate", _float, CLASSIFIER_LEARNING_RATE, "classifier learning rate"),
        _key("classifier_momentum", _float, CLASSIFIER_MOMENTUM, "classifier momentum"),
        _key("classifier_weight_decay", _float, 0.0, "classifier weight decay"),
        _key("label_smoothing", _float, 0.0, "classifier label smoothing"),
        _key("classifier_pretrain", _bool, False, "pre-train the classifier on the pre-train domain"),
        _key("feature_dim", int, FEATURE_DIM, "feature extractor embedding width"),
        _key("ensemble_size", int, ENSEMBLE_SIZE, "ensemble members"),
        _key("per_class", _bool, True, "per-class FID and discriminator breakdown"),
        _key("repeats", int, 5, "seeds per ablation variant"),
        _key("studies", _str_tuple, ("pretraining", "timesteps", "sample_size", "ensemble"), "ablation studies to run"),
    )
}


def default_threads() -> int:
    """DPDM_THREADS if set, else the available parallelism."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(THREADS_ENV_VAR, f"must be an integer, got '{raw}'")
        if threads < 1:
            raise ConfigError(THREADS_ENV_VAR, f"must be >= 1, got {threads}")
        return threads
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RunConfig:
    """Every effective setting of one command invocation."""

    command: str
    seed: int
    out: Path
    values: Mapping[str, Any] = field(default_factory=dict)
    threads: int = 1

    def __getitem__(self, name: str) -> Any:
        if name not in self.values:
            raise ConfigError(name, "unknown configuration key")
        return self.values[name]

    def get(self, name: str, default: Any = None) -> Any:
        return self.values.get(name, default)

    def with_values(self, **updates: Any) -> "RunConfig":
        for name in updates:
            if name not in SCHEMA:
                raise ConfigError(name, "unknown configuration key")
        return RunConfig(self.command, self.seed, self.out, {**self.values, **updates}, self.threads)

    def resolved_text(self) -> str:
        lines = {
            "command": self.command,
            "seed": str(self.seed),
            "out": str(self.out),
            "threads": str(self.threads),
        }
        lines.update({name: _render(self.values[name]) for name in self.values})
        return ConfigParser.render(lines)


def resolve_config(
    command: str,
    config_path: Optional[str] = None,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> RunConfig:
    """
    Defaults, then the config file, then `--key value` overrides.

    Unknown keys raise ConfigError naming the key; cross-field invariants are
    checked by the domain types built from the result.
    """
    parser = ConfigParser()
    layered: Dict[str, str] = {}
    try:
        if config_path:
            layered.update(parser.parse_file(config_path))
        layered.update(parser.parse_overrides(overrides))
    except ParseError as e:
        raise ConfigError("config", str(e))

    # --seed and --out flags win over the file
    file_seed = layered.pop("seed", None)
    file_out = layered.pop("out", None)
    try:
        seed = int(seed if seed is not None else (file_seed or 0))
    except ValueError:
        raise ConfigError("seed", f"must be an integer, got '{file_seed}'")
    out = out if out is not None else (file_out or "runs")
    values = {name: key.default for name, key in SCHEMA.items()}
    for name, text in layered.items():
        if name not in SCHEMA:
            raise ConfigError(name, "unknown configuration key")
        values[name] = SCHEMA[name].convert(text)

    if command == "finetune" and (values["noise_multiplier"] is None) == (values["target_epsilon"] is None):
        raise ConfigError("noise_multiplier", "set exactly one of noise_multiplier or target_epsilon")
    if command == "ablate":
        if values["noise_multiplier"] is not None and values["target_epsilon"] is not None:
            raise ConfigError("noise_multiplier", "set at most one of noise_multiplier or target_epsilon")
        if values["noise_multiplier"] is None and values["target_epsilon"] is None:
            values["target_epsilon"] = DEFAULT_TARGET_EPSILON
    if command == "calibrate" and values["target_epsilon"] is None:
        raise ConfigError("target_epsilon", "calibration needs a target epsilon")
    return RunConfig(command=command, seed=seed, out=Path(out), values=values, threads=default_threads())
