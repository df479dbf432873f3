"""Pipeline orchestration used by the command-line interface."""

from .ablation_processor import ABLATION_STUDIES, AblationProcessor
from .calibration_processor import CalibrationProcessor, CalibrationReport
from .datasets import DomainData
from .evaluation_processor import DownstreamReport, EvaluationProcessor
from .run_config import COMMANDS, SCHEMA, ConfigKey, RunConfig, default_threads, resolve_config
from .run_directory import RunDirectory
from .sampling_processor import SamplingProcessor
from .training_processor import FinetuneOutcome, TrainingProcessor

__all__ = [
    "COMMANDS",
    "SCHEMA",
    "ConfigKey",
    "RunConfig",
    "resolve_config",
    "default_threads",
    "RunDirectory",
    "DomainData",
    "TrainingProcessor",
    "FinetuneOutcome",
    "SamplingProcessor",
    "CalibrationProcessor",
    "CalibrationReport",
    "EvaluationProcessor",
    "DownstreamReport",
    "AblationProcessor",
    "ABLATION_STUDIES",
]
