"""Synthetic dataset generation from a trained checkpoint."""

import logging
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from .factories import schedule_from
from .run_config import RunConfig
from .run_directory import SAMPLE_IMAGES, SAMPLE_LABELS, RunDirectory
from ..data.models import LabeledImageSet
from ..diffusion.model import DenoiserModel
from ..diffusion.sampling import ancestral_sample_batch, balanced_labels
from ..parsers.checkpoint_parser import Checkpoint, CheckpointParser
from ..parsers.idx_parser import write_idx
from ..utils.errors import ConfigError
from ..utils.rng import RngStreams

logger = logging.getLogger(__name__)

SAMPLE_CHUNK = 256


class SamplingProcessor:
    """Ancestral sampling with the checkpoint's EMA parameters."""

    def __init__(
        self,
        config: RunConfig,
        run_dir: Optional[RunDirectory] = None,
        progress: Optional[Callable[[int], None]] = None,
    ):
        self.config = config
        self.run_dir = run_dir
        self.progress = progress

    def labels_for(self, checkpoint: Checkpoint, n: int, balanced: bool, rng: np.random.Generator) -> np.ndarray:
        num_classes = checkpoint.arch.num_classes
        if not num_classes:
            return np.zeros(n, dtype=np.int64)
        if balanced:
            return balanced_labels(n, num_classes)
        return rng.integers(0, num_classes, size=n)

    def sample_from(self, checkpoint: Checkpoint, n: int, balanced: bool = True, seed: Optional[int] = None) -> LabeledImageSet:
        """n images drawn in fixed-size chunks from the seed's sample stream."""
        if n < 0:
            raise ConfigError("num_samples", f"must be >= 0, got {n}")
        rng = RngStreams(self.config.seed if seed is None else seed).sample
        model = DenoiserModel(checkpoint.arch)
        params = checkpoint.sampling_params
        model.check_params(params)
        schedule = schedule_from(self.config)
        labels = self.labels_for(checkpoint, n, balanced, rng)
        conditional = bool(checkpoint.arch.num_classes)

        chunks = []
        for start in range(0, n, SAMPLE_CHUNK):
            chunk_labels = labels[start : start + SAMPLE_CHUNK]
            chunks.append(
                ancestral_sample_batch(
                    model,
                    params,
                    schedule,
                    chunk_labels if conditional else None,
                    rng,
                    n=len(chunk_labels),
                )
            )
            if self.progress is not None:
                self.progress(start + len(chunk_labels))
        images = np.concatenate(chunks) if chunks else np.zeros((0,) + tuple(checkpoint.arch.image_shape), np.float32)
        return LabeledImageSet(
            images=images,
            labels=labels,
            num_classes=max(checkpoint.arch.num_classes, 1),
            domain="synthetic",
            split="train",
        )

    def sample(self, checkpoint_path: str, n: int, balanced: bool) -> Tuple[LabeledImageSet, Path, Path]:
        """Sample and write `samples/synthetic-{images,labels}.idx`."""
        checkpoint = CheckpointParser().read(checkpoint_path)
        logger.info(f"Sampling {n} images from {checkpoint_path} (T={self.config['timesteps']})")
        synthetic = self.sample_from(checkpoint, n, balanced)
        samples_dir = self.run_dir.samples if self.run_dir is not None else Path(".")
        images_path, labels_path = samples_dir / SAMPLE_IMAGES, samples_dir / SAMPLE_LABELS
        samples_dir.mkdir(parents=True, exist_ok=True)
        write_idx(images_path, labels_path, synthetic)
        return synthetic, images_path, labels_path
