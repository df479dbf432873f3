"""Data models for labelled image sets and toy domains."""

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import (
    TOY_CHANNELS,
    TOY_CLASSES,
    TOY_FINETUNE_THICKNESS,
    TOY_IMAGE_SIZE,
    TOY_JITTER,
    TOY_PRETRAIN_THICKNESS,
)
from ..utils.errors import ValidationError

DOMAINS = ("pretrain", "finetune", "synthetic")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class LabeledImageSet:
    """
    Images (n, H, W, C) in [-1, 1] with one integer class per image.

    Images stay plain float32 arrays; models wrap them into tensors.
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    domain: str = "finetune"
    split: str = "train"

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if images.ndim != 4:
            raise ValidationError(f"images must be (n, H, W, C), got shape {images.shape}")
        if images.shape[0] != labels.shape[0]:
            raise ValidationError(f"{images.shape[0]} images but {labels.shape[0]} labels")
        if images.size and (images.min() < -1.0 or images.max() > 1.0):
            raise ValidationError("pixels must lie in [-1, 1]")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValidationError(f"labels must lie in [0, {self.num_classes})")
        if self.domain not in DOMAINS or self.split not in SPLITS:
            raise ValidationError(f"unknown domain/split tag {self.domain}/{self.split}")
        images.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])  # type: ignore[return-value]

    def subset(self, indices: Sequence[int]) -> "LabeledImageSet":
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, images=self.images[idx], labels=self.labels[idx])

    def with_labels(self, labels: np.ndarray) -> "LabeledImageSet":
        return replace(self, labels=labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def by_class(self) -> Dict[int, "LabeledImageSet"]:
        return {c: self.subset(np.flatnonzero(self.labels == c)) for c in range(self.num_classes)}

    def shuffled_labels(self, rng: np.random.Generator) -> "LabeledImageSet":
        return self.with_labels(rng.permutation(self.labels))


@dataclass(frozen=True)
class ToyDomainSpec:
    """
    Procedural outline shapes. The fine-tune domain inverts polarity and
    draws thicker strokes than the pre-train domain.
    """

    domain: str = "pretrain"
    image_size: int = TOY_IMAGE_SIZE
    channels: int = TOY_CHANNELS
    classes: Tuple[str, ...] = TOY_CLASSES
    polarity: float = 1.0
    thickness_range: Tuple[float, float] = TOY_PRETRAIN_THICKNESS
    jitter: float = TOY_JITTER
    noise_std: float = 0.05
    seed: int = 0
    tint: Tuple[float, ...] = field(default=(1.0,))

    def __post_init__(self):
        if self.domain not in ("pretrain", "finetune"):
            raise ValidationError(f"toy domain must be pretrain or finetune, got {self.domain}")
        if self.image_size < 4 or self.channels not in (1, 3):
            raise ValidationError("toy images need size >= 4 and 1 or 3 channels")
        if len(self.tint) != self.channels:
            raise ValidationError("tint needs one value per channel")
        lo, hi = self.thickness_range
        if not 0 < lo <= hi:
            raise ValidationError(f"invalid stroke thickness range {self.thickness_range}")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @classmethod
    def for_domain(
        cls,
        domain: str,
        seed: int = 0,
        image_size: int = TOY_IMAGE_SIZE,
        channels: int = TOY_CHANNELS,
        jitter: Optional[float] = None,
    ) -> "ToyDomainSpec":
        finetune = domain == "finetune"
        if channels == 3:
            tint = (0.2, 0.6, 1.0) if finetune else (1.0, 0.6, 0.2)
        else:
            tint = (1.0,)
        return cls(
            domain=domain,
            image_size=image_size,
            channels=channels,
            polarity=-1.0 if finetune else 1.0,
            thickness_range=TOY_FINETUNE_THICKNESS if finetune else TOY_PRETRAIN_THICKNESS,
            jitter=TOY_JITTER * image_size / TOY_IMAGE_SIZE if jitter is None else jitter,
            seed=seed,
            tint=tint,
        )
