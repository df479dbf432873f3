"""Procedural two-domain toy image datasets."""

import logging
from typing import Dict, Mapping, Optional

import numpy as np

from .models import LabeledImageSet, SPLITS, ToyDomainSpec
from ..config import TOY_FINETUNE_SIZES
from ..utils.errors import ValidationError

logger = logging.getLogger(__name__)

DOMAIN_CODES = {"pretrain": 0, "finetune": 1}
SPLIT_CODES = {split: i for i, split in enumerate(SPLITS)}

_SQRT3_2 = np.sqrt(3.0) / 2.0
# Outward edge normals of an upright equilateral triangle (image y points down)
_TRIANGLE_NORMALS = np.array([[0.0, 1.0], [-_SQRT3_2, -0.5], [_SQRT3_2, -0.5]])


def _shape_mask(shape: str, dx: np.ndarray, dy: np.ndarray, radius: float, thickness: float) -> np.ndarray:
    if shape == "disc":
        dist = np.hypot(dx, dy)
        return (dist <= radius) & (dist > radius - thickness)
    if shape == "square":
        dist = np.maximum(np.abs(dx), np.abs(dy))
        return (dist <= radius) & (dist > radius - thickness)
    if shape == "cross":
        return (np.minimum(np.abs(dx), np.abs(dy)) <= thickness / 2.0) & (
            np.maximum(np.abs(dx), np.abs(dy)) <= radius
        )
    if shape == "triangle":
        # Signed distance to the edges; the inradius is half the circumradius
        proj = _TRIANGLE_NORMALS[:, 0, None, None] * dx + _TRIANGLE_NORMALS[:, 1, None, None] * dy
        dist = proj.max(axis=0)
        return (dist <= radius / 2.0) & (dist > radius / 2.0 - thickness)
    raise ValidationError(f"unknown toy shape '{shape}'")


def render_example(spec: ToyDomainSpec, index: int, split: str = "train") -> np.ndarray:
    """Image `index` of a split; a pure function of (spec, split, index)."""
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, DOMAIN_CODES[spec.domain], SPLIT_CODES[split], index])
    )
    size = spec.image_size
    label = index % spec.num_classes
    center = (size - 1) / 2.0 + rng.uniform(-spec.jitter, spec.jitter, size=2)
    radius = rng.uniform(0.25, 0.38) * size
    thickness = rng.uniform(*spec.thickness_range)

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = _shape_mask(spec.classes[label], xx - center[1], yy - center[0], radius, thickness)

    tint = np.asarray(spec.tint, dtype=np.float64)
    foreground = spec.polarity * tint
    background = -spec.polarity * np.ones_like(tint)
    image = np.where(mask[..., None], foreground, background)
    image = image + rng.normal(0.0, spec.noise_std, size=image.shape)
    return np.clip(image, -1.0, 1.0).astype(np.float32)


def generate_toy(spec: ToyDomainSpec, n: int, split: str = "train", start: int = 0) -> LabeledImageSet:
    """n images with round-robin classes (exactly uniform when n is a multiple of the class count)."""
    if n < 1:
        raise ValidationError(f"need at least one image, got n={n}")
    if split not in SPLITS:
        raise ValidationError(f"unknown split '{split}'")
    indices = range(start, start + n)
    images = np.stack([render_example(spec, i, split) for i in indices])
    labels = np.array([i % spec.num_classes for i in indices], dtype=np.int64)
    logger.debug(f"generated {n} {spec.domain}/{split} toy images")
    return LabeledImageSet(
        images=images,
        labels=labels,
        num_classes=spec.num_classes,
        domain=spec.domain,
        split=split,
    )


def generate_domain_splits(
    spec: ToyDomainSpec, sizes: Optional[Mapping[str, int]] = None
) -> Dict[str, LabeledImageSet]:
    """Train/val/test sets drawn from disjoint seed streams."""
    sizes = dict(TOY_FINETUNE_SIZES if sizes is None else sizes)
    return {split: generate_toy(spec, n, split) for split, n in sizes.items() if n > 0}
