"""Labelled image sets, toy two-domain datasets and image augmentation."""

from .augment import augment, augment_batch, shift_image
from .models import LabeledImageSet, ToyDomainSpec
from .toy import generate_domain_splits, generate_toy, render_example

__all__ = [
    "LabeledImageSet",
    "ToyDomainSpec",
    "generate_toy",
    "generate_domain_splits",
    "render_example",
    "augment",
    "augment_batch",
    "shift_image",
]
