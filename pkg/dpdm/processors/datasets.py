"""Real datasets of a run: procedural toy domains or IDX files."""

from functools import cached_property
from typing import Optional

from .run_config import RunConfig
from ..data.models import LabeledImageSet, ToyDomainSpec
from ..data.toy import generate_toy
from ..parsers.idx_parser import load_idx
from ..utils.errors import ConfigError


class DomainData:
    """Pre-train domain and fine-tune train/val/test splits, loaded on first use."""

    def __init__(self, config: RunConfig):
        self.config = config

    def _toy_spec(self, domain: str) -> ToyDomainSpec:
        return ToyDomainSpec.for_domain(
            domain,
            seed=self.config["data_seed"],
            image_size=self.config["image_size"],
            channels=self.config["channels"],
            jitter=self.config["toy_jitter"],
        )

    def _idx(self, prefix: str, domain: str, split: str, num_classes: Optional[int] = None) -> LabeledImageSet:
        images, labels = self.config[f"{prefix}_images"], self.config[f"{prefix}_labels"]
        if not images or not labels:
            raise ConfigError(f"{prefix}_images", f"dataset = idx needs {prefix}_images and {prefix}_labels")
        return load_idx(images, labels, domain=domain, split=split, num_classes=num_classes)

    @property
    def is_toy(self) -> bool:
        return self.config["dataset"] == "toy"

    @cached_property
    def pretrain(self) -> LabeledImageSet:
        if self.is_toy:
            return generate_toy(self._toy_spec("pretrain"), self.config["pretrain_size"], "train")
        return self._idx("pretrain", "pretrain", "train")

    @cached_property
    def train(self) -> LabeledImageSet:
        if self.is_toy:
            return generate_toy(self._toy_spec("finetune"), self.config["train_size"], "train")
        return self._idx("train", "finetune", "train")

    @cached_property
    def val(self) -> LabeledImageSet:
        if self.is_toy:
            return generate_toy(self._toy_spec("finetune"), self.config["val_size"], "val")
        # IDX runs have no separate validation files; the test split doubles as val
        return self.test

    @cached_property
    def test(self) -> LabeledImageSet:
        if self.is_toy:
            return generate_toy(self._toy_spec("finetune"), self.config["test_size"], "test")
        return self._idx("test", "finetune", "test", num_classes=self.train.num_classes)

    @property
    def train_size(self) -> int:
        """n of the private train split, without rendering toy images."""
        key, size = "dataset_size", self.config["dataset_size"]
        if size is None:
            key, size = "train_size", self.config["train_size"] if self.is_toy else len(self.train)
        if size < 1:
            raise ConfigError(key, f"must be >= 1, got {size}")
        return size

    @property
    def num_classes(self) -> int:
        return self.train.num_classes
