"""Small convolutional classifiers used for downstream accuracy and as feature extractors."""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np

from .models import CLASSIFIER_ARCHS, ClassifierConfig
from ..data.augment import augment_batch
from ..data.models import LabeledImageSet
from ..numerics import ParameterSet, Tensor, no_grad, ops, uniform_fan_in, value_and_grad
from ..utils.errors import EvaluationError

logger = logging.getLogger(__name__)

PREDICT_BATCH_SIZE = 512


@dataclass(frozen=True)
class ConvClassifier:
    """conv → relu → pool → conv → relu → pool → dense (features) → dense (logits)."""

    arch: str
    image_shape: Tuple[int, int, int]
    num_classes: int
    feature_dim: int

    def __post_init__(self):
        if self.arch not in CLASSIFIER_ARCHS:
            raise EvaluationError(f"unknown classifier architecture '{self.arch}'")
        if self.num_classes < 2:
            raise EvaluationError("a classifier needs at least two classes")

    @property
    def channels(self) -> Tuple[int, ...]:
        return CLASSIFIER_ARCHS[self.arch]

    def _pooled_size(self) -> Tuple[int, int]:
        height, width, _ = self.image_shape
        for _ in self.channels:
            if height % 2 == 0 and width % 2 == 0:
                height, width = height // 2, width // 2
        return height, width

    def init_params(self, rng: np.random.Generator, dtype=np.float32) -> ParameterSet:
        c_in = self.image_shape[2]
        arrays = {}
        for i, c_out in enumerate(self.channels):
            arrays[f"conv{i}.weight"] = uniform_fan_in(rng, (3, 3, c_in, c_out), 9 * c_in, dtype)
            arrays[f"conv{i}.bias"] = np.zeros(c_out, dtype=dtype)
            c_in = c_out
        height, width = self._pooled_size()
        flat = height * width * c_in
        arrays["features.weight"] = uniform_fan_in(rng, (flat, self.feature_dim), flat, dtype)
        arrays["features.bias"] = np.zeros(self.feature_dim, dtype=dtype)
        arrays["head.weight"] = uniform_fan_in(rng, (self.feature_dim, self.num_classes), self.feature_dim, dtype)
        arrays["head.bias"] = np.zeros(self.num_classes, dtype=dtype)
        return ParameterSet(arrays)

    def features(self, p: Mapping[str, Tensor], x: Tensor) -> Tensor:
        h = x
        for i in range(len(self.channels)):
            h = ops.relu(ops.conv2d(h, p[f"conv{i}.weight"], p[f"conv{i}.bias"]))
            if h.shape[1] % 2 == 0 and h.shape[2] % 2 == 0:
                h = ops.avg_pool2d(h, 2)
        return ops.relu(ops.dense(ops.flatten(h), p["features.weight"], p["features.bias"]))

    def logits(self, p: Mapping[str, Tensor], x: Tensor) -> Tensor:
        return ops.dense(self.features(p, x), p["head.weight"], p["head.bias"])


@dataclass(frozen=True)
class TrainedClassifier:
    """A classifier with frozen parameters."""

    model: ConvClassifier
    params: ParameterSet

    def _batched(self, images: np.ndarray, fn) -> np.ndarray:
        images = np.asarray(images, dtype=self.params.dtype)
        if images.shape[1:] != tuple(self.model.image_shape):
            raise EvaluationError(f"classifier expects images {self.model.image_shape}, got {images.shape[1:]}")
        p = self.params.constants()
        outputs = []
        with no_grad():
            for start in range(0, len(images), PREDICT_BATCH_SIZE):
                outputs.append(fn(p, Tensor(images[start : start + PREDICT_BATCH_SIZE])).data)
        if not outputs:
            return np.zeros((0, 0))
        return np.concatenate(outputs).astype(np.float64)

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        logits = self._batched(images, self.model.logits)
        return ops.softmax(logits) if logits.size else np.zeros((0, self.model.num_classes))

    def predict(self, images: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(images), axis=1)

    def accuracy(self, dataset: LabeledImageSet) -> float:
        if len(dataset) == 0:
            raise EvaluationError("cannot measure accuracy on an empty set")
        return float(np.mean(self.predict(dataset.images) == dataset.labels))

    def embed(self, images: np.ndarray) -> np.ndarray:
        features = self._batched(images, self.model.features)
        return features if features.size else np.zeros((0, self.model.feature_dim))


class FeatureExtractor(TrainedClassifier):
    """Penultimate-layer embeddings of a classifier trained on the pre-train domain."""


def _seeded(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def train_classifier(
    dataset: LabeledImageSet,
    config: ClassifierConfig,
    init: Optional[ParameterSet] = None,
    dtype=np.float32,
) -> TrainedClassifier:
    """
    Train with SGD + momentum on random minibatches with flip/shift augmentation.

    `init` continues from previously trained parameters (classifier
    pre-training); it must match the architecture.
    """
    if len(dataset) == 0:
        raise EvaluationError("cannot train a classifier on an empty set")
    model = ConvClassifier(config.arch, dataset.image_shape, dataset.num_classes, config.feature_dim)
    params = model.init_params(_seeded(config.init_seed, 0), dtype)
    if init is not None:
        params.check_compatible(init, "classifier initialisation")
        params = init.astype(dtype)

    batch_rng = _seeded(config.batch_seed, 1)
    augment_rng = _seeded(config.batch_seed, 2)
    velocity = params.zeros_like()
    n = len(dataset)

    def loss_fn(p, x, y):
        return ops.softmax_cross_entropy(model.logits(p, x), y, config.label_smoothing)

    loss = float("nan")
    for _ in range(config.steps):
        idx = batch_rng.integers(0, n, size=min(config.batch_size, n))
        images = augment_batch(dataset.images[idx], config, augment_rng)
        loss, grad = value_and_grad(loss_fn, params, Tensor(images, dtype=dtype), dataset.labels[idx])
        if config.weight_decay:
            grad = grad.zip_map(params, lambda g, w: (g + config.weight_decay * w).astype(g.dtype))
        velocity = velocity.zip_map(grad, lambda v, g: (config.momentum * v + g).astype(v.dtype))
        if config.nesterov:
            step = grad.zip_map(velocity, lambda g, v: g + config.momentum * v)
        else:
            step = velocity
        params = params.zip_map(step, lambda w, s: (w - config.learning_rate * s).astype(w.dtype))

    logger.debug(f"Trained {config.arch} classifier for {config.steps} steps, final loss {loss:.4f}")
    return TrainedClassifier(model=model, params=params)


def train_feature_extractor(dataset: LabeledImageSet, config: ClassifierConfig) -> FeatureExtractor:
    trained = train_classifier(dataset, config)
    return FeatureExtractor(model=trained.model, params=trained.params)
