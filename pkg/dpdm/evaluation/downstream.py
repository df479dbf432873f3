"""Downstream classification on synthetic data, ensembling and domain discrimination."""

import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .classifier import TrainedClassifier, train_classifier
from .models import ClassifierConfig, DiscriminatorResult
from ..data.models import LabeledImageSet
from ..utils.errors import EvaluationError

logger = logging.getLogger(__name__)

PRETRAIN_LABEL = 0
FINETUNE_LABEL = 1


def _check_label_space(synthetic: LabeledImageSet, real_test: LabeledImageSet) -> None:
    if synthetic.num_classes != real_test.num_classes:
        raise EvaluationError(
            f"label spaces differ: synthetic has {synthetic.num_classes} classes, real has {real_test.num_classes}"
        )
    if synthetic.image_shape != real_test.image_shape:
        raise EvaluationError(f"image shapes differ: {synthetic.image_shape} vs {real_test.image_shape}")


def train_downstream(
    synthetic: LabeledImageSet,
    config: ClassifierConfig,
    real_test: LabeledImageSet,
    pretrained: Optional[TrainedClassifier] = None,
) -> float:
    """Top-1 accuracy on real test data of a classifier trained only on synthetic data."""
    _check_label_space(synthetic, real_test)
    init = pretrained.params if pretrained is not None else None
    classifier = train_classifier(synthetic, config, init=init)
    accuracy = classifier.accuracy(real_test)
    logger.info(f"Downstream {config.arch} on {len(synthetic)} synthetic samples: accuracy {accuracy:.4f}")
    return accuracy


def ensemble_members(config: ClassifierConfig, members: int, batch_seeds: Optional[Sequence[int]] = None):
    """Configs differing only in the minibatch-sampling seed."""
    if members < 1:
        raise EvaluationError(f"an ensemble needs at least one member, got {members}")
    seeds = list(batch_seeds) if batch_seeds is not None else [config.batch_seed + j for j in range(members)]
    if len(seeds) != members:
        raise EvaluationError(f"{members} members but {len(seeds)} batch seeds")
    return [replace(config, batch_seed=seed) for seed in seeds]


def ensemble_accuracy(
    synthetic: LabeledImageSet,
    config: ClassifierConfig,
    members: int,
    real_test: LabeledImageSet,
    batch_seeds: Optional[Sequence[int]] = None,
) -> float:
    """Average the members' softmax outputs and report top-1 accuracy."""
    _check_label_space(synthetic, real_test)
    probabilities = np.zeros((len(real_test), real_test.num_classes))
    for member in ensemble_members(config, members, batch_seeds):
        probabilities += train_classifier(synthetic, member).predict_proba(real_test.images)
    probabilities /= members
    return float(np.mean(np.argmax(probabilities, axis=1) == real_test.labels))


def _domain_set(pretrain: LabeledImageSet, finetune: LabeledImageSet) -> LabeledImageSet:
    images = np.concatenate([pretrain.images, finetune.images])
    labels = np.concatenate(
        [np.full(len(pretrain), PRETRAIN_LABEL), np.full(len(finetune), FINETUNE_LABEL)]
    )
    return LabeledImageSet(images=images, labels=labels, num_classes=2, domain="pretrain", split="train")


def domain_discriminator(
    pretrain: LabeledImageSet,
    finetune: LabeledImageSet,
    synthetic: LabeledImageSet,
    config: ClassifierConfig,
    holdout_fraction: float = 0.2,
) -> DiscriminatorResult:
    """
    Train a pre-train vs fine-tune classifier on real data and report the
    fraction of synthetic samples it assigns to the fine-tune domain.

    The result is flagged unreliable when held-out accuracy is below the
    discriminator threshold.
    """
    if len(pretrain) < 2 or len(finetune) < 2:
        raise EvaluationError("the discriminator needs at least two real samples per domain")
    if not 0 < holdout_fraction < 1:
        raise EvaluationError(f"holdout_fraction must lie in (0, 1), got {holdout_fraction}")
    combined = _domain_set(pretrain, finetune)
    order = np.random.default_rng(np.random.SeedSequence([config.init_seed, 3])).permutation(len(combined))
    holdout = max(1, int(round(holdout_fraction * len(combined))))
    test, train = combined.subset(order[:holdout]), combined.subset(order[holdout:])

    classifier = train_classifier(train, config)
    predictions = classifier.predict(test.images)
    test_accuracy = float(np.mean(predictions == test.labels))
    finetune_mask = test.labels == FINETUNE_LABEL
    finetune_recall = float(np.mean(predictions[finetune_mask] == FINETUNE_LABEL)) if finetune_mask.any() else 0.0
    pretrain_recall = float(np.mean(predictions[~finetune_mask] == PRETRAIN_LABEL)) if (~finetune_mask).any() else 0.0

    synthetic_predictions = classifier.predict(synthetic.images) if len(synthetic) else np.zeros(0, dtype=np.int64)
    fraction = float(np.mean(synthetic_predictions == FINETUNE_LABEL)) if len(synthetic) else 0.0
    per_class = {
        c: float(np.mean(synthetic_predictions[synthetic.labels == c] == FINETUNE_LABEL))
        for c in range(synthetic.num_classes)
        if np.any(synthetic.labels == c)
    }
    result = DiscriminatorResult(
        fraction_finetune=fraction,
        test_accuracy=test_accuracy,
        finetune_recall=finetune_recall,
        pretrain_recall=pretrain_recall,
        per_class=per_class,
    )
    if not result.reliable:
        logger.warning(f"Domain discriminator held-out accuracy {test_accuracy:.3f} is below threshold")
    return result
