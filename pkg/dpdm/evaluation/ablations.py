"""Aggregation helpers for repeated-seed ablation studies."""

from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .downstream import ensemble_accuracy, train_downstream
from .models import ClassifierConfig
from ..data.models import LabeledImageSet
from ..utils.errors import EvaluationError


@dataclass(frozen=True)
class AblationRow:
    study: str
    variant: str
    seed: int
    metric: str
    value: float


def summarize(rows: Sequence[AblationRow]) -> Dict[Tuple[str, str, str], float]:
    """Mean value per (study, variant, metric) over seeds."""
    groups: Dict[Tuple[str, str, str], List[float]] = {}
    for row in rows:
        groups.setdefault((row.study, row.variant, row.metric), []).append(row.value)
    return {key: float(np.mean(values)) for key, values in groups.items()}


def sample_size_scaling(
    synthetic_pool: LabeledImageSet,
    real_test: LabeledImageSet,
    config: ClassifierConfig,
    base_size: int,
    factors: Sequence[int] = (1, 4),
    seeds: Sequence[int] = (0,),
) -> List[AblationRow]:
    """Downstream accuracy when training on the first factor·base_size synthetic samples."""
    if base_size * max(factors) > len(synthetic_pool):
        raise EvaluationError(f"synthetic pool of {len(synthetic_pool)} is too small for {max(factors)}×{base_size}")
    rows = []
    for seed in seeds:
        seeded = replace(config, init_seed=seed, batch_seed=seed)
        for factor in factors:
            subset = synthetic_pool.subset(np.arange(factor * base_size))
            rows.append(AblationRow("sample_size", f"{factor}n", seed, "accuracy", train_downstream(subset, seeded, real_test)))
    return rows


def ensemble_gain(
    synthetic: LabeledImageSet,
    real_test: LabeledImageSet,
    config: ClassifierConfig,
    members: int,
    seeds: Sequence[int] = (0,),
) -> List[AblationRow]:
    """Single-model vs m-member ensemble accuracy for each seed."""
    rows = []
    for seed in seeds:
        seeded = replace(config, init_seed=seed, batch_seed=seed * members)
        single = train_downstream(synthetic, seeded, real_test)
        ensemble = ensemble_accuracy(synthetic, seeded, members, real_test)
        rows.append(AblationRow("ensemble", "single", seed, "accuracy", single))
        rows.append(AblationRow("ensemble", f"ensemble{members}", seed, "accuracy", ensemble))
    return rows
