"""Model-selection study: do synthetic-data rankings transfer to real data?"""

import concurrent.futures
import logging
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from .classifier import train_classifier
from .models import ClassifierConfig, ModelSelectionRecord, SelectionStudy
from ..config import MODEL_SELECTION_GRID
from ..data.models import LabeledImageSet
from ..utils.errors import EvaluationError

logger = logging.getLogger(__name__)

GridPoint = Tuple[str, float, float]

MIN_GRID_POINTS = 6
MIN_GRID_ARCHS = 2


def expand_grid(grid: Dict[str, Tuple[Sequence[float], Sequence[float]]] = MODEL_SELECTION_GRID) -> List[GridPoint]:
    """(arch, learning rate, weight decay) for every combination, in a fixed order."""
    return [
        (arch, float(lr), float(wd))
        for arch in sorted(grid)
        for lr in grid[arch][0]
        for wd in grid[arch][1]
    ]


def spearman(a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    """Rank correlation with average ranks for ties; None when either list is constant."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EvaluationError(f"rank lists differ in length: {a.size} vs {b.size}")
    if a.size < 2 or np.all(a == a[0]) or np.all(b == b[0]):
        return None
    rho = float(spearmanr(a, b)[0])
    return None if np.isnan(rho) else float(np.clip(rho, -1.0, 1.0))


def best_in_top_k(synthetic: Sequence[float], real: Sequence[float], k: int = 2) -> bool:
    """Whether the best config on real data is among the k best by synthetic accuracy."""
    if len(real) == 0:
        return False
    best_real = int(np.argmax(real))
    ranking = np.argsort(-np.asarray(synthetic, dtype=np.float64), kind="stable")
    return best_real in set(int(i) for i in ranking[:k])


def _evaluate_point(
    point: GridPoint,
    base: ClassifierConfig,
    synthetic_train: LabeledImageSet,
    synthetic_test: LabeledImageSet,
    real_train: LabeledImageSet,
    real_test: LabeledImageSet,
) -> Tuple[ModelSelectionRecord, ModelSelectionRecord]:
    arch, lr, wd = point
    config = replace(base, arch=arch, learning_rate=lr, weight_decay=wd)
    on_synthetic = train_classifier(synthetic_train, config)
    on_real = train_classifier(real_train, config)
    synthetic_accuracy = on_synthetic.accuracy(synthetic_test)
    record_a = ModelSelectionRecord(arch, lr, wd, synthetic_accuracy, on_synthetic.accuracy(real_test))
    record_b = ModelSelectionRecord(arch, lr, wd, synthetic_accuracy, on_real.accuracy(real_test))
    return record_a, record_b


def model_selection_study(
    synthetic_train: LabeledImageSet,
    synthetic_test: LabeledImageSet,
    real_train: LabeledImageSet,
    real_test: LabeledImageSet,
    grid: Sequence[GridPoint],
    base: Optional[ClassifierConfig] = None,
    max_workers: Optional[int] = None,
) -> SelectionStudy:
    """
    Train every grid point and compare rankings.

    Setting (a): train on synthetic, test on synthetic and real test splits.
    Setting (b): train separately on synthetic and real, each tested on its
    own source. Grid points are independent and may run in parallel.
    """
    grid = list(grid)
    if len(grid) < MIN_GRID_POINTS or len({arch for arch, _, _ in grid}) < MIN_GRID_ARCHS:
        raise EvaluationError(
            f"model selection needs >= {MIN_GRID_POINTS} configurations across >= {MIN_GRID_ARCHS} architectures"
        )
    if synthetic_train.num_classes != real_train.num_classes:
        raise EvaluationError("synthetic and real label spaces differ")
    base = base or ClassifierConfig()

    results: List[Optional[Tuple[ModelSelectionRecord, ModelSelectionRecord]]] = [None] * len(grid)
    args = (base, synthetic_train, synthetic_test, real_train, real_test)
    if not max_workers or max_workers <= 1:
        for i, point in enumerate(grid):
            results[i] = _evaluate_point(point, *args)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            future_to_index = {executor.submit(_evaluate_point, point, *args): i for i, point in enumerate(grid)}
            for future in concurrent.futures.as_completed(future_to_index):
                results[future_to_index[future]] = future.result()

    setting_a = [pair[0] for pair in results]  # type: ignore[index]
    setting_b = [pair[1] for pair in results]  # type: ignore[index]
    synthetic_acc = [r.accuracy_synthetic for r in setting_a]
    rho_a = spearman(synthetic_acc, [r.accuracy_real for r in setting_a])
    rho_b = spearman(synthetic_acc, [r.accuracy_real for r in setting_b])
    logger.info(f"Model selection over {len(grid)} configs: rho_a={rho_a} rho_b={rho_b}")
    return SelectionStudy(
        setting_a=setting_a,
        setting_b=setting_b,
        rho_a=rho_a,
        rho_b=rho_b,
        best_real_in_top2_a=best_in_top_k(synthetic_acc, [r.accuracy_real for r in setting_a]),
        best_real_in_top2_b=best_in_top_k(synthetic_acc, [r.accuracy_real for r in setting_b]),
    )
