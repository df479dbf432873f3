"""Desk-scale ablations: pre-training, timestep mixture, sample size and ensembling."""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .datasets import DomainData
from .evaluation_processor import EvaluationProcessor
from .factories import classifier_config_from
from .run_config import RunConfig
from .run_directory import RunDirectory
from .sampling_processor import SamplingProcessor
from .training_processor import TrainingProcessor
from ..config import ABLATION_REPORT
from ..data.models import LabeledImageSet
from ..evaluation.ablations import AblationRow, ensemble_gain, sample_size_scaling, summarize
from ..evaluation.downstream import train_downstream
from ..formatters.tsv_writer import TsvWriter
from ..parsers.checkpoint_parser import Checkpoint, CheckpointParser
from ..training.models import StepStats
from ..utils.errors import ConfigError

logger = logging.getLogger(__name__)

ABLATION_STUDIES = ("pretraining", "timesteps", "sample_size", "ensemble")
UNIFORM_MIXTURE = "uniform"

# (pre-trained init?, mixture preset, seed)
RunKey = Tuple[bool, str, int]


class AblationProcessor:
    """
    Every variant is trained under the same privacy budget; each repeat
    uses its own seed for training, sampling and the downstream classifier.
    """

    def __init__(
        self,
        config: RunConfig,
        run_dir: RunDirectory,
        data: Optional[DomainData] = None,
        progress: Optional[Callable[[StepStats], None]] = None,
    ):
        self.config = config
        self.run_dir = run_dir
        self.data = data or DomainData(config)
        self.training = TrainingProcessor(config, run_dir, self.data, progress)
        self.sampler = SamplingProcessor(config, run_dir)
        self.evaluator = EvaluationProcessor(config, run_dir, self.data, self.sampler)
        self.writer = TsvWriter()
        self._pretrained: Optional[Checkpoint] = None
        self._checkpoints: Dict[RunKey, Checkpoint] = {}
        self._synthetic: Dict[RunKey, LabeledImageSet] = {}

    @property
    def seeds(self) -> List[int]:
        return [self.config.seed + r for r in range(self.config["repeats"])]

    def pretrained_checkpoint(self) -> Checkpoint:
        if self._pretrained is None:
            path = self.config["init_checkpoint"]
            if path:
                self._pretrained = CheckpointParser().read(path)
            else:
                logger.info("Pre-training the shared initialisation for the ablations")
                self._pretrained = self.training.pretrain().checkpoint
        return self._pretrained

    def checkpoint_for(self, pretrained: bool, mixture: str, seed: int) -> Checkpoint:
        """One private run on the fine-tune train split, cached per (init, mixture, seed)."""
        key = (pretrained, mixture, seed)
        if key not in self._checkpoints:
            init = self.pretrained_checkpoint() if pretrained else None
            outcome = self.training.train_private(self.data.train, init, seed, mixture_name=mixture)
            logger.info(f"Ablation run {key}: epsilon={outcome.spend.epsilon:.3f} sigma={outcome.noise_multiplier:.3f}")
            self._checkpoints[key] = outcome.result.checkpoint
        return self._checkpoints[key]

    def synthetic(self, pretrained: bool, mixture: str, seed: int) -> LabeledImageSet:
        key = (pretrained, mixture, seed)
        if key not in self._synthetic:
            checkpoint = self.checkpoint_for(pretrained, mixture, seed)
            self._synthetic[key] = self.sampler.sample_from(checkpoint, self.config["num_samples"], self.config["balanced"], seed)
        return self._synthetic[key]

    def _score(self, study: str, variant: str, seed: int, synthetic: LabeledImageSet) -> List[AblationRow]:
        accuracy = train_downstream(synthetic, classifier_config_from(self.config, seed), self.data.test)
        fid = self.evaluator.fid(synthetic).score
        return [
            AblationRow(study, variant, seed, "accuracy", accuracy),
            AblationRow(study, variant, seed, "fid", fid),
        ]

    def run(self, studies: Sequence[str] = ABLATION_STUDIES) -> List[AblationRow]:
        unknown = sorted(set(studies) - set(ABLATION_STUDIES))
        if unknown:
            raise ConfigError("studies", f"unknown ablation studies {unknown}")
        biased = self.config["mixture"]
        rows: List[AblationRow] = []
        for seed in self.seeds:
            if "pretraining" in studies:
                rows += self._score("pretraining", "pretrained", seed, self.synthetic(True, biased, seed))
                rows += self._score("pretraining", "scratch", seed, self.synthetic(False, biased, seed))
            if "timesteps" in studies:
                rows += self._score("timesteps", biased, seed, self.synthetic(True, biased, seed))
                rows += self._score("timesteps", UNIFORM_MIXTURE, seed, self.synthetic(True, UNIFORM_MIXTURE, seed))

        base = self.config["num_samples"]
        classifier = classifier_config_from(self.config)
        if "sample_size" in studies or "ensemble" in studies:
            seed = self.config.seed
            if "sample_size" in studies:
                large = self.sampler.sample_from(
                    self.checkpoint_for(True, biased, seed), 4 * base, self.config["balanced"], seed
                )
                rows += sample_size_scaling(large, self.data.test, classifier, base, (1, 4), self.seeds)
            if "ensemble" in studies:
                rows += ensemble_gain(self.synthetic(True, biased, seed), self.data.test, classifier, self.config["ensemble_size"], self.seeds)
        return rows

    def write(self, rows: Sequence[AblationRow]) -> Path:
        table = [(r.study, r.variant, r.seed, r.metric, r.value) for r in rows]
        table += [(study, variant, "mean", metric, value) for (study, variant, metric), value in summarize(rows).items()]
        return self.writer.write(self.run_dir.reports / ABLATION_REPORT, ("study", "variant", "seed", "metric", "value"), table)
