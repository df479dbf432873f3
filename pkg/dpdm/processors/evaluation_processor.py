"""FID, downstream accuracy and model-selection evaluations with TSV reports."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import DomainData
from .factories import classifier_config_from
from .run_config import RunConfig
from .run_directory import FINETUNE_CHECKPOINT, RunDirectory
from .sampling_processor import SamplingProcessor
from ..config import DOWNSTREAM_REPORT, FID_REPORT, SELECTION_REPORT
from ..data.models import LabeledImageSet
from ..evaluation.classifier import FeatureExtractor, train_classifier, train_feature_extractor
from ..evaluation.downstream import domain_discriminator, ensemble_accuracy, train_downstream
from ..evaluation.frechet import fid_like_score
from ..evaluation.models import DiscriminatorResult, FidResult, SelectionStudy
from ..evaluation.selection import expand_grid, model_selection_study
from ..formatters.tsv_writer import TsvWriter
from ..parsers.checkpoint_parser import CheckpointParser
from ..parsers.idx_parser import load_idx
from ..utils.errors import ConfigError

logger = logging.getLogger(__name__)

SYNTHETIC_TEST_FRACTION = 0.2


@dataclass
class DownstreamReport:
    accuracy: float
    ensemble_accuracy: float
    ensemble_size: int
    discriminator: DiscriminatorResult
    synthetic_count: int


class EvaluationProcessor:
    """Evaluates a synthetic dataset against the run's real data."""

    def __init__(
        self,
        config: RunConfig,
        run_dir: RunDirectory,
        data: Optional[DomainData] = None,
        sampler: Optional[SamplingProcessor] = None,
    ):
        self.config = config
        self.run_dir = run_dir
        self.data = data or DomainData(config)
        self.sampler = sampler or SamplingProcessor(config, run_dir)
        self.writer = TsvWriter()
        self._extractor: Optional[FeatureExtractor] = None

    def synthetic(self, checkpoint_path: Optional[str] = None) -> LabeledImageSet:
        """Synthetic IDX files when configured, otherwise fresh samples from the checkpoint."""
        images, labels = self.config["synthetic_images"], self.config["synthetic_labels"]
        if images and labels:
            return load_idx(images, labels, domain="synthetic", num_classes=self.data.num_classes)
        path = checkpoint_path or self.config["checkpoint"]
        if not path:
            default = self.run_dir.checkpoints / FINETUNE_CHECKPOINT
            if not default.exists():
                raise ConfigError("checkpoint", "give a checkpoint or synthetic_images/synthetic_labels")
            path = str(default)
        checkpoint = CheckpointParser().read(path)
        return self.sampler.sample_from(checkpoint, self.config["num_samples"], self.config["balanced"])

    def feature_extractor(self) -> FeatureExtractor:
        """Trained once on the pre-train domain, then frozen."""
        if self._extractor is None:
            logger.info("Training feature extractor on the pre-train domain")
            self._extractor = train_feature_extractor(self.data.pretrain, classifier_config_from(self.config))
        return self._extractor

    def fid(self, synthetic: LabeledImageSet) -> FidResult:
        return fid_like_score(self.data.test, synthetic, self.feature_extractor(), per_class=self.config["per_class"])

    def write_fid(self, result: FidResult) -> Path:
        rows = [("all", result.score, result.real_count, result.synthetic_count, result.regularized)]
        rows += [(f"class{c}", score, "", "", result.regularized) for c, score in sorted(result.per_class.items())]
        return self.writer.write(
            self.run_dir.reports / FID_REPORT, ("scope", "fid", "real_count", "synthetic_count", "regularized"), rows
        )

    def downstream(self, synthetic: LabeledImageSet) -> DownstreamReport:
        classifier_config = classifier_config_from(self.config)
        pretrained = None
        if self.config["classifier_pretrain"]:
            pretrained = train_classifier(self.data.pretrain, classifier_config)
        accuracy = train_downstream(synthetic, classifier_config, self.data.test, pretrained=pretrained)
        members = self.config["ensemble_size"]
        ensemble = ensemble_accuracy(synthetic, classifier_config, members, self.data.test)
        # Discriminator sees equally many real images from both domains
        real_train = self.data.train
        pretrain = self.data.pretrain.subset(np.arange(min(len(self.data.pretrain), len(real_train))))
        discriminator = domain_discriminator(pretrain, real_train, synthetic, classifier_config)
        return DownstreamReport(
            accuracy=accuracy,
            ensemble_accuracy=ensemble,
            ensemble_size=members,
            discriminator=discriminator,
            synthetic_count=len(synthetic),
        )

    def write_downstream(self, report: DownstreamReport) -> Path:
        d = report.discriminator
        rows = [
            ("accuracy", "all", report.accuracy),
            (f"ensemble{report.ensemble_size}_accuracy", "all", report.ensemble_accuracy),
            ("discriminator_fraction_finetune", "all", d.fraction_finetune),
            ("discriminator_test_accuracy", "all", d.test_accuracy),
            ("discriminator_reliable", "all", d.reliable),
        ]
        rows += [("discriminator_fraction_finetune", f"class{c}", v) for c, v in sorted(d.per_class.items())]
        return self.writer.write(self.run_dir.reports / DOWNSTREAM_REPORT, ("metric", "scope", "value"), rows)

    def model_selection(self, synthetic: LabeledImageSet) -> SelectionStudy:
        """Synthetic data is split into train/test parts; real data uses its own splits."""
        order = np.random.default_rng(np.random.SeedSequence([self.config.seed, 7])).permutation(len(synthetic))
        cut = max(1, int(round(SYNTHETIC_TEST_FRACTION * len(synthetic))))
        synthetic_test, synthetic_train = synthetic.subset(order[:cut]), synthetic.subset(order[cut:])
        return model_selection_study(
            synthetic_train,
            synthetic_test,
            self.data.train,
            self.data.test,
            expand_grid(),
            base=classifier_config_from(self.config),
            max_workers=self.config.threads,
        )

    def write_selection(self, study: SelectionStudy) -> Path:
        rows = []
        for setting, records in (("a", study.setting_a), ("b", study.setting_b)):
            for r in records:
                rows.append((setting, r.arch, r.learning_rate, r.weight_decay, r.accuracy_synthetic, r.accuracy_real))
        # Summary rows carry their value in the accuracy_synthetic column
        for setting, rho, top2 in (("a", study.rho_a, study.best_real_in_top2_a), ("b", study.rho_b, study.best_real_in_top2_b)):
            rows.append((setting, "spearman_rho", "", "", rho, ""))
            rows.append((setting, "best_real_in_top2", "", "", top2, ""))
        header = ("setting", "arch", "learning_rate", "weight_decay", "accuracy_synthetic", "accuracy_real")
        return self.writer.write(self.run_dir.reports / SELECTION_REPORT, header, rows)
