"""Run directory layout: checkpoints/, samples/, logs/, reports/ and config.resolved."""

from pathlib import Path
from typing import Union

from .run_config import RunConfig
from ..config import RESOLVED_CONFIG_NAME, RUN_SUBDIRS

PRETRAIN_CHECKPOINT = "pretrain.dpdm"
FINETUNE_CHECKPOINT = "finetune.dpdm"
SAMPLE_IMAGES = "synthetic-images.idx"
SAMPLE_LABELS = "synthetic-labels.idx"


class RunDirectory:
    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def create(self) -> "RunDirectory":
        for name in RUN_SUBDIRS:
            (self.root / name).mkdir(parents=True, exist_ok=True)
        return self

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def samples(self) -> Path:
        return self.root / "samples"

    @property
    def logs(self) -> Path:
        return self.root / "logs"

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    def write_resolved(self, config: RunConfig) -> Path:
        """Every effective setting, defaults included, in sorted key order."""
        path = self.root / RESOLVED_CONFIG_NAME
        self.root.mkdir(parents=True, exist_ok=True)
        path.write_text(config.resolved_text(), encoding="utf-8")
        return path
