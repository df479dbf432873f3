"""Codecs for IDX data, DPDM checkpoints and run configuration files."""

from .checkpoint_parser import Checkpoint, CheckpointParser
from .config_parser import ConfigParser
from .idx_parser import IdxParser, load_idx, write_idx

__all__ = ["Checkpoint", "CheckpointParser", "ConfigParser", "IdxParser", "load_idx", "write_idx"]
