"""Named, independent random streams derived from one seed."""

from typing import Dict

import numpy as np

# Fixed ids so adding a stream never shifts the others
STREAM_IDS = {
    "init": 0,
    "batch": 1,
    "augment": 2,
    "diffusion": 3,
    "noise": 4,
    "sample": 5,
}


class RngStreams:
    """
    Lazily created numpy generators, one per named concern.

    Two instances built from the same seed produce identical draws per stream,
    and draws from one stream never perturb another.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: Dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in STREAM_IDS:
            raise KeyError(f"unknown RNG stream '{name}'")
        if name not in self._streams:
            seq = np.random.SeedSequence([self.seed, STREAM_IDS[name]])
            self._streams[name] = np.random.default_rng(seq)
        return self._streams[name]

    @property
    def init(self) -> np.random.Generator:
        return self["init"]

    @property
    def batch(self) -> np.random.Generator:
        return self["batch"]

    @property
    def augment(self) -> np.random.Generator:
        return self["augment"]

    @property
    def diffusion(self) -> np.random.Generator:
        return self["diffusion"]

    @property
    def noise(self) -> np.random.Generator:
        return self["noise"]

    @property
    def sample(self) -> np.random.Generator:
        return self["sample"]
