"""Shared fixtures: tiny models and datasets that keep 64-bit checks fast."""

import numpy as np
import pytest

from dpdm.data.models import LabeledImageSet
from dpdm.diffusion.model import ArchitectureDescriptor, DenoiserModel
from dpdm.diffusion.schedule import make_linear_schedule
from dpdm.diffusion.timesteps import TimestepMixture


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end studies")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end studies, run with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def schedule():
    return make_linear_schedule(T=20, beta_start=1e-3, beta_end=0.2)


@pytest.fixture
def mixture(schedule):
    return TimestepMixture.uniform(schedule.T)


@pytest.fixture
def tiny_arch():
    return ArchitectureDescriptor(image_shape=(4, 4, 1), kind="conv", channels=(3,), embedding_dim=4, num_classes=2)


@pytest.fixture
def tiny_model(tiny_arch):
    return DenoiserModel(tiny_arch)


@pytest.fixture
def params64(tiny_model):
    return tiny_model.init_params(np.random.default_rng(0), dtype=np.float64)


@pytest.fixture
def tiny_dataset():
    rng = np.random.default_rng(99)
    images = rng.uniform(-1.0, 1.0, size=(8, 4, 4, 1)).astype(np.float32)
    labels = np.arange(8) % 2
    return LabeledImageSet(images=images, labels=labels, num_classes=2)
