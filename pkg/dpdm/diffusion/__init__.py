"""Forward process, denoising objective, timestep sampling and ancestral sampling."""

from .ema import EmaTracker, ema_update
from .loss import diffusion_loss, make_loss_fn
from .model import ArchitectureDescriptor, DenoiserModel
from .sampling import ancestral_sample, ancestral_sample_batch, balanced_labels
from .schedule import NoiseSchedule, forward_noise, make_linear_schedule, noise_sample
from .timesteps import TimestepMixture, sample_timestep, sample_timesteps

__all__ = [
    "NoiseSchedule",
    "make_linear_schedule",
    "forward_noise",
    "noise_sample",
    "TimestepMixture",
    "sample_timestep",
    "sample_timesteps",
    "ArchitectureDescriptor",
    "DenoiserModel",
    "diffusion_loss",
    "make_loss_fn",
    "ancestral_sample",
    "ancestral_sample_batch",
    "balanced_labels",
    "EmaTracker",
    "ema_update",
]
