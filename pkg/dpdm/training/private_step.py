"""One privatised optimisation step.

ĝ = (1/B) · (Σ_i clip_C(mean_k ∇l_ik) + σC·ξ),  ξ ~ N(0, I)

Per-example gradients are averaged over K augmented views before clipping,
computed microbatch by microbatch, and reduced in a fixed order.
"""

import concurrent.futures
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .clipping import clip
from .models import AugmentationPolicy, DpTrainConfig, StepStats
from .optimizers import Optimizer, OptimizerState
from ..data.augment import augment
from ..diffusion.loss import make_loss_fn
from ..diffusion.schedule import NoiseSchedule
from ..diffusion.timesteps import TimestepMixture, sample_timestep, sample_timesteps
from ..numerics import ParameterSet, Tensor, value_and_grad
from ..utils.errors import NonFiniteGradientError, ShapeError
from ..utils.rng import RngStreams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentedDraws:
    """K views of one example: augmented images, timesteps and diffusion noise."""

    images: np.ndarray
    timesteps: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        if self.images.shape != self.noise.shape or self.images.shape[0] != len(self.timesteps):
            raise ShapeError("augmented draws", self.images.shape, self.noise.shape)

    @property
    def samples(self) -> int:
        return int(self.images.shape[0])


@dataclass(frozen=True)
class PrivateGradient:
    """ĝ together with what the step is allowed to report about it."""

    g_hat: ParameterSet
    loss: float
    clipped_norms: np.ndarray
    batch_size: int


@dataclass(frozen=True)
class StepOutcome:
    params: ParameterSet
    opt_state: OptimizerState
    stats: StepStats


def draw_augmented_views(
    image: np.ndarray,
    policy: AugmentationPolicy,
    mixture: TimestepMixture,
    augment_rng: np.random.Generator,
    diffusion_rng: np.random.Generator,
    dtype=np.float32,
) -> AugmentedDraws:
    """Draw K (view, t, eps) triples; without timestep resampling all views share one t."""
    k = policy.samples
    views = np.stack([augment(image, policy, augment_rng) for _ in range(k)]).astype(dtype)
    if policy.resample_timesteps:
        timesteps = sample_timesteps(mixture, diffusion_rng, k)
    else:
        timesteps = np.full(k, sample_timestep(mixture, diffusion_rng), dtype=np.int64)
    noise = diffusion_rng.standard_normal(views.shape).astype(dtype)
    return AugmentedDraws(images=views, timesteps=np.asarray(timesteps, dtype=np.int64), noise=noise)


def _labels_for(label: Optional[int], k: int) -> Optional[np.ndarray]:
    return None if label is None else np.full(k, int(label), dtype=np.int64)


def augmented_value_and_grad(
    model, params: ParameterSet, schedule: NoiseSchedule, label: Optional[int], draws: AugmentedDraws
) -> Tuple[float, ParameterSet]:
    """Loss and gradient of the K-draw mean; the gradient of a mean is the mean of gradients."""
    loss_fn = make_loss_fn(model, schedule)
    x0 = Tensor(draws.images, dtype=params.dtype)
    return value_and_grad(loss_fn, params, x0, _labels_for(label, draws.samples), draws.timesteps, draws.noise)


def per_example_augmented_gradient(
    model,
    params: ParameterSet,
    image: np.ndarray,
    label: Optional[int],
    policy: AugmentationPolicy,
    mixture: TimestepMixture,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    draws: Optional[AugmentedDraws] = None,
) -> ParameterSet:
    """Unclipped mean gradient over K augmented draws of one example."""
    if draws is None:
        draws = draw_augmented_views(image, policy, mixture, rng, rng, params.dtype)
    _, grad = augmented_value_and_grad(model, params, schedule, label, draws)
    return grad


def _check_finite(grad: ParameterSet) -> None:
    path = grad.first_non_finite()
    if path is not None:
        raise NonFiniteGradientError(path)


def _run_ordered(fn: Callable[[int], object], indices: Sequence[int], max_workers: Optional[int]) -> List:
    """Apply fn to every index, possibly on a pool; results keep index order."""
    if not max_workers or max_workers <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    results: List = [None] * len(indices)
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_slot = {executor.submit(fn, i): slot for slot, i in enumerate(indices)}
        for future in concurrent.futures.as_completed(future_to_slot):
            results[future_to_slot[future]] = future.result()
    return results


def _microbatches(n: int, size: int) -> List[range]:
    return [range(start, min(start + size, n)) for start in range(0, n, size)]


def privatized_gradient(
    model,
    params: ParameterSet,
    images: np.ndarray,
    labels: Optional[np.ndarray],
    config: DpTrainConfig,
    policy: AugmentationPolicy,
    mixture: TimestepMixture,
    schedule: NoiseSchedule,
    rngs: RngStreams,
) -> PrivateGradient:
    """
    ĝ for one (possibly Poisson-sized) batch, normalised by the nominal B.

    All augmentation and diffusion draws are taken up front in example
    order, so ĝ does not depend on the microbatch size or on threading.
    """
    n = len(images)
    dtype = params.dtype
    draws = [
        draw_augmented_views(images[i], policy, mixture, rngs.augment, rngs.diffusion, dtype) for i in range(n)
    ]
    label_at = (lambda i: None) if labels is None else (lambda i: int(labels[i]))

    partial_sums: List[ParameterSet] = []
    losses: List[float] = []
    clipped_norms: List[float] = []

    if config.is_private:

        def one(i: int) -> Tuple[float, ParameterSet]:
            loss, grad = augmented_value_and_grad(model, params, schedule, label_at(i), draws[i])
            _check_finite(grad)
            return loss, clip(grad, config.clip_norm)

        for chunk in _microbatches(n, config.microbatch_size):
            results = _run_ordered(one, list(chunk), config.max_workers)
            losses.extend(loss for loss, _ in results)
            clipped = [grad for _, grad in results]
            clipped_norms.extend(grad.global_norm() for grad in clipped)
            partial_sums.append(ParameterSet.sum_all(clipped))
    else:
        # No clipping: a microbatch's gradient sum comes from one backward pass
        for chunk in _microbatches(n, config.microbatch_size):
            stacked = AugmentedDraws(
                images=np.concatenate([draws[i].images for i in chunk]),
                timesteps=np.concatenate([draws[i].timesteps for i in chunk]),
                noise=np.concatenate([draws[i].noise for i in chunk]),
            )
            chunk_labels = None if labels is None else np.repeat(np.asarray(labels)[list(chunk)], policy.samples)
            loss_fn = make_loss_fn(model, schedule)
            loss, grad = value_and_grad(
                loss_fn, params, Tensor(stacked.images, dtype=dtype), chunk_labels, stacked.timesteps, stacked.noise
            )
            _check_finite(grad)
            losses.extend([loss] * len(chunk))
            partial_sums.append(grad.scaled(float(len(chunk))))

    total = ParameterSet.sum_all(partial_sums) if partial_sums else params.zeros_like()

    if config.noise_multiplier > 0:
        std = config.noise_multiplier * config.clip_norm
        xi = rngs.noise.standard_normal(params.size) * std
        total = total.zip_map(params.unflatten(xi.astype(dtype)), lambda s, z: (s + z).astype(s.dtype))

    g_hat = total.scaled(1.0 / config.batch_size)
    loss = float(np.mean(losses)) if losses else math.nan
    return PrivateGradient(
        g_hat=g_hat, loss=loss, clipped_norms=np.asarray(clipped_norms, dtype=np.float64), batch_size=n
    )


def private_step(
    model,
    params: ParameterSet,
    images: np.ndarray,
    labels: Optional[np.ndarray],
    config: DpTrainConfig,
    policy: AugmentationPolicy,
    mixture: TimestepMixture,
    schedule: NoiseSchedule,
    rngs: RngStreams,
    optimizer: Optional[Optimizer] = None,
    opt_state: OptimizerState = None,
    step: int = 0,
) -> StepOutcome:
    """Privatise the batch gradient and apply one optimizer update."""
    optimizer = optimizer or Optimizer(config)
    private = privatized_gradient(model, params, images, labels, config, policy, mixture, schedule, rngs)
    new_params, new_state = optimizer.update(params, opt_state, private.g_hat, step)

    norms = private.clipped_norms
    stats = StepStats(
        step=step,
        loss=private.loss,
        batch_size=private.batch_size,
        learning_rate=optimizer.rate_at(step),
        grad_norm_median_clipped=float(np.median(norms)) if norms.size else None,
        grad_norm_p95_clipped=float(np.percentile(norms, 95)) if norms.size else None,
    )
    logger.debug(f"step {step}: batch={private.batch_size} loss={private.loss:.5f}")
    return StepOutcome(params=new_params, opt_state=new_state, stats=stats)
