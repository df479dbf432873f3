"""The simplified denoising objective."""

from typing import Mapping, Optional, Union

import numpy as np

from .schedule import NoiseSchedule, forward_noise
from ..numerics import ParameterSet, Tensor, ops


def diffusion_loss(
    model,
    params: Union[ParameterSet, Mapping[str, Tensor]],
    schedule: NoiseSchedule,
    x0,
    labels: Optional[np.ndarray],
    t,
    eps,
) -> Tensor:
    """
    ‖eps − ε_θ(x_t, t, y)‖² summed over coordinates, averaged over draws.

    `x0`, `eps` are (k, H, W, C) stacks of k draws (k=1 for a single draw)
    with one timestep per draw. Passing tracked parameter tensors makes the
    result differentiable; a `ParameterSet` evaluates it as a constant.
    """
    p = params.constants() if isinstance(params, ParameterSet) else params
    x0 = x0 if isinstance(x0, Tensor) else Tensor(x0, dtype=next(iter(p.values())).dtype)
    eps = eps if isinstance(eps, Tensor) else Tensor(eps, dtype=x0.dtype)
    x_t = forward_noise(schedule, x0, t, eps)
    pred = model.apply(p, x_t, t, labels)
    return ops.scale(ops.squared_error_sum(pred, eps), 1.0 / x0.shape[0])


def make_loss_fn(model, schedule: NoiseSchedule):
    """`diffusion_loss` as a numerics loss function of (params, x0, labels, t, eps)."""

    def loss_fn(p: Mapping[str, Tensor], x0, labels, t, eps) -> Tensor:
        return diffusion_loss(model, p, schedule, x0, labels, t, eps)

    return loss_fn
