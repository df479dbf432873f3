"""DP-SGD and DP-Adam updates applied to an already-privatised gradient."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .models import DpTrainConfig
from ..numerics import ParameterSet


@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float
    beta1: float
    beta2: float
    eps: float


@dataclass(frozen=True)
class AdamState:
    """First/second moments and the number of updates applied so far."""

    step: int
    m: ParameterSet
    v: ParameterSet

    @classmethod
    def zeros(cls, params: ParameterSet) -> "AdamState":
        zeros = params.zeros_like()
        return cls(step=0, m=zeros, v=zeros)


OptimizerState = Optional[AdamState]


def sgd_update(params: ParameterSet, g_hat: ParameterSet, learning_rate: float) -> ParameterSet:
    return params.zip_map(g_hat, lambda p, g: (p - learning_rate * g).astype(p.dtype))


def dp_adam_update(
    params: ParameterSet, state: AdamState, g_hat: ParameterSet, hyper: AdamHyper
) -> Tuple[ParameterSet, AdamState]:
    """
    Standard bias-corrected Adam on ĝ.

    Privacy is unaffected: ĝ is already private and this is post-processing.
    """
    state.m.check_compatible(params, "Adam state and parameters")
    step = state.step + 1
    b1, b2 = hyper.beta1, hyper.beta2
    m = state.m.zip_map(g_hat, lambda m_, g: (b1 * m_ + (1.0 - b1) * g).astype(m_.dtype))
    v = state.v.zip_map(g_hat, lambda v_, g: (b2 * v_ + (1.0 - b2) * g * g).astype(v_.dtype))
    correction1 = 1.0 - b1**step
    correction2 = 1.0 - b2**step

    def apply(name: str) -> np.ndarray:
        p = params[name]
        m_hat = m[name] / correction1
        v_hat = v[name] / correction2
        return (p - hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.eps)).astype(p.dtype)

    new_params = ParameterSet({name: apply(name) for name in params})
    return new_params, AdamState(step=step, m=m, v=v)


def learning_rate_at(step: int, base_rate: float, warmup_steps: int = 0) -> float:
    """Linear warm-up from base/warmup to base over `warmup_steps`, constant afterwards."""
    if warmup_steps <= 0:
        return base_rate
    return base_rate * min(1.0, (step + 1) / warmup_steps)


class Optimizer:
    """Dispatches to SGD or Adam according to a training config."""

    def __init__(self, config: DpTrainConfig):
        self.kind = config.optimizer
        self.learning_rate = config.learning_rate
        self.warmup_steps = config.warmup_steps
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.eps = config.adam_eps

    def init_state(self, params: ParameterSet) -> OptimizerState:
        return AdamState.zeros(params) if self.kind == "dp-adam" else None

    def rate_at(self, step: int) -> float:
        return learning_rate_at(step, self.learning_rate, self.warmup_steps)

    def update(
        self, params: ParameterSet, state: OptimizerState, g_hat: ParameterSet, step: int
    ) -> Tuple[ParameterSet, OptimizerState]:
        rate = self.rate_at(step)
        if self.kind == "dp-sgd":
            return sgd_update(params, g_hat, rate), state
        if state is None:
            state = AdamState.zeros(params)
        hyper = AdamHyper(learning_rate=rate, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
        return dp_adam_update(params, state, g_hat, hyper)
