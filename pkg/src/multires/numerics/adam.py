"""Bias-corrected Adam with classic L2 weight decay.

Weight decay is folded into the gradient before the moment updates
(not decoupled), so decay influences both moment estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from multires.errors import ConfigError, ShapeError


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 1e-3

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1):
            raise ConfigError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")


@dataclass
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(step=0, m=np.zeros_like(param), v=np.zeros_like(param))


def adam_step(
    param: np.ndarray, grad: np.ndarray, state: AdamState, cfg: AdamConfig
) -> tuple[np.ndarray, AdamState]:
    """One update; returns (new_param, new_state) without mutating inputs."""
    if param.shape != grad.shape or param.shape != state.m.shape or param.shape != state.v.shape:
        raise ShapeError(
            f"param {param.shape}, grad {grad.shape}, state {state.m.shape} shapes disagree"
        )
    g = grad + cfg.weight_decay * param if cfg.weight_decay != 0 else grad
    step = state.step + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * (g * g)
    m_hat = m / (1 - cfg.beta1 ** step)
    v_hat = v / (1 - cfg.beta2 ** step)
    new_param = param - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return new_param, AdamState(step=step, m=m, v=v)
