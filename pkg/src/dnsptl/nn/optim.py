"""Adam with bias correction; frozen parameters are skipped."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Parameter


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = 0.99
    beta2: float = 0.999
    epsilon: float = 1e-8
    learning_rate: float = 1e-4

    @classmethod
    def for_parameter(cls, param: Parameter, **kw) -> "AdamState":
        return cls(m=np.zeros_like(param.value), v=np.zeros_like(param.value), **kw)


def adam_step(param: Parameter, state: AdamState) -> tuple[Parameter, AdamState]:
    """One in-place update of ``param`` from ``param.grad``."""
    if param.frozen:
        return param, state
    g = param.grad
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * g
    state.v *= b2
    state.v += (1.0 - b2) * (g * g)
    m_hat = state.m / (1.0 - b1 ** t)
    v_hat = state.v / (1.0 - b2 ** t)
    param.value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return param, state


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.99, beta2=0.999, epsilon=1e-8):
        self.params = list(params)
        self.states = [
            AdamState.for_parameter(p, beta1=beta1, beta2=beta2, epsilon=epsilon, learning_rate=lr)
            for p in self.params
        ]

    def step(self):
        for p, s in zip(self.params, self.states):
            adam_step(p, s)
