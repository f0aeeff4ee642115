"""Parameter updates. Both rules are pure: they return new objects."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .nn import GradientSet, Network


def sgd_step(net: Network, grad: GradientSet, lr: float) -> Network:
    return net.with_arrays([p - lr * g for p, g in zip(net.arrays(), grad.arrays())])


@dataclass(frozen=True)
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: tuple = ()
    v: tuple = ()

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")


def init_state(net: Network, kind: str = "adam", learning_rate: float = 1e-3, **kw) -> OptimizerState:
    zeros = tuple(np.zeros_like(a) for a in net.arrays()) if kind == "adam" else ()
    return OptimizerState(kind=kind, learning_rate=learning_rate, m=zeros, v=zeros, **kw)


def adam_step(net: Network, grad: GradientSet, state: OptimizerState) -> tuple[Network, OptimizerState]:
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    params, m_new, v_new = [], [], []
    for p, g, m, v in zip(net.arrays(), grad.arrays(), state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
        m_new.append(m)
        v_new.append(v)
    return net.with_arrays(params), replace(state, step=t, m=tuple(m_new), v=tuple(v_new))


def apply_update(net: Network, grad: GradientSet, state: OptimizerState) -> tuple[Network, OptimizerState]:
    if state.kind == "sgd":
        return sgd_step(net, grad, state.learning_rate), replace(state, step=state.step + 1)
    return adam_step(net, grad, state)
