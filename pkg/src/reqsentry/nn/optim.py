"""Parameter bookkeeping and the Adam update rule.

A ``ParamStore`` owns every trained array of a model under a stable dotted
name, plus a same-shaped gradient slot per parameter.  Training loops mutate
parameters in place, so any view handed out (e.g. the per-gate matrices of an
LSTM cell) stays live across optimizer steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ParamStore:
    """Named parameters with matching gradient slots.

    Names are unique and stable; iteration order is insertion order, which
    keeps serialization layouts reproducible.
    """

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.ascontiguousarray(np.asarray(value, dtype=np.float64))
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def global_grad_norm(self) -> float:
        total = 0.0
        for g in self.grads.values():
            total += float(np.sum(g * g))
        return math.sqrt(total)

    def clip_global_norm(self, max_norm: float) -> float:
        """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
        norm = self.global_grad_norm()
        if norm > max_norm and norm > 0.0:
            scale = max_norm / norm
            for g in self.grads.values():
                g *= scale
        return norm


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; seeded and reproducible."""
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class AdamState:
    """First/second moment accumulators for one ParamStore."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_store(cls, store: ParamStore, learning_rate: float = 1e-3,
                  beta1: float = 0.9, beta2: float = 0.999,
                  epsilon: float = 1e-8) -> "AdamState":
        state = cls(learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                    epsilon=epsilon)
        for name, p in store.params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(store: ParamStore, state: AdamState) -> None:
    """One bias-corrected Adam update, in place, from the store's gradients."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in store.params.items():
        g = store.grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
