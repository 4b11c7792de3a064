"""Central finite-difference gradients for verifying analytic backward passes.

The numeric side only ever calls the forward loss function, so it stays
independent of the hand-derived backward code it is used to check.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .optim import ParamStore


def numeric_gradients(loss_fn: Callable[[], float], store: ParamStore,
                      eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Perturb every parameter element in place and difference the loss."""
    out: dict[str, np.ndarray] = {}
    for name, p in store.params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            hi = loss_fn()
            flat[idx] = orig - eps
            lo = loss_fn()
            flat[idx] = orig
            gflat[idx] = (hi - lo) / (2.0 * eps)
        out[name] = g
    return out


def max_relative_error(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray],
                       floor: float = 1e-6) -> float:
    """Worst elementwise |a - n| / max(|a|, |n|, floor) across all parameters.

    The floor keeps near-zero gradient pairs from registering as huge
    relative errors due to finite-difference noise.
    """
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
