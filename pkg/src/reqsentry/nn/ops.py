"""Dense float64 numeric primitives shared by every model in the package.

All values are plain 2-D (or 1-D where noted) C-ordered ``numpy.float64``
arrays.  Operations are pure functions: finite inputs always produce finite
outputs, and identical inputs produce bit-identical results, which is what
makes the finite-difference gradient checks in the test suite tight.
"""

from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-12


def as_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce to a float64 2-D array, optionally checking its shape."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValueError(f"expected {cols} cols, got {m.shape[1]}")
    return np.ascontiguousarray(m)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check naming both operands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply shapes {a.shape} x {b.shape}")
    return a @ b


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, overflow-safe for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh_act(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def softmax_row(logits: np.ndarray) -> np.ndarray:
    """Stable softmax of a single row (max-subtraction before exponentiation)."""
    z = np.asarray(logits, dtype=np.float64).ravel()
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax of a (batch, classes) matrix."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, target: int) -> float:
    """Negative log-likelihood of ``target`` under a probability row.

    The picked probability is floored at ``PROB_FLOOR`` before the log so a
    confidently wrong model yields a large finite loss, never an infinity.
    """
    p = np.asarray(probs, dtype=np.float64).ravel()
    if not 0 <= target < p.size:
        raise ValueError(f"target {target} out of range for {p.size} classes")
    return float(-np.log(max(p[target], PROB_FLOOR)))


def softmax_xent_rows(logits: np.ndarray, targets: np.ndarray,
                      weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted softmax cross-entropy over rows, with its analytic gradient.

    ``targets`` holds one class index per row and ``weights`` one multiplier
    per row (zero weight excludes a row entirely, e.g. padded positions).
    Returns the weighted loss sum and d(loss)/d(logits).
    """
    probs = softmax_rows(logits)
    n = logits.shape[0]
    picked = probs[np.arange(n), targets]
    loss = float(np.sum(weights * -np.log(np.maximum(picked, PROB_FLOOR))))
    dlogits = probs * weights[:, None]
    dlogits[np.arange(n), targets] -= weights
    return loss, dlogits


def dropout_mask(shape: tuple[int, ...], drop_rate: float, seed) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``drop_rate``, else 1/(1-rate).

    ``seed`` may be an int or a ``numpy.random.Generator``; the same seed
    always yields the same mask.  Rates at or above 1 are rejected (the mask
    would zero everything with no rescale defined).
    """
    if not 0.0 <= drop_rate < 1.0:
        raise ValueError(f"drop_rate must be in [0, 1), got {drop_rate}")
    if drop_rate == 0.0:
        return np.ones(shape, dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = rng.random(shape) >= drop_rate
    return keep.astype(np.float64) / (1.0 - drop_rate)
