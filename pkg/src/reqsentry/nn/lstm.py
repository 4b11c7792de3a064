"""LSTM cell, stacked-sequence runner, and hand-derived backward passes.

The cell follows the classic gate formulation: input/forget/output gates are
logistic, the candidate is tanh, ``c_t = f*c_prev + i*g`` and
``h_t = o*tanh(c_t)``.  The sequence runner unrolls a stack of cells over
time-major inputs with a per-step activity mask, so padded positions carry
state through unchanged and contribute nothing to gradients.

Everything here is functional: forward passes return an explicit cache and
the backward passes consume it, accumulating into caller-owned gradient
arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import dropout_mask, sigmoid
from .optim import ParamStore, uniform_init

GATES = ("i", "f", "o", "g")


@dataclass
class LstmCellParams:
    """Per-gate weights of one cell.

    ``w_*`` map the step input (hidden_size x input_size), ``u_*`` map the
    previous hidden state (hidden_size x hidden_size), ``b_*`` are column
    biases (hidden_size x 1).
    """

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    u_i: np.ndarray
    u_f: np.ndarray
    u_o: np.ndarray
    u_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray
    input_size: int
    hidden_size: int

    FIELDS = ("w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g",
              "b_i", "b_f", "b_o", "b_g")

    @classmethod
    def init(cls, rng: np.random.Generator, input_size: int, hidden_size: int) -> "LstmCellParams":
        arrs = {}
        for gate in GATES:
            arrs[f"w_{gate}"] = uniform_init(rng, (hidden_size, input_size), input_size)
            arrs[f"u_{gate}"] = uniform_init(rng, (hidden_size, hidden_size), hidden_size)
            arrs[f"b_{gate}"] = uniform_init(rng, (hidden_size, 1), input_size)
        return cls(input_size=input_size, hidden_size=hidden_size, **arrs)

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LstmCellParams":
        arrs = {}
        for gate in GATES:
            arrs[f"w_{gate}"] = np.zeros((hidden_size, input_size))
            arrs[f"u_{gate}"] = np.zeros((hidden_size, hidden_size))
            arrs[f"b_{gate}"] = np.zeros((hidden_size, 1))
        return cls(input_size=input_size, hidden_size=hidden_size, **arrs)

    def register(self, store: ParamStore, prefix: str) -> None:
        for name in self.FIELDS:
            store.add(f"{prefix}.{name}", getattr(self, name))
            setattr(self, name, store.params[f"{prefix}.{name}"])

    @classmethod
    def view(cls, arrays: dict[str, np.ndarray], prefix: str,
             input_size: int, hidden_size: int) -> "LstmCellParams":
        """Wrap store-owned arrays (params or grads) under ``prefix``."""
        return cls(input_size=input_size, hidden_size=hidden_size,
                   **{name: arrays[f"{prefix}.{name}"] for name in cls.FIELDS})


def _check_dims(x: np.ndarray, h: np.ndarray, c: np.ndarray, p: LstmCellParams) -> None:
    if x.shape[-1] != p.input_size:
        raise ValueError(f"input width {x.shape[-1]} != cell input_size {p.input_size}")
    if h.shape[-1] != p.hidden_size or c.shape[-1] != p.hidden_size:
        raise ValueError(
            f"state widths {h.shape[-1]}/{c.shape[-1]} != cell hidden_size {p.hidden_size}")


def lstm_cell_forward(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                      p: LstmCellParams) -> tuple[np.ndarray, np.ndarray, dict]:
    """One LSTM step.  Inputs may be 1-D vectors or (batch, dim) matrices."""
    squeeze = np.asarray(x_t).ndim == 1
    x = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    h = np.atleast_2d(np.asarray(h_prev, dtype=np.float64))
    c = np.atleast_2d(np.asarray(c_prev, dtype=np.float64))
    _check_dims(x, h, c, p)

    pre_i = x @ p.w_i.T + h @ p.u_i.T + p.b_i.T
    pre_f = x @ p.w_f.T + h @ p.u_f.T + p.b_f.T
    pre_o = x @ p.w_o.T + h @ p.u_o.T + p.b_o.T
    pre_g = x @ p.w_g.T + h @ p.u_g.T + p.b_g.T

    i = sigmoid(pre_i)
    f = sigmoid(pre_f)
    o = sigmoid(pre_o)
    g = np.tanh(pre_g)
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    cache = {"x": x, "h_prev": h, "c_prev": c, "i": i, "f": f, "o": o, "g": g, "tc": tc}
    if squeeze:
        return h_new[0], c_new[0], cache
    return h_new, c_new, cache


def lstm_cell_backward(p: LstmCellParams, grads: LstmCellParams, cache: dict,
                       dh: np.ndarray, dc: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backprop one step; accumulates into ``grads`` and returns (dx, dh_prev, dc_prev)."""
    if cache is None or "x" not in cache:
        raise RuntimeError("lstm backward called without a forward cache")
    x, h_prev, c_prev = cache["x"], cache["h_prev"], cache["c_prev"]
    i, f, o, g, tc = cache["i"], cache["f"], cache["o"], cache["g"], cache["tc"]

    dh = np.atleast_2d(dh)
    dc = np.atleast_2d(dc)
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    di = dc_total * g
    dg = dc_total * i
    df = dc_total * c_prev
    dc_prev = dc_total * f

    dpre_i = di * i * (1.0 - i)
    dpre_f = df * f * (1.0 - f)
    dpre_o = do * o * (1.0 - o)
    dpre_g = dg * (1.0 - g * g)

    for dpre, gate in ((dpre_i, "i"), (dpre_f, "f"), (dpre_o, "o"), (dpre_g, "g")):
        getattr(grads, f"w_{gate}")[...] += dpre.T @ x
        getattr(grads, f"u_{gate}")[...] += dpre.T @ h_prev
        getattr(grads, f"b_{gate}")[...] += dpre.sum(axis=0)[:, None]

    dx = dpre_i @ p.w_i + dpre_f @ p.w_f + dpre_o @ p.w_o + dpre_g @ p.w_g
    dh_prev = dpre_i @ p.u_i + dpre_f @ p.u_f + dpre_o @ p.u_o + dpre_g @ p.u_g
    return dx, dh_prev, dc_prev


def embed_forward(embedding: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Look up (T, B) int ids in a (vocab, embed) table -> (T, B, embed)."""
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= embedding.shape[0]:
        raise ValueError(
            f"token id out of range for vocabulary of size {embedding.shape[0]}")
    return embedding[ids]


def embed_backward(d_embedding: np.ndarray, ids: np.ndarray, d_xs: np.ndarray) -> None:
    np.add.at(d_embedding, ids.ravel(), d_xs.reshape(-1, d_xs.shape[-1]))


def run_stack_forward(layers: list[LstmCellParams], xs: np.ndarray, mask: np.ndarray,
                      h0: list[np.ndarray] | None = None,
                      c0: list[np.ndarray] | None = None,
                      dropout_rate: float = 0.0,
                      dropout_after_last: bool = False,
                      training: bool = False,
                      rng: np.random.Generator | None = None):
    """Unroll a stack of LSTM layers over time-major inputs.

    xs: (T, B, input_size); mask: (T, B) with 1.0 at active steps.  Inactive
    steps carry h/c through unchanged, so the state after step T equals the
    state at each sequence's true length.

    Returns (top_out (T, B, H), final_h, final_c, cache); ``top_out`` has the
    top boundary dropout already applied when ``dropout_after_last`` is set.
    """
    T, B, _ = xs.shape
    L = len(layers)
    H = layers[0].hidden_size
    use_dropout = training and dropout_rate > 0.0
    if use_dropout and rng is None:
        raise ValueError("training-mode dropout needs an rng")

    h = [np.zeros((B, H)) if h0 is None else np.array(h0[l]) for l in range(L)]
    c = [np.zeros((B, H)) if c0 is None else np.array(c0[l]) for l in range(L)]
    top_out = np.empty((T, B, H))
    step_caches: list[list[dict]] = []
    drop_masks: list[list[np.ndarray | None]] = []

    for t in range(T):
        m = mask[t][:, None]
        inp = xs[t]
        caches_t: list[dict] = []
        drops_t: list[np.ndarray | None] = []
        for l, layer in enumerate(layers):
            h_new, c_new, cache = lstm_cell_forward(inp, h[l], c[l], layer)
            h[l] = m * h_new + (1.0 - m) * h[l]
            c[l] = m * c_new + (1.0 - m) * c[l]
            caches_t.append(cache)
            boundary_dropped = use_dropout and (l < L - 1 or dropout_after_last)
            if boundary_dropped:
                dm = dropout_mask((B, H), dropout_rate, rng)
                drops_t.append(dm)
                out = h[l] * dm
            else:
                drops_t.append(None)
                out = h[l]
            inp = out
        top_out[t] = inp
        step_caches.append(caches_t)
        drop_masks.append(drops_t)

    cache = {"steps": step_caches, "drops": drop_masks, "mask": mask,
             "n_layers": L, "input_size": layers[0].input_size}
    return top_out, h, c, cache


def run_stack_backward(layers: list[LstmCellParams], grads: list[LstmCellParams],
                       cache: dict, d_top: np.ndarray,
                       d_final_h: list[np.ndarray] | None = None,
                       d_final_c: list[np.ndarray] | None = None):
    """Reverse the stack unroll; returns (d_xs, d_h0, d_c0)."""
    if not cache or "steps" not in cache or not cache["steps"]:
        raise RuntimeError("stack backward called without a forward cache")
    mask = cache["mask"]
    steps = cache["steps"]
    drops = cache["drops"]
    L = cache["n_layers"]
    T, B, H = d_top.shape

    dh_time = [np.zeros((B, H)) if d_final_h is None else np.array(d_final_h[l])
               for l in range(L)]
    dc_time = [np.zeros((B, H)) if d_final_c is None else np.array(d_final_c[l])
               for l in range(L)]
    d_xs = np.empty((T, B, cache["input_size"]))

    for t in range(T - 1, -1, -1):
        m = mask[t][:, None]
        d_from_above: np.ndarray | None = None
        for l in range(L - 1, -1, -1):
            extra = d_top[t] if l == L - 1 else d_from_above
            if drops[t][l] is not None:
                extra = extra * drops[t][l]
            dh_t = dh_time[l] + extra
            dc_t = dc_time[l]
            dx, dh_prev, dc_prev = lstm_cell_backward(
                layers[l], grads[l], steps[t][l], dh_t * m, dc_t * m)
            dh_time[l] = dh_t * (1.0 - m) + dh_prev
            dc_time[l] = dc_t * (1.0 - m) + dc_prev
            d_from_above = dx
        d_xs[t] = d_from_above
    return d_xs, dh_time, dc_time
