"""Self-contained differentiable primitives: dense float64 matrices,
activations, an LSTM cell with hand-derived backward, dropout, softmax
cross-entropy, and Adam.

Forward passes over fixed parameters are safe to call concurrently; training
mutates parameters in place and needs exclusive ownership of the store.
"""

from .gradcheck import max_relative_error, numeric_gradients
from .lstm import (
    LstmCellParams,
    embed_backward,
    embed_forward,
    lstm_cell_backward,
    lstm_cell_forward,
    run_stack_backward,
    run_stack_forward,
)
from .ops import (
    as_matrix,
    cross_entropy,
    dropout_mask,
    matmul,
    relu,
    sigmoid,
    softmax_row,
    softmax_rows,
    softmax_xent_rows,
    tanh_act,
)
from .optim import AdamState, ParamStore, adam_step, uniform_init

__all__ = [
    "AdamState",
    "LstmCellParams",
    "ParamStore",
    "adam_step",
    "as_matrix",
    "cross_entropy",
    "dropout_mask",
    "embed_backward",
    "embed_forward",
    "lstm_cell_backward",
    "lstm_cell_forward",
    "matmul",
    "max_relative_error",
    "numeric_gradients",
    "relu",
    "run_stack_backward",
    "run_stack_forward",
    "sigmoid",
    "softmax_row",
    "softmax_rows",
    "softmax_xent_rows",
    "tanh_act",
    "uniform_init",
]
