"""Supervised LSTM classifier assigning anomalous requests to attack classes.

The stack reads a canonical request character by character; the final-step
hidden state of the top layer feeds a 7-way projection.  Every LSTM layer is
followed by a dropout layer (active in training only).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .codec import EncodedSequence, Vocabulary, encode
from .detector import DetectorConfig
from .nn import (
    AdamState,
    LstmCellParams,
    ParamStore,
    adam_step,
    embed_backward,
    embed_forward,
    run_stack_backward,
    run_stack_forward,
    softmax_rows,
    softmax_xent_rows,
    uniform_init,
)


class AttackClass(IntEnum):
    """The seven attack categories, with stable codes 0-6."""

    OsCommanding = 0
    PathTraversal = 1
    SqlInjection = 2
    XPathInjection = 3
    LdapInjection = 4
    Ssi = 5
    Xss = 6


NUM_CLASSES = len(AttackClass)


@dataclass(frozen=True)
class LabeledExample:
    canonical: str
    label: AttackClass


class ClassifierModel:
    """Embedding, LSTM stack with per-layer dropout, and a 7-way projection."""

    def __init__(self, vocab: Vocabulary, config: DetectorConfig,
                 params: dict[str, np.ndarray] | None = None):
        self.vocab = vocab
        self.config = config
        self.store = ParamStore()
        V, E, H, L = vocab.size, config.embed_size, config.hidden_size, config.num_layers
        rng = np.random.default_rng(config.seed)

        def take(name: str, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
            fresh = uniform_init(rng, shape, fan_in)
            if params is not None:
                got = np.asarray(params[name], dtype=np.float64)
                if got.shape != shape:
                    raise ValueError(f"parameter {name} has shape {got.shape}, expected {shape}")
                return self.store.add(name, got)
            return self.store.add(name, fresh)

        take("embedding", (V, E), E)
        self.layers: list[LstmCellParams] = []
        for l in range(L):
            d = E if l == 0 else H
            for gate in ("i", "f", "o", "g"):
                take(f"layer{l}.w_{gate}", (H, d), d)
                take(f"layer{l}.u_{gate}", (H, H), H)
                take(f"layer{l}.b_{gate}", (H, 1), d)
            self.layers.append(LstmCellParams.view(self.store.params, f"layer{l}", d, H))
        take("out.w", (NUM_CLASSES, H), H)
        take("out.b", (NUM_CLASSES, 1), H)

    def grad_views(self) -> list[LstmCellParams]:
        E, H = self.config.embed_size, self.config.hidden_size
        return [LstmCellParams.view(self.store.grads, f"layer{l}",
                                    E if l == 0 else H, H)
                for l in range(self.config.num_layers)]


def _final_hidden(model: ClassifierModel, seqs: list[EncodedSequence],
                  training: bool, rng: np.random.Generator | None):
    """Run the stack and return the (B, H) final top-layer state plus caches."""
    lengths = np.array([s.true_length for s in seqs])
    T = int(lengths.max())
    ids = np.stack([s.ids[:T] for s in seqs], axis=1)
    mask = (np.arange(T)[:, None] < lengths[None, :]).astype(np.float64)
    xs = embed_forward(model.store.params["embedding"], ids)
    top, final_h, _, cache = run_stack_forward(
        model.layers, xs, mask, dropout_rate=model.config.dropout_rate,
        dropout_after_last=True, training=training, rng=rng)
    return ids, mask, final_h[-1], cache


def classifier_logits(model: ClassifierModel, seqs: list[EncodedSequence],
                      training: bool = False,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    _, _, h_final, _ = _final_hidden(model, seqs, training, rng)
    w = model.store.params["out.w"]
    b = model.store.params["out.b"]
    return h_final @ w.T + b.ravel()


def _train_step(model: ClassifierModel, seqs: list[EncodedSequence],
                labels: np.ndarray, example_weights: np.ndarray,
                rng: np.random.Generator) -> float:
    ids, mask, h_final, cache = _final_hidden(model, seqs, training=True, rng=rng)
    w = model.store.params["out.w"]
    logits = h_final @ w.T + model.store.params["out.b"].ravel()

    weights = example_weights / example_weights.sum()
    loss, dlogits = softmax_xent_rows(logits, labels, weights)

    grads = model.store.grads
    grads["out.w"] += dlogits.T @ h_final
    grads["out.b"] += dlogits.sum(axis=0)[:, None]
    d_final = dlogits @ w

    T, B = ids.shape
    H = model.config.hidden_size
    L = model.config.num_layers
    d_final_h = [np.zeros((B, H)) for _ in range(L - 1)] + [d_final]
    d_xs, _, _ = run_stack_backward(model.layers, model.grad_views(), cache,
                                    np.zeros((T, B, H)), d_final_h=d_final_h)
    embed_backward(grads["embedding"], ids, d_xs)
    return loss


@dataclass
class TrainedClassifier:
    model: ClassifierModel
    epoch_losses: list[float]


def train_classifier(data: list[LabeledExample], vocab: Vocabulary,
                     config: DetectorConfig,
                     class_weights: dict[AttackClass, float] | None = None) -> TrainedClassifier:
    """Mini-batch Adam on softmax cross-entropy over final-step states.

    ``class_weights`` optionally reweights examples per class (default:
    uniform).  Shuffling is seeded; identical seed and data give identical
    weights.
    """
    if not data:
        raise ValueError("training data is empty")
    rng = np.random.default_rng(config.seed)
    model = ClassifierModel(vocab, config)
    adam = AdamState.for_store(model.store, learning_rate=config.learning_rate)

    seqs = [encode(vocab, ex.canonical, config.max_len) for ex in data]
    labels = np.array([int(ex.label) for ex in data])
    weights = np.array([
        class_weights.get(ex.label, 1.0) if class_weights else 1.0 for ex in data])

    epoch_losses: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(seqs))
        total = 0.0
        count = 0
        for start in range(0, len(order), config.batch_size):
            pick = order[start:start + config.batch_size]
            model.store.zero_grads()
            loss = _train_step(model, [seqs[i] for i in pick], labels[pick],
                               weights[pick], rng)
            model.store.clip_global_norm(config.grad_clip)
            adam_step(model.store, adam)
            total += loss * len(pick)
            count += len(pick)
        epoch_losses.append(total / count)
    return TrainedClassifier(model=model, epoch_losses=epoch_losses)


def predict(model: ClassifierModel, canonical: str) -> tuple[AttackClass, np.ndarray]:
    """Class distribution for one canonical request; argmax wins, lowest
    class code on exact ties."""
    seq = encode(model.vocab, canonical, model.config.max_len)
    logits = classifier_logits(model, [seq], training=False)
    probs = softmax_rows(logits)[0]
    return AttackClass(int(np.argmax(probs))), probs


def evaluate_classifier(model: ClassifierModel,
                        data: list[LabeledExample]) -> tuple[float, np.ndarray]:
    """Accuracy and a 7x7 confusion matrix (rows = true, cols = predicted)."""
    if not data:
        raise ValueError("evaluation data is empty")
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for ex in data:
        predicted, _ = predict(model, ex.canonical)
        confusion[int(ex.label), int(predicted)] += 1
    accuracy = float(np.trace(confusion)) / len(data)
    return accuracy, confusion
