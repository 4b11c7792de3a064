"""Sequence-to-sequence LSTM autoencoder over encoded requests.

The encoder stack reads a request's character ids and hands its final hidden
and cell states to a decoder stack, which is teacher-forced to reproduce the
same ids.  The per-request anomaly score is the mean per-position
cross-entropy of that reproduction; a request whose score exceeds the
calibrated threshold is anomalous.

A trained model is immutable for scoring, so concurrent ``detect`` calls are
safe; training requires exclusive ownership.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .codec import EOS_ID, SOS_ID, EncodedSequence, Vocabulary, encode
from .nn import (
    AdamState,
    LstmCellParams,
    ParamStore,
    adam_step,
    embed_backward,
    embed_forward,
    run_stack_backward,
    run_stack_forward,
    softmax_xent_rows,
    uniform_init,
)


@dataclass(frozen=True)
class DetectorConfig:
    batch_size: int = 128
    embed_size: int = 64
    hidden_size: int = 64
    num_layers: int = 2
    dropout_rate: float = 0.7
    epochs: int = 10
    learning_rate: float = 1e-3
    max_len: int = 1000
    seed: int = 0
    grad_clip: float = 5.0
    val_fraction: float = 0.1

    def __post_init__(self):
        for name in ("batch_size", "embed_size", "hidden_size", "num_layers",
                     "epochs", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


class Decision(str, Enum):
    NORMAL = "Normal"
    ANOMALOUS = "Anomalous"


@dataclass(frozen=True)
class DetectResult:
    decision: Decision
    loss: float


@dataclass(frozen=True)
class ThresholdModel:
    """Anomaly cutoff: scores strictly above theta are anomalous."""

    theta: float
    quantile: float
    calibration_size: int

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite; fit it from calibration losses")
        if not 0.0 < self.quantile <= 1.0:
            raise ValueError(f"quantile must be in (0, 1], got {self.quantile}")


class DetectorModel:
    """Embedding, encoder stack, decoder stack, and output projection."""

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
        self.encoder: list[LstmCellParams] = []
        self.decoder: list[LstmCellParams] = []
        for stack, attr in (("enc", "encoder"), ("dec", "decoder")):
            for l in range(L):
                d = E if l == 0 else H
                for gate in ("i", "f", "o", "g"):
                    take(f"{stack}{l}.w_{gate}", (H, d), d)
                    take(f"{stack}{l}.u_{gate}", (H, H), H)
                    take(f"{stack}{l}.b_{gate}", (H, 1), d)
                getattr(self, attr).append(
                    LstmCellParams.view(self.store.params, f"{stack}{l}", d, H))
        take("out.w", (V, H), H)
        take("out.b", (V, 1), H)

    @property
    def embedding(self) -> np.ndarray:
        return self.store.params["embedding"]

    @property
    def out_w(self) -> np.ndarray:
        return self.store.params["out.w"]

    @property
    def out_b(self) -> np.ndarray:
        return self.store.params["out.b"]

    def grad_views(self, stack: str) -> list[LstmCellParams]:
        E, H = self.config.embed_size, self.config.hidden_size
        return [LstmCellParams.view(self.store.grads, f"{stack}{l}",
                                    E if l == 0 else H, H)
                for l in range(self.config.num_layers)]


def _batch_arrays(seqs: list[EncodedSequence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack sequences time-major up to the longest true length in the batch.

    Returns (ids (T, B), mask (T, B), lengths (B,)).
    """
    lengths = np.array([s.true_length for s in seqs], dtype=np.int64)
    T = int(lengths.max())
    ids = np.stack([s.ids[:T] for s in seqs], axis=1)
    mask = (np.arange(T)[:, None] < lengths[None, :]).astype(np.float64)
    return ids, mask, lengths


def _decoder_inputs(ids: np.ndarray) -> np.ndarray:
    """Teacher forcing: the decoder sees SOS then the target shifted right."""
    dec_in = np.empty_like(ids)
    dec_in[0, :] = SOS_ID
    dec_in[1:, :] = ids[:-1, :]
    return dec_in


def _forward(model: DetectorModel, seqs: list[EncodedSequence], training: bool,
             rng: np.random.Generator | None):
    """Run encoder + teacher-forced decoder; returns everything backward needs."""
    cfg = model.config
    ids, mask, lengths = _batch_arrays(seqs)
    T, B = ids.shape

    xs_enc = embed_forward(model.embedding, ids)
    _, enc_h, enc_c, enc_cache = run_stack_forward(
        model.encoder, xs_enc, mask, dropout_rate=cfg.dropout_rate,
        training=training, rng=rng)

    dec_in = _decoder_inputs(ids)
    xs_dec = embed_forward(model.embedding, dec_in)
    top, _, _, dec_cache = run_stack_forward(
        model.decoder, xs_dec, mask, h0=enc_h, c0=enc_c,
        dropout_rate=cfg.dropout_rate, training=training, rng=rng)

    flat = top.reshape(T * B, cfg.hidden_size)
    logits = flat @ model.out_w.T + model.out_b.ravel()
    weights = mask.reshape(-1) / float(mask.sum())
    loss, dlogits = softmax_xent_rows(logits, ids.reshape(-1), weights)
    return loss, {
        "ids": ids, "dec_in": dec_in, "mask": mask, "top_flat": flat,
        "dlogits": dlogits, "enc_cache": enc_cache, "dec_cache": dec_cache,
        "shape": (T, B),
    }


def _backward(model: DetectorModel, ctx: dict) -> None:
    """Accumulate gradients for one forward pass into the model's store."""
    T, B = ctx["shape"]
    H = model.config.hidden_size
    grads = model.store.grads
    dlogits = ctx["dlogits"]

    grads["out.w"] += dlogits.T @ ctx["top_flat"]
    grads["out.b"] += dlogits.sum(axis=0)[:, None]
    d_top = (dlogits @ model.out_w).reshape(T, B, H)

    d_xs_dec, d_h0, d_c0 = run_stack_backward(
        model.decoder, model.grad_views("dec"), ctx["dec_cache"], d_top)
    embed_backward(grads["embedding"], ctx["dec_in"], d_xs_dec)

    d_xs_enc, _, _ = run_stack_backward(
        model.encoder, model.grad_views("enc"), ctx["enc_cache"],
        np.zeros((T, B, H)), d_final_h=d_h0, d_final_c=d_c0)
    embed_backward(grads["embedding"], ctx["ids"], d_xs_enc)


def reconstruction_loss(model: DetectorModel, seq: EncodedSequence,
                        training: bool = False,
                        rng: np.random.Generator | None = None) -> float:
    """Mean per-position cross-entropy of the teacher-forced reconstruction.

    Padding beyond ``true_length`` never enters the computation, and
    inference mode applies no dropout, so repeated calls agree bit-exactly.
    """
    trimmed = EncodedSequence(ids=seq.ids[:seq.true_length], true_length=seq.true_length)
    loss, _ = _forward(model, [trimmed], training=training, rng=rng)
    return loss


def loss_and_gradients(model: DetectorModel, seqs: list[EncodedSequence],
                       training: bool = True,
                       rng: np.random.Generator | None = None) -> float:
    """Forward + full backward for a batch; gradients accumulate in the store."""
    loss, ctx = _forward(model, seqs, training=training, rng=rng)
    _backward(model, ctx)
    return loss


def encode_latent(model: DetectorModel, seq: EncodedSequence) -> np.ndarray:
    """Fixed-length representation: final hidden state of the top encoder layer."""
    ids = seq.ids[:seq.true_length][:, None]
    xs = embed_forward(model.embedding, ids)
    mask = np.ones((seq.true_length, 1))
    _, enc_h, _, _ = run_stack_forward(model.encoder, xs, mask)
    return enc_h[-1][0].copy()


def greedy_decode(model: DetectorModel, seq: EncodedSequence,
                  max_steps: int | None = None) -> str:
    """Free-running decode: feed back the argmax character until EOS."""
    cfg = model.config
    ids = seq.ids[:seq.true_length][:, None]
    xs = embed_forward(model.embedding, ids)
    _, h, c, _ = run_stack_forward(model.encoder, xs, np.ones((seq.true_length, 1)))

    limit = max_steps if max_steps is not None else cfg.max_len
    out_ids: list[int] = []
    token = SOS_ID
    step_mask = np.ones((1, 1))
    for _ in range(limit):
        x = embed_forward(model.embedding, np.array([[token]]))
        top, h, c, _ = run_stack_forward(model.decoder, x, step_mask, h0=h, c0=c)
        logits = top[0] @ model.out_w.T + model.out_b.ravel()
        token = int(np.argmax(logits))
        if token == EOS_ID:
            break
        out_ids.append(token)
    return "".join(model.vocab.char_for(t) for t in out_ids)


@dataclass
class TrainedDetector:
    model: DetectorModel
    epoch_losses: list[float]
    holdout: list[EncodedSequence] = field(default_factory=list)


def train_detector(sequences: list[EncodedSequence], vocab: Vocabulary,
                   config: DetectorConfig) -> TrainedDetector:
    """Mini-batch Adam training on benign sequences.

    The shuffled corpus keeps its last ``val_fraction`` aside for threshold
    calibration; those sequences never contribute weight updates.  Batches
    are built from length-sorted sequences to limit padding waste, and batch
    order is reshuffled each epoch.  Identical seed and corpus give
    bit-identical parameters.
    """
    if not sequences:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(config.seed)
    model = DetectorModel(vocab, config)

    order = rng.permutation(len(sequences))
    shuffled = [sequences[i] for i in order]
    n_holdout = int(len(shuffled) * config.val_fraction)
    holdout = shuffled[len(shuffled) - n_holdout:] if n_holdout else []
    training = shuffled[:len(shuffled) - n_holdout] or shuffled

    by_length = sorted(training, key=lambda s: s.true_length)
    batches = [by_length[i:i + config.batch_size]
               for i in range(0, len(by_length), config.batch_size)]
    adam = AdamState.for_store(model.store, learning_rate=config.learning_rate)

    epoch_losses: list[float] = []
    for _ in range(config.epochs):
        total = 0.0
        weight = 0
        for b in rng.permutation(len(batches)):
            batch = batches[b]
            model.store.zero_grads()
            loss = loss_and_gradients(model, batch, training=True, rng=rng)
            model.store.clip_global_norm(config.grad_clip)
            adam_step(model.store, adam)
            positions = sum(s.true_length for s in batch)
            total += loss * positions
            weight += positions
        epoch_losses.append(total / weight)
    return TrainedDetector(model=model, epoch_losses=epoch_losses, holdout=holdout)


def fit_threshold(benign_losses: list[float], quantile: float = 0.995) -> ThresholdModel:
    """Nearest-rank empirical quantile of calibration losses."""
    if not benign_losses:
        raise ValueError("cannot fit a threshold on zero calibration losses")
    if not 0.0 < quantile <= 1.0:
        raise ValueError(f"quantile must be in (0, 1], got {quantile}")
    ordered = sorted(benign_losses)
    rank = math.ceil(quantile * len(ordered))
    return ThresholdModel(theta=float(ordered[rank - 1]), quantile=quantile,
                          calibration_size=len(ordered))


def detect(model: DetectorModel, threshold: ThresholdModel, canonical: str) -> DetectResult:
    """Score one canonical request; anomalous iff loss strictly exceeds theta."""
    seq = encode(model.vocab, canonical, model.config.max_len)
    loss = reconstruction_loss(model, seq, training=False)
    decision = Decision.ANOMALOUS if loss > threshold.theta else Decision.NORMAL
    return DetectResult(decision=decision, loss=loss)


def score_sequences(model: DetectorModel, seqs: list[EncodedSequence],
                    batch_size: int = 64) -> list[float]:
    """Inference-mode reconstruction loss for each sequence, batched.

    Sequences are bucketed by length to limit padding work; results come
    back in input order and match the single-sequence path to float64
    precision.
    """
    if not seqs:
        return []
    cfg = model.config
    out = np.empty(len(seqs))
    order = sorted(range(len(seqs)), key=lambda i: seqs[i].true_length)
    for start in range(0, len(order), batch_size):
        pick = order[start:start + batch_size]
        batch = [seqs[i] for i in pick]
        ids, mask, lengths = _batch_arrays(batch)
        T, B = ids.shape

        xs_enc = embed_forward(model.embedding, ids)
        _, enc_h, enc_c, _ = run_stack_forward(model.encoder, xs_enc, mask)
        xs_dec = embed_forward(model.embedding, _decoder_inputs(ids))
        top, _, _, _ = run_stack_forward(model.decoder, xs_dec, mask,
                                         h0=enc_h, c0=enc_c)

        logits = top.reshape(T * B, cfg.hidden_size) @ model.out_w.T + model.out_b.ravel()
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        picked = exp[np.arange(T * B), ids.reshape(-1)] / exp.sum(axis=1)
        ce = -np.log(np.maximum(picked, 1e-12)).reshape(T, B)
        out[pick] = (ce * mask).sum(axis=0) / lengths
    return out.tolist()
