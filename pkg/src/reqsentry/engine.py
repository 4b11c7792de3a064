"""End-to-end orchestration: ingest, detect, route, persist, stream.

Every input produces exactly one verdict.  Normal requests are appended to
the retrain store; anomalous ones are handed to the classifier when one is
loaded.  Requests that cannot be parsed fail closed: they come back
anomalous with an infinite loss and an explanatory note rather than being
dropped.

A serve session owns its retrain store exclusively; loaded bundles are
immutable, so scoring may be shared across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO

from .bundle import EngineBundle
from .classifier import AttackClass, LabeledExample, predict, train_classifier
from .codec import RequestParseError, build_vocab, canonicalize, encode, parse_http
from .corpus import RetrainStore, iter_records
from .detector import (
    Decision,
    DetectorConfig,
    detect,
    fit_threshold,
    score_sequences,
    train_detector,
)
from .evaluation import auc, confusion_from_scores, rates, roc_curve

DIGEST_CHARS = 64


@dataclass(frozen=True)
class Verdict:
    digest: str
    loss: float
    theta: float
    decision: Decision
    attack_class: str | None
    distribution: tuple[float, ...] | None
    timestamp: str
    note: str | None = None

    def to_json(self) -> str:
        record = {
            "digest": self.digest,
            "loss": self.loss,
            "theta": self.theta,
            "decision": self.decision.value,
            "attack_class": self.attack_class,
            "distribution": list(self.distribution) if self.distribution else None,
            "timestamp": self.timestamp,
        }
        if self.note is not None:
            record["note"] = self.note
        return json.dumps(record)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def process_request(bundle: EngineBundle, raw: str,
                    store: RetrainStore | None = None) -> Verdict:
    """Parse, canonicalize, and score one raw request.

    Normal verdicts append the canonical text to ``store`` when given;
    anomalous verdicts carry the 7-way class distribution when a classifier
    is loaded.  Unparseable input yields a fail-closed anomalous verdict.
    """
    try:
        canonical = canonicalize(parse_http(raw), bundle.detector.config.max_len)
    except RequestParseError as exc:
        return Verdict(digest=raw[:DIGEST_CHARS], loss=float("inf"),
                       theta=bundle.threshold.theta, decision=Decision.ANOMALOUS,
                       attack_class=None, distribution=None, timestamp=_now(),
                       note=f"parse error: {exc}")

    result = detect(bundle.detector, bundle.threshold, canonical)
    attack_class = None
    distribution = None
    if result.decision is Decision.NORMAL:
        if store is not None:
            store.append(canonical)
    elif bundle.classifier is not None:
        cls, probs = predict(bundle.classifier, canonical)
        attack_class = cls.name
        distribution = tuple(float(p) for p in probs)
    return Verdict(digest=canonical[:DIGEST_CHARS], loss=result.loss,
                   theta=bundle.threshold.theta, decision=result.decision,
                   attack_class=attack_class, distribution=distribution,
                   timestamp=_now())


def serve_stream(bundle: EngineBundle, input_stream: IO[str],
                 output_stream: IO[str],
                 store: RetrainStore | None = None) -> int:
    """One verdict JSON line per record, in input order; never drops input."""
    count = 0
    for record in iter_records(input_stream):
        verdict = process_request(bundle, record, store=store)
        output_stream.write(verdict.to_json() + "\n")
        output_stream.flush()
        count += 1
    return count


def canonicalize_corpus(raws: list[str], max_chars: int) -> tuple[list[str], int]:
    """Canonical texts of every parseable request, plus the skipped count."""
    out: list[str] = []
    skipped = 0
    for raw in raws:
        try:
            out.append(canonicalize(parse_http(raw), max_chars))
        except RequestParseError:
            skipped += 1
    return out, skipped


def train_bundle(raw_requests: list[str], config: DetectorConfig,
                 quantile: float = 0.995, min_count: int = 1) -> tuple[EngineBundle, dict]:
    """Full training path: canonicalize, build vocabulary, train, calibrate.

    The threshold is fit on the training split's held-out losses; tiny
    corpora without a holdout fall back to the training losses themselves.
    """
    canonicals, skipped = canonicalize_corpus(raw_requests, config.max_len)
    if not canonicals:
        raise ValueError("no parseable requests in the training corpus")
    vocab = build_vocab(canonicals, min_count=min_count)
    sequences = [encode(vocab, c, config.max_len) for c in canonicals]
    trained = train_detector(sequences, vocab, config)
    calibration = trained.holdout if trained.holdout else sequences
    losses = score_sequences(trained.model, calibration)
    threshold = fit_threshold(losses, quantile)
    info = {
        "requests": len(canonicals),
        "skipped": skipped,
        "vocab_size": vocab.size,
        "epochs": config.epochs,
        "first_epoch_loss": trained.epoch_losses[0],
        "final_epoch_loss": trained.epoch_losses[-1],
        "calibration_size": threshold.calibration_size,
        "theta": threshold.theta,
    }
    return EngineBundle(vocab=vocab, detector=trained.model,
                        threshold=threshold), info


def attach_classifier(bundle: EngineBundle, labeled_raws: list[tuple[str, str]],
                      config: DetectorConfig) -> dict:
    """Train the attack classifier over the bundle's vocabulary and attach it.

    ``labeled_raws`` pairs attack-class names with raw request texts.
    """
    examples = []
    skipped = 0
    for name, raw in labeled_raws:
        try:
            canonical = canonicalize(parse_http(raw), config.max_len)
        except RequestParseError:
            skipped += 1
            continue
        examples.append(LabeledExample(canonical=canonical, label=AttackClass[name]))
    if not examples:
        raise ValueError("no parseable labeled requests")
    trained = train_classifier(examples, bundle.vocab, config)
    bundle.classifier = trained.model
    return {
        "examples": len(examples),
        "skipped": skipped,
        "first_epoch_loss": trained.epoch_losses[0],
        "final_epoch_loss": trained.epoch_losses[-1],
    }


def recalibrate(bundle: EngineBundle, benign_raws: list[str], quantile: float) -> dict:
    """Refit theta from a benign corpus without touching the weights."""
    canonicals, skipped = canonicalize_corpus(benign_raws, bundle.detector.config.max_len)
    if not canonicals:
        raise ValueError("no parseable requests in the calibration corpus")
    seqs = [encode(bundle.vocab, c, bundle.detector.config.max_len) for c in canonicals]
    losses = score_sequences(bundle.detector, seqs)
    bundle.threshold = fit_threshold(losses, quantile)
    return {"calibration_size": len(losses), "skipped": skipped,
            "theta": bundle.threshold.theta}


def evaluate_bundle(bundle: EngineBundle, benign_raws: list[str],
                    attack_raws: list[str]) -> dict:
    """Detection metrics at the bundle's theta plus the full-sweep AUC."""
    cfg = bundle.detector.config
    benign_canon, benign_skipped = canonicalize_corpus(benign_raws, cfg.max_len)
    attack_canon, attack_skipped = canonicalize_corpus(attack_raws, cfg.max_len)
    if not benign_canon or not attack_canon:
        raise ValueError("evaluation needs parseable benign and attack requests")

    benign_losses = score_sequences(
        bundle.detector, [encode(bundle.vocab, c, cfg.max_len) for c in benign_canon])
    attack_losses = score_sequences(
        bundle.detector, [encode(bundle.vocab, c, cfg.max_len) for c in attack_canon])
    scores = benign_losses + attack_losses
    labels = [False] * len(benign_losses) + [True] * len(attack_losses)

    confusion = confusion_from_scores(scores, labels, bundle.threshold.theta)
    r = rates(confusion)
    curve = roc_curve(scores, labels)
    return {
        "benign": len(benign_losses), "attacks": len(attack_losses),
        "skipped": benign_skipped + attack_skipped,
        "theta": bundle.threshold.theta,
        "tp": confusion.tp, "fp": confusion.fp,
        "tn": confusion.tn, "fn": confusion.fn,
        "tpr": r.tpr, "fpr": r.fpr,
        "precision": r.precision, "recall": r.recall,
        "auc": auc(curve),
    }


def retrain_from_store(bundle: EngineBundle, store: RetrainStore) -> tuple[EngineBundle, dict]:
    """Retrain the detector from scratch on the store's canonical requests.

    The existing vocabulary is reused so an attached classifier stays
    compatible; characters the store introduces map to UNK.
    """
    canonicals = store.load()
    if not canonicals:
        raise ValueError("retrain store is empty")
    cfg = bundle.detector.config
    sequences = [encode(bundle.vocab, c, cfg.max_len) for c in canonicals]
    trained = train_detector(sequences, bundle.vocab, cfg)
    calibration = trained.holdout if trained.holdout else sequences
    losses = score_sequences(trained.model, calibration)
    threshold = fit_threshold(losses, bundle.threshold.quantile)
    fresh = EngineBundle(vocab=bundle.vocab, detector=trained.model,
                         threshold=threshold, classifier=bundle.classifier)
    info = {"requests": len(canonicals), "theta": threshold.theta,
            "final_epoch_loss": trained.epoch_losses[-1]}
    return fresh, info
