"""Command-line entry points.

Subcommands: train-detector, train-classifier, fit-threshold, score, serve,
evaluate, roc, pca-baseline, gen-corpus, retrain.  Exit codes: 0 success,
1 operational error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bundle import BundleError, load_bundle, save_bundle
from .codec import RequestParseError, build_vocab
from .corpus import RetrainStore, read_lreqs, read_reqs, write_lreqs, write_reqs
from .detector import DetectorConfig, fit_threshold
from .engine import (
    attach_classifier,
    canonicalize_corpus,
    evaluate_bundle,
    process_request,
    recalibrate,
    retrain_from_store,
    serve_stream,
    train_bundle,
)
from .evaluation import auc, confusion_from_scores, rates, roc_csv, roc_curve
from .pca import char_frequency_vector, fit_pca, pca_anomaly_score
from .synth import generate_synthetic_corpus

CONFIG_FLAGS = {
    "epochs": "epochs",
    "batch_size": "batch_size",
    "embed_size": "embed_size",
    "hidden_size": "hidden_size",
    "layers": "num_layers",
    "dropout": "dropout_rate",
    "lr": "learning_rate",
    "max_len": "max_len",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of config overrides")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--embed-size", type=int, default=None)
    parser.add_argument("--hidden-size", type=int, default=None)
    parser.add_argument("--layers", type=int, default=None)
    parser.add_argument("--dropout", type=float, default=None)
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--max-len", type=int, default=None)


def _config_from_args(args: argparse.Namespace) -> DetectorConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text()))
    for flag, field in CONFIG_FLAGS.items():
        given = getattr(args, flag, None)
        if given is not None:
            values[field] = given
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return replace(DetectorConfig(), **values)


def _emit(payload: dict) -> None:
    print(json.dumps(payload))


def _cmd_gen_corpus(args) -> int:
    benign, attacks = generate_synthetic_corpus(args.benign, args.attacks,
                                                seed=args.seed)
    write_reqs(args.out_benign, benign)
    write_lreqs(args.out_attacks, [(cls, raw) for cls, raw in attacks])
    _emit({"benign": len(benign), "attacks": len(attacks),
           "out_benign": args.out_benign, "out_attacks": args.out_attacks})
    return 0


def _cmd_train_detector(args) -> int:
    config = _config_from_args(args)
    corpus = read_reqs(args.corpus)
    bundle, info = train_bundle(corpus, config, quantile=args.quantile,
                                min_count=args.min_count)
    save_bundle(bundle, args.out)
    _emit({**info, "out": args.out})
    return 0


def _cmd_train_classifier(args) -> int:
    bundle = load_bundle(args.bundle)
    config = _config_from_args(args)
    labeled = [(cls.name, raw) for cls, raw in read_lreqs(args.data)]
    info = attach_classifier(bundle, labeled, config)
    save_bundle(bundle, args.out)
    _emit({**info, "out": args.out})
    return 0


def _cmd_fit_threshold(args) -> int:
    bundle = load_bundle(args.bundle)
    info = recalibrate(bundle, read_reqs(args.corpus), quantile=args.quantile)
    save_bundle(bundle, args.out)
    _emit({**info, "out": args.out})
    return 0


def _cmd_score(args) -> int:
    bundle = load_bundle(args.bundle)
    with open(args.input, encoding="utf-8", newline="") as fh:
        raw = fh.read()
    verdict = process_request(bundle, raw)
    print(verdict.to_json())
    return 0


def _cmd_serve(args) -> int:
    import io

    bundle = load_bundle(args.bundle)
    store = RetrainStore(args.store) if args.store else None
    if args.input:
        with open(args.input, encoding="utf-8", newline="") as fh:
            count = serve_stream(bundle, fh, sys.stdout, store=store)
    else:
        # rewrap stdin so CRLF sequences inside records survive
        stdin = io.TextIOWrapper(sys.stdin.buffer, encoding="utf-8", newline="")
        count = serve_stream(bundle, stdin, sys.stdout, store=store)
    print(f"served {count} requests", file=sys.stderr)
    return 0


def _read_attacks(path: str) -> list[str]:
    """Attack corpora may be labeled (.lreqs) or plain (.reqs)."""
    try:
        return [raw for _, raw in read_lreqs(path)]
    except ValueError:
        return read_reqs(path)


def _cmd_evaluate(args) -> int:
    bundle = load_bundle(args.bundle)
    summary = evaluate_bundle(bundle, read_reqs(args.benign),
                              _read_attacks(args.attacks))
    _emit(summary)
    return 0


def _cmd_roc(args) -> int:
    bundle = load_bundle(args.bundle)
    from .codec import encode
    from .detector import score_sequences

    cfg = bundle.detector.config
    benign_canon, _ = canonicalize_corpus(read_reqs(args.benign), cfg.max_len)
    attack_canon, _ = canonicalize_corpus(_read_attacks(args.attacks), cfg.max_len)
    benign_losses = score_sequences(
        bundle.detector, [encode(bundle.vocab, c, cfg.max_len) for c in benign_canon])
    attack_losses = score_sequences(
        bundle.detector, [encode(bundle.vocab, c, cfg.max_len) for c in attack_canon])
    scores = benign_losses + attack_losses
    labels = [False] * len(benign_losses) + [True] * len(attack_losses)
    curve = roc_curve(scores, labels)
    Path(args.out).write_text(roc_csv(curve), encoding="utf-8")
    _emit({"points": len(curve.points), "auc": auc(curve), "out": args.out})
    return 0


def _cmd_pca_baseline(args) -> int:
    benign_canon, _ = canonicalize_corpus(read_reqs(args.benign), args.max_len)
    attack_canon, _ = canonicalize_corpus(_read_attacks(args.attacks), args.max_len)
    if not benign_canon or not attack_canon:
        raise ValueError("pca baseline needs parseable benign and attack requests")
    vocab = build_vocab(benign_canon)
    X = [char_frequency_vector(vocab, c) for c in benign_canon]
    import numpy as np

    model = fit_pca(np.stack(X), k=min(args.components, vocab.size))
    benign_scores = [pca_anomaly_score(model, x) for x in X]
    attack_scores = [pca_anomaly_score(model, char_frequency_vector(vocab, c))
                     for c in attack_canon]
    scores = benign_scores + attack_scores
    labels = [False] * len(benign_scores) + [True] * len(attack_scores)
    curve = roc_curve(scores, labels)
    theta = fit_threshold(benign_scores, args.quantile).theta
    confusion = confusion_from_scores(scores, labels, theta)
    r = rates(confusion)
    _emit({"components": model.k, "auc": auc(curve),
           "theta": theta, "tpr": r.tpr, "fpr": r.fpr})
    return 0


def _cmd_retrain(args) -> int:
    bundle = load_bundle(args.bundle)
    fresh, info = retrain_from_store(bundle, RetrainStore(args.store))
    save_bundle(fresh, args.out)
    _emit({**info, "out": args.out})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reqsentry",
        description="Anomaly-based web request detection and attack classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate synthetic benign and attack corpora")
    p.add_argument("--benign", type=int, required=True)
    p.add_argument("--attacks", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-benign", required=True)
    p.add_argument("--out-attacks", required=True)
    p.set_defaults(handler=_cmd_gen_corpus)

    p = sub.add_parser("train-detector", help="train the autoencoder on benign traffic")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quantile", type=float, default=0.995)
    p.add_argument("--min-count", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_train_detector)

    p = sub.add_parser("train-classifier", help="train the 7-way attack classifier")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True, help="labeled .lreqs file")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_train_classifier)

    p = sub.add_parser("fit-threshold", help="recalibrate theta on a benign corpus")
    p.add_argument("--bundle", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quantile", type=float, default=0.995)
    p.set_defaults(handler=_cmd_fit_threshold)

    p = sub.add_parser("score", help="score one raw request file")
    p.add_argument("--bundle", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("serve", help="stream verdicts for a record-framed input")
    p.add_argument("--bundle", required=True)
    p.add_argument("--input", help="default: stdin")
    p.add_argument("--store", help="retrain store path (appends normal requests)")
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("evaluate", help="confusion and rates at the bundle threshold")
    p.add_argument("--bundle", required=True)
    p.add_argument("--benign", required=True)
    p.add_argument("--attacks", required=True)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("roc", help="write the threshold-sweep curve as CSV")
    p.add_argument("--bundle", required=True)
    p.add_argument("--benign", required=True)
    p.add_argument("--attacks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_roc)

    p = sub.add_parser("pca-baseline", help="linear baseline on char frequencies")
    p.add_argument("--benign", required=True)
    p.add_argument("--attacks", required=True)
    p.add_argument("--components", type=int, default=8)
    p.add_argument("--quantile", type=float, default=0.995)
    p.add_argument("--max-len", type=int, default=1000)
    p.set_defaults(handler=_cmd_pca_baseline)

    p = sub.add_parser("retrain", help="retrain the detector from the store")
    p.add_argument("--bundle", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_retrain)

    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (BundleError, RequestParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
