#!/usr/bin/env python3
"""Desk-scale end-to-end run: generate traffic, train, calibrate, evaluate.

Writes the corpora, the trained bundle, and the ROC CSV under --out-dir and
prints a JSON summary.  Defaults finish in a couple of minutes on a laptop;
scale --benign/--epochs up for a longer run.
"""

import argparse
import json
import time
from pathlib import Path

from reqsentry.bundle import save_bundle
from reqsentry.cli import run_cli
from reqsentry.codec import encode
from reqsentry.corpus import write_lreqs, write_reqs
from reqsentry.detector import DetectorConfig, fit_threshold, score_sequences
from reqsentry.engine import evaluate_bundle, train_bundle
from reqsentry.synth import generate_synthetic_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--benign", type=int, default=600)
    parser.add_argument("--holdout", type=int, default=100)
    parser.add_argument("--attacks", type=int, default=140)
    parser.add_argument("--epochs", type=int, default=12)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--quantile", type=float, default=0.995)
    parser.add_argument("--out-dir", default="out")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.time()
    benign, attacks = generate_synthetic_corpus(
        args.benign + args.holdout, args.attacks, seed=args.seed)
    train_raws, holdout_raws = benign[:args.benign], benign[args.benign:]
    write_reqs(out / "benign.reqs", train_raws)
    write_reqs(out / "holdout.reqs", holdout_raws)
    write_lreqs(out / "attacks.lreqs", attacks)

    config = DetectorConfig(batch_size=32, embed_size=32, hidden_size=32,
                            num_layers=2, dropout_rate=0.3, epochs=args.epochs,
                            learning_rate=3e-3, max_len=256, seed=args.seed,
                            val_fraction=0.0)
    bundle, info = train_bundle(train_raws, config, quantile=args.quantile)

    # calibrate on the held-out benign set rather than the training split
    holdout_seqs = [encode(bundle.vocab, c, config.max_len)
                    for c in _canon(holdout_raws, config.max_len)]
    bundle.threshold = fit_threshold(
        score_sequences(bundle.detector, holdout_seqs), args.quantile)
    save_bundle(bundle, out / "model.bundle")

    summary = evaluate_bundle(bundle, holdout_raws, [raw for _, raw in attacks])
    summary["train_info"] = info
    summary["elapsed_sec"] = round(time.time() - t0, 1)
    print(json.dumps(summary, indent=2))

    run_cli(["roc", "--bundle", str(out / "model.bundle"),
             "--benign", str(out / "holdout.reqs"),
             "--attacks", str(out / "attacks.lreqs"),
             "--out", str(out / "roc.csv")])


def _canon(raws, max_chars):
    from reqsentry.engine import canonicalize_corpus
    texts, _ = canonicalize_corpus(raws, max_chars)
    return texts


if __name__ == "__main__":
    main()
