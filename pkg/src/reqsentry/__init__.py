"""Anomaly-based web attack detection.

A character-level sequence-to-sequence LSTM autoencoder learns the structure
of benign HTTP requests; requests whose reconstruction loss exceeds a
calibrated threshold are flagged anomalous and routed to a 7-way attack
classifier.  A PCA baseline, ROC evaluation tooling, and a CLI engine with
binary model bundles round out the pipeline.
"""

from .bundle import BundleError, EngineBundle, load_bundle, save_bundle
from .classifier import (
    AttackClass,
    ClassifierModel,
    LabeledExample,
    evaluate_classifier,
    predict,
    train_classifier,
)
from .codec import (
    EncodedSequence,
    ParsedRequest,
    RequestParseError,
    Vocabulary,
    build_vocab,
    canonicalize,
    decode,
    encode,
    parse_http,
)
from .corpus import RetrainStore, read_lreqs, read_reqs, write_lreqs, write_reqs
from .detector import (
    Decision,
    DetectorConfig,
    DetectorModel,
    ThresholdModel,
    detect,
    encode_latent,
    fit_threshold,
    greedy_decode,
    reconstruction_loss,
    score_sequences,
    train_detector,
)
from .engine import Verdict, process_request, serve_stream, train_bundle
from .evaluation import ConfusionCounts, RocCurve, auc, rates, roc_curve
from .pca import PcaModel, fit_pca, pc_scores, pca_anomaly_score, reconstruct
from .synth import CLASS_SIGNATURES, generate_synthetic_corpus

__version__ = "0.1.0"
