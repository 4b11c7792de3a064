import pytest

from reqsentry.detector import DetectorConfig
from reqsentry.engine import train_bundle
from reqsentry.synth import generate_synthetic_corpus

FAST_CFG = DetectorConfig(batch_size=8, embed_size=8, hidden_size=8,
                          num_layers=2, dropout_rate=0.1, epochs=3,
                          learning_rate=3e-3, max_len=192, seed=11)


@pytest.fixture(scope="session")
def small_corpus():
    """40 benign requests plus 14 labeled attacks, fixed seed."""
    return generate_synthetic_corpus(40, 14, seed=21)


@pytest.fixture(scope="session")
def small_bundle(small_corpus):
    """A lightly trained bundle for engine/CLI plumbing tests."""
    benign, _ = small_corpus
    bundle, _ = train_bundle(benign, FAST_CFG, quantile=0.995)
    return bundle
