"""Linear baseline: PCA over character-frequency features.

Reconstruction from k principal components is ``V @ scores + mean``; the
squared residual norm serves as the linear anomaly score.  The
eigendecomposition is a cyclic Jacobi sweep, accurate for the small
vocab-sized covariance matrices this module sees (d <= 256).

A tiny single-hidden-layer linear autoencoder lives here too, as the testbed
for the near-equivalence of linear autoencoders and PCA.

All functions are pure over immutable fitted models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import Vocabulary
from .nn import AdamState, ParamStore, adam_step, uniform_init

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


def char_frequency_vector(vocab: Vocabulary, text: str) -> np.ndarray:
    """Per-character frequencies over vocabulary ids; unknown chars count
    toward UNK, so entries of a non-empty text sum to exactly 1."""
    v = np.zeros(vocab.size)
    if not text:
        return v
    for ch in text:
        v[vocab.id_for(ch)] += 1.0
    return v / len(text)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray          # (d,)
    components: np.ndarray    # (d, k), orthonormal columns
    eigenvalues: np.ndarray   # (k,), non-increasing
    k: int


def _jacobi_eigh(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations on a symmetric matrix.

    Sweeps until the largest off-diagonal magnitude drops below JACOBI_TOL,
    capped at JACOBI_MAX_SWEEPS.  Returns (eigenvalues, eigenvectors) with
    eigenvectors in columns, unsorted.
    """
    A = np.array(C, dtype=np.float64)
    d = A.shape[0]
    V = np.eye(d)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.abs(A - np.diag(np.diag(A)))
        if off.max(initial=0.0) < JACOBI_TOL:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) < JACOBI_TOL:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p], A[:, q] = rot_p, rot_q
                rot_p = c * A[p, :] - s * A[q, :]
                rot_q = s * A[p, :] + c * A[q, :]
                A[p, :], A[q, :] = rot_p, rot_q
                vr_p = c * V[:, p] - s * V[:, q]
                vr_q = s * V[:, p] + c * V[:, q]
                V[:, p], V[:, q] = vr_p, vr_q
    return np.diag(A).copy(), V


def fit_pca(X: np.ndarray, k: int) -> PcaModel:
    """Top-k principal axes of row-sample data via the sample covariance."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigenvalues, vectors = _jacobi_eigh(cov)

    order = np.argsort(eigenvalues)[::-1][:k]
    values = eigenvalues[order]
    components = vectors[:, order]
    # sign convention: largest-magnitude entry of each axis is positive
    for j in range(k):
        col = components[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            components[:, j] = -col
    return PcaModel(mean=mean, components=components,
                    eigenvalues=values, k=k)


def pc_scores(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Projection of a centered point onto the principal axes."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.mean.shape:
        raise ValueError(f"point has shape {x.shape}, model expects {model.mean.shape}")
    return model.components.T @ (x - model.mean)


def reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    """Back-projection: components times scores, plus the mean."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (model.k,):
        raise ValueError(f"scores have shape {scores.shape}, expected ({model.k},)")
    return model.components @ scores + model.mean


def pca_anomaly_score(model: PcaModel, x: np.ndarray) -> float:
    """Squared norm of the reconstruction residual."""
    residual = np.asarray(x, dtype=np.float64) - reconstruct(model, pc_scores(model, x))
    return float(residual @ residual)


def pca_mse(model: PcaModel, X: np.ndarray) -> float:
    """Mean squared reconstruction error (mean over samples of ||x - x_hat||^2)."""
    return float(np.mean([pca_anomaly_score(model, x) for x in np.asarray(X)]))


@dataclass
class LinearAutoencoder:
    """x_hat = W2 @ (W1 @ x + b1) + b2 with identity activations."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def reconstruct_rows(self, X: np.ndarray) -> np.ndarray:
        hidden = X @ self.w1.T + self.b1
        return hidden @ self.w2.T + self.b2

    def mse(self, X: np.ndarray) -> float:
        residual = np.asarray(X) - self.reconstruct_rows(np.asarray(X))
        return float(np.mean(np.sum(residual * residual, axis=1)))


def train_linear_autoencoder(X: np.ndarray, k: int, steps: int = 6000,
                             learning_rate: float = 0.01,
                             seed: int = 0) -> LinearAutoencoder:
    """Full-batch Adam on squared reconstruction error.

    At convergence the hidden layer spans the top-k principal subspace, so
    the attained error approaches the k-component PCA error.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    rng = np.random.default_rng(seed)
    store = ParamStore()
    store.add("w1", uniform_init(rng, (k, d), d))
    store.add("b1", np.zeros(k))
    store.add("w2", uniform_init(rng, (d, k), k))
    store.add("b2", np.zeros(d))
    adam = AdamState.for_store(store, learning_rate=learning_rate)

    w1, b1 = store.params["w1"], store.params["b1"]
    w2, b2 = store.params["w2"], store.params["b2"]
    for _ in range(steps):
        hidden = X @ w1.T + b1
        out = hidden @ w2.T + b2
        d_out = 2.0 * (out - X) / n
        store.zero_grads()
        store.grads["w2"][...] = d_out.T @ hidden
        store.grads["b2"][...] = d_out.sum(axis=0)
        d_hidden = d_out @ w2
        store.grads["w1"][...] = d_hidden.T @ X
        store.grads["b1"][...] = d_hidden.sum(axis=0)
        adam_step(store, adam)
    return LinearAutoencoder(w1=w1, b1=b1, w2=w2, b2=b2)
