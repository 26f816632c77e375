"""Gaussian asymmetric label noise: transition matrix and seeded injection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError

DEFAULT_SIGMA_N = 3.0


@dataclass(frozen=True)
class NoiseMatrix:
    entries: np.ndarray
    tau: float
    sigma_n: float

    @property
    def C(self) -> int:
        return self.entries.shape[0]


def build_noise_matrix(C: int, tau: float, sigma_n: float = DEFAULT_SIGMA_N) -> NoiseMatrix:
    """Row i keeps 1-tau on the diagonal and spreads tau over j != i with
    weights exp(-(i-j)^2 / (2 sigma_n^2)), so every class flips with probability tau."""
    if C < 2:
        raise ConfigurationError(f"rank count must be >= 2, got {C}")
    if not 0.0 <= tau < 1.0:
        raise ConfigurationError(f"tau must lie in [0, 1), got {tau}")
    if not sigma_n > 0:
        raise ConfigurationError(f"sigma_n must be positive, got {sigma_n}")
    ranks = np.arange(C, dtype=float)
    w = np.exp(-((ranks[:, None] - ranks[None, :]) ** 2) / (2.0 * sigma_n**2))
    np.fill_diagonal(w, 0.0)
    T = tau * w / w.sum(axis=1, keepdims=True)
    np.fill_diagonal(T, 1.0 - tau)
    return NoiseMatrix(T, float(tau), float(sigma_n))


def inject_noise(labels, matrix: NoiseMatrix, seed: int) -> np.ndarray:
    labels = np.asarray(labels)
    C = matrix.C
    bad = np.flatnonzero((labels < 0) | (labels >= C))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"label {labels[i]} at index {i} is outside 0..{C - 1}")
    labels = labels.astype(np.int64)
    rng = np.random.default_rng(seed)
    u = rng.random(labels.shape[0])
    cdf = np.cumsum(matrix.entries, axis=1)
    cdf[:, -1] = 1.0
    noisy = (u[:, None] >= cdf[labels]).sum(axis=1)
    return np.minimum(noisy, C - 1).astype(np.int64)


def noise_summary(true_labels, noisy_labels, C: int) -> dict:
    """Realised flip statistics, as written next to a noisy dataset."""
    true_labels = np.asarray(true_labels)
    noisy_labels = np.asarray(noisy_labels)
    flipped = true_labels != noisy_labels
    dist = np.abs(true_labels - noisy_labels)
    return {
        "n": int(true_labels.size),
        "n_flipped": int(flipped.sum()),
        "realized_rate": float(flipped.mean()) if true_labels.size else 0.0,
        "flip_distance_counts": np.bincount(dist, minlength=C).tolist(),
        "transition_counts": np.bincount(true_labels * C + noisy_labels, minlength=C * C)
        .reshape(C, C)
        .tolist(),
    }
