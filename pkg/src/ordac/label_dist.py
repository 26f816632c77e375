"""Gaussian label distributions over integer ranks 0..C-1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError

SIGMA_MIN = 0.01
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LabelDistribution:
    """Per-sample Gaussian label: ``mu`` is a rank value, ``sigma`` its uncertainty."""

    mu: float
    sigma: float

    def clamped(self, C: int) -> "LabelDistribution":
        return LabelDistribution(clamp_mu(self.mu, C), clamp_sigma(self.sigma, C))


def clamp_mu(mu, C):
    return np.clip(mu, 0.0, C - 1.0)


def clamp_sigma(sigma, C):
    return np.clip(sigma, SIGMA_MIN, float(C))


def discretize_many(mu, sigma, C: int) -> np.ndarray:
    """Vectorised ``discretize``: returns an (n, C) array of rank probabilities.

    The Gaussian kernel is renormalised over the truncated support 0..C-1;
    tail mass beyond the boundary ranks is dropped, not accumulated.
    """
    if C < 2:
        raise ConfigurationError(f"rank count must be >= 2, got {C}")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    ranks = np.arange(C, dtype=float)
    z = (ranks[None, :] - mu[:, None]) / sigma[:, None]
    logk = -0.5 * z * z
    # subtracting the row max keeps tiny sigmas from underflowing to 0/0
    logk -= logk.max(axis=1, keepdims=True)
    k = np.exp(logk)
    return k / k.sum(axis=1, keepdims=True)


def discretize(dist: LabelDistribution, C: int) -> np.ndarray:
    return discretize_many(dist.mu, dist.sigma, C)[0]


def expected_rank(probs) -> float:
    probs = np.asarray(probs, dtype=float)
    return float(np.dot(np.arange(probs.shape[-1]), probs))


def expected_rank_many(probs: np.ndarray) -> np.ndarray:
    return probs @ np.arange(probs.shape[-1], dtype=float)


def kl_divergence(target, predicted) -> float:
    target = np.asarray(target, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if target.shape != predicted.shape:
        raise DimensionError(f"length mismatch: {target.shape} vs {predicted.shape}")
    return float(kl_rows(target[None, :], predicted[None, :])[0])


def kl_rows(target: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Row-wise KL(target || predicted) with both terms floored at 1e-12."""
    predicted = np.maximum(predicted, LOG_FLOOR)
    return np.sum(target * (np.log(target + LOG_FLOOR) - np.log(predicted + LOG_FLOOR)), axis=1)


def confidence(probs) -> np.ndarray:
    """Normalised-entropy confidence ``1 - H(p) / ln C`` (0 for uniform, 1 for a point mass)."""
    probs = np.asarray(probs, dtype=float)
    C = probs.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(probs > 0, probs * np.log(probs), 0.0)
    H = -plogp.sum(axis=-1)
    return np.clip(1.0 - H / np.log(C), 0.0, 1.0)
