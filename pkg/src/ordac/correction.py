"""Adaptive correction of noisy ordinal labels with K-fold cross-training.

Each sample carries a Gaussian label (mu, sigma). K models are trained on
K-1 folds each; after a warm-up, every model predicts its held-out fold and
those out-of-fold predictions, debiased per class, pull each sample's mu
toward the prediction and move sigma toward the absolute error.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset, FoldPlan
from .errors import ConfigurationError, OrdacError
from .label_dist import (LabelDistribution, clamp_mu, clamp_sigma, confidence,
                         discretize_many, expected_rank_many)
from .metrics import class_of
from .model import LdlModel, MlpRegressor, ModelParams

log = logging.getLogger(__name__)


@dataclass
class CorrectionParams:
    alpha_base: float = 0.2
    beta_base: float = 0.8
    E_max: int = 50
    E_corr: int = 10
    std_init: float = 0.75
    epsilon: float = 1e-8
    debias: bool = True

    def validate(self):
        # zero rates and E_corr > E_max are allowed: both switch correction off
        if self.alpha_base < 0 or self.beta_base < 0:
            raise ConfigurationError("alpha_base and beta_base must be non-negative")
        if self.E_max < 1 or self.E_corr < 1:
            raise ConfigurationError("E_max and E_corr must be >= 1")
        if self.std_init <= 0:
            raise ConfigurationError("std_init must be positive")
        return self


def class_wise_means(preds, classes, C: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean prediction per class; classes with no members get NaN and count 0."""
    preds = np.asarray(preds, dtype=float)
    classes = np.asarray(classes, dtype=np.int64)
    counts = np.bincount(classes, minlength=C)
    sums = np.bincount(classes, weights=preds, minlength=C)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return means, counts


def shift_predictions(preds, classes, class_means) -> np.ndarray:
    classes = np.asarray(classes, dtype=np.int64)
    offsets = np.asarray(class_means)[classes] - classes
    if np.isnan(offsets).any():
        raise OrdacError("shift requested for a class without a mean")
    return np.asarray(preds, dtype=float) - offsets


def correction_coefficient(gamma, class_count, total, epsilon=1e-8, alpha_base=0.2, beta_base=0.8):
    """Return (lambda, alpha_i, beta_i).

    lambda = gamma / (1 - ln(N_c/N + eps)); rarer classes get smaller lambda.
    """
    class_count = np.asarray(class_count, dtype=float)
    if np.any(class_count <= 0):
        raise OrdacError("correction coefficient requested for an empty class")
    pi = class_count / float(total)
    lam = np.asarray(gamma, dtype=float) / (1.0 - np.log(pi + epsilon))
    if lam.ndim == 0:
        lam = float(lam)
    return lam, alpha_base * lam, beta_base * lam


def update_arrays(mu, sigma, y_shifted, alpha, beta, C: int):
    """Simultaneous update of (mu, sigma) from the old state, clamped to their ranges."""
    e = np.asarray(y_shifted, dtype=float) - mu
    sigma_new = clamp_sigma(sigma + alpha * (np.abs(e) - sigma), C)
    mu_new = clamp_mu(mu + beta * e, C)
    return mu_new, sigma_new


def update_distribution(dist: LabelDistribution, y_shifted: float, alpha: float, beta: float,
                        C: int) -> LabelDistribution:
    mu, sigma = update_arrays(dist.mu, dist.sigma, y_shifted, alpha, beta, C)
    return LabelDistribution(float(mu), float(sigma))


@dataclass
class FoldCorrection:
    ids: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    y_hat: np.ndarray
    gamma: np.ndarray
    y_shifted: np.ndarray
    lam: np.ndarray

    def as_map(self) -> dict[int, LabelDistribution]:
        return {int(i): LabelDistribution(float(m), float(s))
                for i, m, s in zip(self.ids, self.mu, self.sigma)}


def correct_predictions(y_hat, gamma, mu, sigma, params: CorrectionParams, C: int, ids=None):
    """Debias, weight and apply one correction step to a single fold's samples."""
    y_hat = np.asarray(y_hat, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    classes = class_of(mu, C)
    classes = np.atleast_1d(classes)
    means, counts = class_wise_means(y_hat, classes, C)
    y_shifted = shift_predictions(y_hat, classes, means) if params.debias else y_hat.copy()
    lam, alpha, beta = correction_coefficient(gamma, counts[classes], y_hat.size, params.epsilon,
                                              params.alpha_base, params.beta_base)
    new_mu, new_sigma = update_arrays(mu, sigma, y_shifted, alpha, beta, C)
    ids = np.arange(y_hat.size) if ids is None else np.asarray(ids)
    return FoldCorrection(ids, new_mu, new_sigma, y_hat, np.asarray(gamma, dtype=float),
                          y_shifted, np.asarray(lam))


def predict_rank(model: LdlModel, X) -> tuple[np.ndarray, np.ndarray]:
    probs = model.predict_batch(X)
    return expected_rank_many(probs), confidence(probs)


def correct_fold(model: LdlModel, store: Dataset, valid_ids, params: CorrectionParams) -> FoldCorrection:
    """Out-of-fold correction of ``valid_ids`` using ``model``; ``store`` is not modified."""
    valid_ids = np.asarray(valid_ids, dtype=np.int64)
    if valid_ids.size == 0:
        raise OrdacError("validation fold is empty")
    y_hat, gamma = predict_rank(model, store.features[valid_ids])
    return correct_predictions(y_hat, gamma, store.mu[valid_ids], store.sigma[valid_ids],
                               params, store.C, ids=valid_ids)


ModelFactory = Callable[[int], LdlModel]


def default_factory(ds: Dataset, mp: ModelParams) -> ModelFactory:
    # all K models start from the same initial weights
    return lambda k: MlpRegressor(ds.d, ds.C, mp.hidden, mp.seed)


def _fit(model, X, targets, mp: ModelParams, seed, epoch):
    return model.fit_epoch(X, targets, mp.lr, seed, batch_size=mp.batch_size, epoch=epoch)


@dataclass
class OrdacResult:
    clean: Dataset
    models: list
    history: list[dict]
    mu_trace: np.ndarray  # (E_max + 1, N); row 0 is the initial state
    sigma_trace: np.ndarray
    correction_log: list[tuple[int, int, np.ndarray]] = field(default_factory=list)  # (epoch, k, ids)


def ordac_train(dataset: Dataset, plan: FoldPlan, params: CorrectionParams,
                model_params: ModelParams | None = None,
                make_model: ModelFactory | None = None) -> OrdacResult:
    """Run the full cross-training correction loop for ``params.E_max`` epochs.

    Corrections computed by all K models in an epoch are merged (fold order,
    then id) and written back once, so every training view sees them from the
    next epoch.
    """
    params.validate()
    mp = model_params or ModelParams()
    make_model = make_model or default_factory(dataset, mp)
    if plan.assignment.shape[0] != dataset.n:
        raise ConfigurationError("fold plan does not cover the dataset")
    C = dataset.C
    store = dataset.replace(mu=dataset.mu.copy(), sigma=dataset.sigma.copy())
    models = [make_model(k) for k in range(plan.K)]
    train_ids = [plan.train_ids(k) for k in range(plan.K)]
    valid_ids = [plan.valid_ids(k) for k in range(plan.K)]
    mu_trace = [store.mu.copy()]
    sigma_trace = [store.sigma.copy()]
    history, corr_log = [], []

    for epoch in range(1, params.E_max + 1):
        targets = discretize_many(store.mu, store.sigma, C)
        losses = [
            _fit(models[k], store.features[train_ids[k]], targets[train_ids[k]], mp, [mp.seed, k, epoch], epoch)
            for k in range(plan.K)
        ]
        corrected = epoch >= params.E_corr
        mean_dmu = 0.0
        if corrected:
            fixes = [correct_fold(models[k], store, valid_ids[k], params) for k in range(plan.K)]
            new_mu, new_sigma = store.mu.copy(), store.sigma.copy()
            for k, fix in enumerate(fixes):
                new_mu[fix.ids] = fix.mu
                new_sigma[fix.ids] = fix.sigma
                corr_log.append((epoch, k, fix.ids))
            mean_dmu = float(np.abs(new_mu - store.mu).mean())
            store.mu, store.sigma = new_mu, new_sigma
        mu_trace.append(store.mu.copy())
        sigma_trace.append(store.sigma.copy())
        history.append({
            "epoch": epoch,
            "corrected": corrected,
            "train_loss": float(np.mean(losses)),
            "fold_losses": [float(x) for x in losses],
            "mean_abs_dmu": mean_dmu,
            "mean_sigma": float(store.sigma.mean()),
            "class_counts": np.bincount(class_of(store.mu, C), minlength=C).tolist(),
        })
        log.debug("epoch %d loss %.4f dmu %.4f", epoch, history[-1]["train_loss"], mean_dmu)

    return OrdacResult(store, models, history, np.array(mu_trace), np.array(sigma_trace), corr_log)


def kfold_train(dataset: Dataset, plan: FoldPlan, E_max: int, model_params: ModelParams | None = None,
                make_model: ModelFactory | None = None) -> list:
    """Plain K-fold training on fixed targets (no correction)."""
    mp = model_params or ModelParams()
    make_model = make_model or default_factory(dataset, mp)
    targets = discretize_many(dataset.mu, dataset.sigma, dataset.C)
    models = []
    for k in range(plan.K):
        model = make_model(k)
        ids = plan.train_ids(k)
        for epoch in range(1, E_max + 1):
            _fit(model, dataset.features[ids], targets[ids], mp, [mp.seed, k, epoch], epoch)
        models.append(model)
    return models


def train_fldl(dataset: Dataset, E_max: int, model_params: ModelParams | None = None) -> MlpRegressor:
    """Single model trained on the dataset's current (fixed) label distributions."""
    mp = model_params or ModelParams()
    model = MlpRegressor(dataset.d, dataset.C, mp.hidden, mp.seed)
    targets = discretize_many(dataset.mu, dataset.sigma, dataset.C)
    for epoch in range(1, E_max + 1):
        _fit(model, dataset.features, targets, mp, [mp.seed, epoch], epoch)
    return model


def train_on_corrected(clean: Dataset, params: CorrectionParams,
                       model_params: ModelParams | None = None) -> MlpRegressor:
    return train_fldl(clean, params.E_max, model_params)


def filter_uncertain(clean: Dataset, std_init: float) -> tuple[Dataset, np.ndarray]:
    """Drop samples whose sigma never fell below its initial value."""
    removed = np.flatnonzero(clean.sigma >= std_init)
    kept = np.flatnonzero(clean.sigma < std_init)
    return clean.subset(kept), removed
