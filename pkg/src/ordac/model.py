"""LDL ordinal regressors.

``LdlModel`` is the contract the correction engine relies on; ``MlpRegressor``
is a one-hidden-layer numpy network (d -> H -> C, ReLU, softmax) trained with
mini-batch gradient descent on the mean KL divergence to target rank
distributions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import DimensionError, TrainingDivergedError
from .label_dist import confidence, expected_rank_many, kl_rows

CHECKPOINT_FORMAT = "ordac-mlp-v1"


@dataclass
class ModelParams:
    hidden: int = 64
    lr: float = 0.05
    batch_size: int = 32
    seed: int = 0


class LdlModel(Protocol):
    def predict_batch(self, X: np.ndarray) -> np.ndarray: ...

    def fit_epoch(self, X: np.ndarray, targets: np.ndarray, lr: float, seed, *, batch_size: int = 32,
                  epoch: int = 0) -> float: ...

    def clone_initial(self, seed: int | None = None) -> "LdlModel": ...


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class MlpRegressor:
    def __init__(self, d: int, C: int, hidden: int = 64, seed: int = 0):
        self.d, self.C, self.hidden, self.seed = int(d), int(C), int(hidden), int(seed)
        self.epochs_trained = 0
        rng = np.random.default_rng(self.seed)
        self.W1 = rng.normal(0.0, np.sqrt(2.0 / self.d), size=(self.d, self.hidden))
        self.b1 = np.zeros(self.hidden)
        self.W2 = rng.normal(0.0, np.sqrt(2.0 / self.hidden), size=(self.hidden, self.C))
        self.b2 = np.zeros(self.C)

    PARAM_NAMES = ("W1", "b1", "W2", "b2")

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.PARAM_NAMES}

    def clone_initial(self, seed: int | None = None) -> "MlpRegressor":
        return MlpRegressor(self.d, self.C, self.hidden, self.seed if seed is None else seed)

    def copy(self) -> "MlpRegressor":
        other = self.clone_initial()
        for name, value in self.params.items():
            setattr(other, name, value.copy())
        other.epochs_trained = self.epochs_trained
        return other

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise DimensionError(f"expected inputs of dimension {self.d}, got shape {X.shape}")
        return X

    def _forward(self, X):
        h_pre = X @ self.W1 + self.b1
        h = np.maximum(h_pre, 0.0)
        return h_pre, h, softmax(h @ self.W2 + self.b2)

    def forward(self, x) -> np.ndarray:
        return self.predict_batch(np.atleast_2d(x))[0]

    def predict_batch(self, X) -> np.ndarray:
        return self._forward(self._check(X))[2]

    def predict_rank(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Expected rank and normalised-entropy confidence for each row of ``X``."""
        probs = self.predict_batch(X)
        return expected_rank_many(probs), confidence(probs)

    def loss_and_grads(self, X, targets):
        """Mean KL(target || model) over the batch and its gradient per parameter."""
        X = self._check(X)
        h_pre, h, p = self._forward(X)
        loss = float(kl_rows(targets, p).mean())
        n = X.shape[0]
        # softmax + KL with normalised targets: dL/dlogits = p - t
        g_out = (p - targets) / n
        g_h = (g_out @ self.W2.T) * (h_pre > 0)
        grads = {
            "W2": h.T @ g_out,
            "b2": g_out.sum(axis=0),
            "W1": X.T @ g_h,
            "b1": g_h.sum(axis=0),
        }
        return loss, grads

    def fit_epoch(self, X, targets, lr: float, seed, *, batch_size: int = 32, epoch: int = 0) -> float:
        """One shuffled pass of mini-batch gradient descent; returns the mean pre-update loss."""
        X = self._check(X)
        targets = np.asarray(targets, dtype=float)
        n = X.shape[0]
        order = np.random.default_rng(seed).permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start:start + batch_size]
            loss, grads = self.loss_and_grads(X[idx], targets[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, b, loss)
            total += loss * idx.size
            if lr:
                for name, g in grads.items():
                    getattr(self, name)[...] -= lr * g
        self.epochs_trained += 1
        return total / n

    def save(self, path) -> None:
        meta = {
            "format": CHECKPOINT_FORMAT,
            "d": self.d,
            "C": self.C,
            "hidden": self.hidden,
            "seed": self.seed,
            "epochs_trained": self.epochs_trained,
            "shapes": {k: list(v.shape) for k, v in self.params.items()},
        }
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **self.params)

    @classmethod
    def load(cls, path) -> "MlpRegressor":
        with np.load(Path(path), allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise DimensionError(f"{path}: not an {CHECKPOINT_FORMAT} checkpoint")
            model = cls(meta["d"], meta["C"], meta["hidden"], meta["seed"])
            for name in cls.PARAM_NAMES:
                arr = z[name]
                if list(arr.shape) != meta["shapes"][name]:
                    raise DimensionError(f"{path}: {name} has shape {arr.shape}")
                setattr(model, name, arr.astype(float))
        model.epochs_trained = meta["epochs_trained"]
        return model


def ensemble_predict(models, X) -> np.ndarray:
    """Average of the members' rank distributions."""
    return np.mean([m.predict_batch(X) for m in models], axis=0)
