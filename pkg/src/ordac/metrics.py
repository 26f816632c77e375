"""Macro-averaged ordinal metrics and label-quality measures."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError


def class_of(mu, C: int):
    """Nearest rank, ties rounded half away from zero, clamped to 0..C-1."""
    mu = np.asarray(mu, dtype=float)
    r = np.sign(mu) * np.floor(np.abs(mu) + 0.5)
    out = np.clip(r, 0, C - 1).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def _prepare(preds, truths, C):
    preds = np.asarray(preds, dtype=float)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.size == 0:
        raise DataError("cannot score an empty prediction set")
    if preds.shape != truths.shape:
        raise DataError(f"length mismatch: {preds.shape} vs {truths.shape}")
    if C is None:
        C = int(max(truths.max(), np.ceil(preds.max()))) + 1
    return class_of(preds, C), truths, C


@dataclass
class EvalReport:
    macro_mae: float
    macro_recall: float
    per_class_mae: list  # None marks a class absent from the truths
    per_class_recall: list
    n_per_class: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))

    def csv_header(self) -> list[str]:
        C = len(self.n_per_class)
        return (["macro_mae", "macro_recall"] + [f"mae_{c}" for c in range(C)]
                + [f"recall_{c}" for c in range(C)] + [f"n_{c}" for c in range(C)])

    def csv_row(self) -> list[str]:
        def cell(v):
            return "" if v is None else repr(v)
        return ([repr(self.macro_mae), repr(self.macro_recall)]
                + [cell(v) for v in self.per_class_mae]
                + [cell(v) for v in self.per_class_recall]
                + [str(v) for v in self.n_per_class])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        w.writerow(self.csv_row())
        return buf.getvalue()


def evaluate(preds, truths, C: int | None = None) -> EvalReport:
    """Per-class MAE and recall grouped by the true label, plus their macro means."""
    pc, truths, C = _prepare(preds, truths, C)
    mae, rec, counts = [], [], []
    for c in range(C):
        mask = truths == c
        n = int(mask.sum())
        counts.append(n)
        if n == 0:
            mae.append(None)
            rec.append(None)
            continue
        mae.append(float(np.abs(pc[mask] - c).mean()))
        rec.append(float((pc[mask] == c).mean()))
    present_mae = [m for m in mae if m is not None]
    present_rec = [r for r in rec if r is not None]
    return EvalReport(float(np.mean(present_mae)), float(np.mean(present_rec)), mae, rec, counts)


def macro_mae(preds, truths, C: int | None = None) -> float:
    return evaluate(preds, truths, C).macro_mae


def macro_recall(preds, truths, C: int | None = None) -> float:
    return evaluate(preds, truths, C).macro_recall


def label_quality(mus, truths) -> tuple[float, float]:
    """Micro MAE and RMSE between continuous label means and the true ranks."""
    mus = np.asarray(mus, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if mus.size == 0:
        raise DataError("cannot score an empty label set")
    if mus.shape != truths.shape:
        raise DataError(f"length mismatch: {mus.shape} vs {truths.shape}")
    err = mus - truths
    return float(np.abs(err).mean()), float(math.sqrt(np.mean(err * err)))


def class_histogram(labels, C: int) -> np.ndarray:
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=C)


def total_variation(hist_a, hist_b) -> float:
    """TV distance between two count histograms after normalising each."""
    a = np.asarray(hist_a, dtype=float)
    b = np.asarray(hist_b, dtype=float)
    return float(0.5 * np.abs(a / a.sum() - b / b.sum()).sum())
