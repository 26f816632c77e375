"""Datasets, the synthetic ordinal benchmark, CSV I/O and stratified fold plans."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DataError
from .label_dist import LabelDistribution

LABEL_COLUMNS = ("label", "label_noisy", "label_original")
RESERVED = {"id", "label_true", "mu", "sigma", *LABEL_COLUMNS}
DEFAULT_STD_INIT = 0.75
IMBALANCED_COUNTS = (40, 120, 400, 120, 40)


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    dist: LabelDistribution
    label_original: int
    label_true: int | None = None


@dataclass
class Dataset:
    """Column-oriented sample store; ``samples`` gives the per-sample view.

    ``mu``/``sigma`` hold the current label distributions and default to
    (label, std_init). ``label_true`` is evaluation-only and may be absent.
    """

    features: np.ndarray
    labels: np.ndarray
    C: int
    label_true: np.ndarray | None = None
    mu: np.ndarray | None = None
    sigma: np.ndarray | None = None
    provenance: str = ""
    feature_names: list[str] = field(default_factory=list)
    label_column: str = "label"
    std_init: float = DEFAULT_STD_INIT

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.features.shape}")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise DataError("labels and features disagree on sample count")
        _check_range(self.labels, self.C, "label")
        if self.label_true is not None:
            self.label_true = np.asarray(self.label_true, dtype=np.int64)
            _check_range(self.label_true, self.C, "label_true")
        if self.mu is None:
            self.mu = self.labels.astype(float)
        if self.sigma is None:
            self.sigma = np.full(n, float(self.std_init))
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.d)]

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    @property
    def samples(self) -> list[Sample]:
        lt = self.label_true
        return [
            Sample(i, self.features[i], LabelDistribution(float(self.mu[i]), float(self.sigma[i])),
                   int(self.labels[i]), None if lt is None else int(lt[i]))
            for i in range(self.n)
        ]

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` as a new dataset; ids are renumbered densely."""
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.features[idx], self.labels[idx], self.C,
            None if self.label_true is None else self.label_true[idx],
            self.mu[idx], self.sigma[idx], self.provenance,
            list(self.feature_names), self.label_column, self.std_init,
        )

    def replace(self, **changes) -> "Dataset":
        fields = dict(
            features=self.features, labels=self.labels, C=self.C, label_true=self.label_true,
            mu=self.mu, sigma=self.sigma, provenance=self.provenance,
            feature_names=list(self.feature_names), label_column=self.label_column,
            std_init=self.std_init,
        )
        fields.update(changes)
        return Dataset(**fields)

    def reset_distributions(self, std_init: float | None = None) -> "Dataset":
        std = self.std_init if std_init is None else std_init
        return self.replace(mu=self.labels.astype(float), sigma=np.full(self.n, float(std)), std_init=std)

    def evaluation_labels(self) -> np.ndarray:
        return self.labels if self.label_true is None else self.label_true

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.features, self.labels, self.mu, self.sigma):
            h.update(np.ascontiguousarray(arr).tobytes())
        if self.label_true is not None:
            h.update(self.label_true.tobytes())
        return h.hexdigest()

    def equals(self, other: "Dataset") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (self.C == other.C and same(self.features, other.features)
                and same(self.labels, other.labels) and same(self.label_true, other.label_true)
                and same(self.mu, other.mu) and same(self.sigma, other.sigma)
                and self.feature_names == other.feature_names)


def _check_range(labels, C, what):
    bad = np.flatnonzero((labels < 0) | (labels >= C))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{what} {labels[i]} at index {i} is outside 0..{C - 1}")


@dataclass
class SyntheticSpec:
    C: int = 5
    d: int = 4
    n_per_class: int | Sequence[int] = 200
    class_separation: float = 2.0
    class_spread: float = 1.0
    seed: int = 0

    def counts(self) -> list[int]:
        if isinstance(self.n_per_class, int):
            return [self.n_per_class] * self.C
        counts = [int(c) for c in self.n_per_class]
        if len(counts) != self.C:
            raise ConfigurationError(f"n_per_class has {len(counts)} entries for C={self.C}")
        return counts

    def validate(self):
        if self.C < 2:
            raise ConfigurationError("C must be >= 2")
        if self.class_spread <= 0 or self.class_separation <= 0:
            raise ConfigurationError("class_spread and class_separation must be positive")
        if any(c < 0 for c in self.counts()):
            raise ConfigurationError("class counts must be non-negative")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Class ``c`` is an isotropic Gaussian blob centred at ``c * separation * u``,
    with ``u`` the all-ones direction normalised to unit length."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    u = np.ones(spec.d) / np.sqrt(spec.d)
    counts = spec.counts()
    labels = np.repeat(np.arange(spec.C), counts)
    centers = labels[:, None] * spec.class_separation * u[None, :]
    X = centers + spec.class_spread * rng.standard_normal((labels.size, spec.d))
    prov = (f"synthetic C={spec.C} d={spec.d} counts={counts} "
            f"separation={spec.class_separation} spread={spec.class_spread} seed={spec.seed}")
    return Dataset(X, labels, spec.C, label_true=labels.copy(), provenance=prov)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(ds: Dataset, path, *, with_distributions: bool = False) -> None:
    """Columns: id, features..., [mu, sigma], <label column>, [label_true]."""
    header = ["id", *ds.feature_names]
    if with_distributions:
        header += ["mu", "sigma"]
    header.append(ds.label_column)
    if ds.label_true is not None:
        header.append("label_true")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [str(i), *(_fmt(v) for v in ds.features[i])]
            if with_distributions:
                row += [_fmt(ds.mu[i]), _fmt(ds.sigma[i])]
            row.append(str(int(ds.labels[i])))
            if ds.label_true is not None:
                row.append(str(int(ds.label_true[i])))
            w.writerow(row)


def _parse_label(text, lineno, column):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {lineno}: {column}={text!r} is not an integer") from None
    if not value.is_integer():
        raise DataError(f"line {lineno}: {column}={text!r} is not an integer")
    return int(value)


def load_csv(path, C: int | None = None, std_init: float = DEFAULT_STD_INIT) -> Dataset:
    """Read a dataset written by ``write_csv`` (or any CSV with a label column).

    ``C`` defaults to max(label)+1 across the label columns; when given, labels
    outside 0..C-1 are rejected.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    label_cols = [c for c in LABEL_COLUMNS if c in header]
    if not label_cols:
        raise DataError(f"{path}: header needs one of {LABEL_COLUMNS}")
    label_col = label_cols[0]
    feat_cols = [c for c in header if c not in RESERVED]
    pos = {c: header.index(c) for c in header}
    feats, labels, truths, mus, sigmas = [], [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            feats.append([float(row[pos[c]]) for c in feat_cols])
            if "mu" in pos:
                mus.append(float(row[pos["mu"]]))
            if "sigma" in pos:
                sigmas.append(float(row[pos["sigma"]]))
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        labels.append(_parse_label(row[pos[label_col]], lineno, label_col))
        if "label_true" in pos:
            truths.append(_parse_label(row[pos["label_true"]], lineno, "label_true"))
    if not labels:
        raise DataError(f"{path}: no data rows")
    labels = np.array(labels, dtype=np.int64)
    truth = np.array(truths, dtype=np.int64) if "label_true" in pos else None
    if C is None:
        C = int(max(labels.max(), -1 if truth is None else truth.max())) + 1
        C = max(C, 2)
    return Dataset(
        np.array(feats, dtype=float).reshape(len(labels), len(feat_cols)), labels, C,
        label_true=truth,
        mu=np.array(mus) if mus else None,
        sigma=np.array(sigmas) if sigmas else None,
        provenance=str(path), feature_names=feat_cols, label_column=label_col, std_init=std_init,
    )


@dataclass(frozen=True)
class FoldPlan:
    K: int
    assignment: np.ndarray  # sample id -> fold index

    def valid_ids(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def train_ids(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != k)


def stratified_assignment(labels, K: int, seed) -> np.ndarray:
    """Deal each class's shuffled members round-robin over the folds.

    The starting fold rotates with a running offset so the overall fold sizes
    also stay within one of each other.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    out = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        out[members] = (offset + np.arange(members.size)) % K
        offset = (offset + members.size) % K
    return out


def split_folds(ds: Dataset, K: int, seed) -> FoldPlan:
    if K < 2:
        raise ConfigurationError(f"K must be >= 2, got {K}")
    if K > ds.n:
        raise ConfigurationError(f"cannot split {ds.n} samples into {K} folds")
    return FoldPlan(K, stratified_assignment(ds.labels, K, seed))


def train_test_split(ds: Dataset, test_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Stratified hold-out on the evaluation labels."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    y = ds.evaluation_labels()
    rng = np.random.default_rng(seed)
    test = []
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        test.extend(members[: int(round(test_fraction * members.size))].tolist())
    test_mask = np.zeros(ds.n, dtype=bool)
    test_mask[test] = True
    return ds.subset(np.flatnonzero(~test_mask)), ds.subset(np.flatnonzero(test_mask))
