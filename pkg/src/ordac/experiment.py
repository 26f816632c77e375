"""Config-driven experiment runs: dataset -> noise -> method -> artifacts.

A run directory holds everything needed to re-execute it:

    config.json            resolved ExperimentConfig
    manifest.json          dataset hash, seeds, artifact list
    train.csv, test.csv    the (noisy) training pool and the clean test split
    noise_summary.json     realised flip statistics on the training pool
    corrected_labels.csv   id, features, mu, sigma, label_original, label_true
    history.json           per-epoch statistics (correction methods)
    trace.npz              per-epoch mu/sigma for every training sample
    models/model_<k>.npz   checkpoints
    eval_report.json/.csv  test-set scores
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import correction as corr
from .data import (Dataset, SyntheticSpec, generate_synthetic, load_csv, split_folds,
                   train_test_split, write_csv)
from .errors import ConfigurationError, DataError
from .label_dist import expected_rank_many
from .metrics import EvalReport, class_of, evaluate, label_quality
from .model import MlpRegressor, ModelParams, ensemble_predict
from .noise import build_noise_matrix, inject_noise, noise_summary

log = logging.getLogger(__name__)

METHODS = ("baseline", "ordac", "ordac_c", "ordac_r")
OUTPUT_ROOT_ENV = "ORDAC_OUTPUT_ROOT"


@dataclass
class DatasetConfig:
    synthetic: SyntheticSpec | None = field(default_factory=SyntheticSpec)
    csv: str | None = None
    test_fraction: float = 0.2
    split_seed: int = 0


@dataclass
class NoiseConfig:
    tau: float = 0.0
    sigma_n: float = 3.0
    seed: int = 1


@dataclass
class FoldConfig:
    K: int = 5
    seed: int = 0


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    method: str = "ordac"
    correction: corr.CorrectionParams = field(default_factory=corr.CorrectionParams)
    model: ModelParams = field(default_factory=ModelParams)
    folds: FoldConfig = field(default_factory=FoldConfig)
    output_dir: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        ds_raw = dict(raw.get("dataset") or {})
        syn = ds_raw.pop("synthetic", {} if "csv" not in ds_raw else None)
        ds = DatasetConfig(synthetic=None if syn is None else _build(SyntheticSpec, syn),
                           **_checked(DatasetConfig, ds_raw))
        cfg = cls(
            dataset=ds,
            noise=_build(NoiseConfig, raw.get("noise") or {}),
            method=raw.get("method", "ordac"),
            correction=_build(corr.CorrectionParams, raw.get("correction") or {}),
            model=_build(ModelParams, raw.get("model") or {}),
            folds=_build(FoldConfig, raw.get("folds") or {}),
            output_dir=raw.get("output_dir"),
        )
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)

    def validate(self) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if (self.dataset.synthetic is None) == (self.dataset.csv is None):
            raise ConfigurationError("dataset needs exactly one of 'synthetic' or 'csv'")
        if self.dataset.csv is not None and not Path(self.dataset.csv).exists():
            raise ConfigurationError(f"dataset file not found: {self.dataset.csv}")
        if self.dataset.synthetic is not None:
            self.dataset.synthetic.validate()
        if not 0.0 <= self.noise.tau < 1.0:
            raise ConfigurationError(f"tau must lie in [0, 1), got {self.noise.tau}")
        self.correction.validate()
        return self

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply dotted-key overrides such as ``{"noise.tau": 0.4}``."""
        raw = self.to_dict()
        for key, value in overrides.items():
            node = raw
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    node[p] = {}
                node = node[p]
            node[parts[-1]] = value
        if "dataset.csv" in overrides and overrides["dataset.csv"] is not None:
            raw["dataset"]["synthetic"] = None
        return ExperimentConfig.from_dict(raw)

    def seeds(self) -> dict:
        s = {"split": self.dataset.split_seed, "noise": self.noise.seed,
             "model": self.model.seed, "folds": self.folds.seed}
        if self.dataset.synthetic is not None:
            s["data"] = self.dataset.synthetic.seed
        return s

    def shifted_seeds(self, offset: int) -> "ExperimentConfig":
        return self.with_overrides({
            **({"dataset.synthetic.seed": self.dataset.synthetic.seed + offset}
               if self.dataset.synthetic is not None else {}),
            "dataset.split_seed": self.dataset.split_seed + offset,
            "noise.seed": self.noise.seed + offset,
            "model.seed": self.model.seed + offset,
            "folds.seed": self.folds.seed + offset,
        })


def _checked(cls, raw: dict) -> dict:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return raw


def _build(cls, raw: dict):
    try:
        return cls(**_checked(cls, dict(raw)))
    except TypeError as exc:
        raise ConfigurationError(f"{cls.__name__}: {exc}") from None


def default_output_dir(cfg: ExperimentConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / f"{cfg.method}_tau{cfg.noise.tau:g}_seed{cfg.model.seed}"


def load_base_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset.csv is not None:
        return load_csv(cfg.dataset.csv, std_init=cfg.correction.std_init)
    return generate_synthetic(cfg.dataset.synthetic)


def prepare_splits(cfg: ExperimentConfig, base: Dataset) -> tuple[Dataset, Dataset, dict]:
    """Hold out a clean test split, then noise the training pool only."""
    train, test = train_test_split(base, cfg.dataset.test_fraction, cfg.dataset.split_seed)
    test = test.replace(labels=test.evaluation_labels())
    truth = train.evaluation_labels()
    if cfg.noise.tau > 0:
        matrix = build_noise_matrix(base.C, cfg.noise.tau, cfg.noise.sigma_n)
        noisy = inject_noise(truth, matrix, cfg.noise.seed)
    else:
        noisy = train.labels
    train = train.replace(labels=noisy, label_true=truth, label_column="label_noisy")
    train = train.reset_distributions(cfg.correction.std_init)
    summary = noise_summary(truth, noisy, base.C)
    summary.update(tau=cfg.noise.tau, sigma_n=cfg.noise.sigma_n, seed=cfg.noise.seed)
    return train, test, summary


@dataclass
class MethodResult:
    models: list
    clean: Dataset
    history: list = field(default_factory=list)
    ordac: corr.OrdacResult | None = None
    removed_ids: np.ndarray | None = None


def run_method(cfg: ExperimentConfig, train: Dataset) -> MethodResult:
    p, mp = cfg.correction, cfg.model
    if cfg.method == "baseline":
        return MethodResult([corr.train_fldl(train, p.E_max, mp)], train)
    plan = split_folds(train, cfg.folds.K, cfg.folds.seed)
    res = corr.ordac_train(train, plan, p, mp)
    if cfg.method == "ordac":
        return MethodResult(res.models, res.clean, res.history, res)
    if cfg.method == "ordac_c":
        return MethodResult([corr.train_on_corrected(res.clean, p, mp)], res.clean, res.history, res)
    kept, removed = corr.filter_uncertain(res.clean, p.std_init)
    if kept.n == 0:
        raise DataError("every sample was filtered as uncertain; nothing left to train on")
    return MethodResult([corr.train_on_corrected(kept, p, mp)], res.clean, res.history, res, removed)


def predict_ranks(models, X) -> np.ndarray:
    return expected_rank_many(ensemble_predict(models, X))


def score(models, test: Dataset) -> EvalReport:
    return evaluate(predict_ranks(models, test.features), test.evaluation_labels(), test.C)


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Execute one configured run and write its artifacts; returns the manifest."""
    cfg.validate()
    out = Path(out_dir or cfg.output_dir or default_output_dir(cfg))
    out.mkdir(parents=True, exist_ok=True)
    (out / "models").mkdir(exist_ok=True)
    cfg = dataclasses.replace(cfg, output_dir=str(out))

    base = load_base_dataset(cfg)
    train, test, summary = prepare_splits(cfg, base)
    result = run_method(cfg, train)
    report = score(result.models, test)

    (out / "config.json").write_text(cfg.to_json())
    write_csv(train, out / "train.csv")
    write_csv(test.replace(label_column="label"), out / "test.csv")
    _dump(out / "noise_summary.json", summary)
    clean = result.clean.replace(label_column="label_original")
    write_csv(clean, out / "corrected_labels.csv", with_distributions=True)
    for k, m in enumerate(result.models):
        m.save(out / "models" / f"model_{k}.npz")
    (out / "eval_report.json").write_text(report.to_json())
    (out / "eval_report.csv").write_text(report.to_csv())

    truth = train.label_true
    lq_noisy = label_quality(train.labels, truth)
    lq_clean = label_quality(result.clean.mu, truth)
    change = np.abs(class_of(result.clean.mu, train.C) - train.labels)
    history = {
        "method": cfg.method,
        "epochs": result.history,
        "label_quality": {"noisy": {"mae": lq_noisy[0], "rmse": lq_noisy[1]},
                          "corrected": {"mae": lq_clean[0], "rmse": lq_clean[1]}},
        "class_counts_initial": np.bincount(train.labels, minlength=train.C).tolist(),
        "class_counts_true": np.bincount(truth, minlength=train.C).tolist(),
        "class_counts_final": np.bincount(class_of(result.clean.mu, train.C), minlength=train.C).tolist(),
        "class_change_histogram": np.bincount(change, minlength=train.C).tolist(),
        "removed_ids": None if result.removed_ids is None else result.removed_ids.tolist(),
    }
    _dump(out / "history.json", history)
    artifacts = ["config.json", "train.csv", "test.csv", "noise_summary.json", "corrected_labels.csv",
                 "eval_report.json", "eval_report.csv", "history.json",
                 *(f"models/model_{k}.npz" for k in range(len(result.models)))]
    if result.ordac is not None:
        np.savez(out / "trace.npz", mu=result.ordac.mu_trace, sigma=result.ordac.sigma_trace)
        artifacts.append("trace.npz")
    manifest = {
        "method": cfg.method,
        "tau": cfg.noise.tau,
        "seeds": cfg.seeds(),
        "dataset_hash": base.content_hash(),
        "dataset_provenance": base.provenance,
        "n_train": train.n,
        "n_test": test.n,
        "n_models": len(result.models),
        "artifacts": artifacts,
    }
    _dump(out / "manifest.json", manifest)
    validate_run_dir(out)
    log.info("run written to %s (macro MAE %.4f)", out, report.macro_mae)
    return manifest


def validate_run_dir(run_dir) -> None:
    """Check every declared artifact exists and the main tables parse."""
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise DataError(f"{run_dir}: unreadable manifest ({exc})") from None
    missing = [a for a in manifest["artifacts"] if not (run_dir / a).is_file()]
    if missing:
        raise DataError(f"{run_dir}: missing artifacts {missing}")
    load_csv(run_dir / "corrected_labels.csv")
    EvalReport.from_json((run_dir / "eval_report.json").read_text())


def load_models(run_dir) -> list[MlpRegressor]:
    paths = sorted((Path(run_dir) / "models").glob("model_*.npz"),
                   key=lambda p: int(p.stem.split("_")[1]))
    if not paths:
        raise DataError(f"{run_dir}: no model checkpoints")
    return [MlpRegressor.load(p) for p in paths]


def evaluate_checkpoints(checkpoints, test_csv) -> EvalReport:
    models = [MlpRegressor.load(p) for p in checkpoints]
    test = load_csv(test_csv, C=models[0].C)
    return score(models, test)


def run_repeats(cfg: ExperimentConfig, out_dir, repeats: int) -> list[dict]:
    """Run ``repeats`` copies with every seed shifted by the repeat index."""
    out_dir = Path(out_dir or cfg.output_dir or default_output_dir(cfg))
    if repeats == 1:
        return [run_experiment(cfg, out_dir)]
    manifests = [run_experiment(cfg.shifted_seeds(r), out_dir / f"rep_{r:03d}") for r in range(repeats)]
    rows = [EvalReport.from_json((out_dir / f"rep_{r:03d}" / "eval_report.json").read_text())
            for r in range(repeats)]
    agg = {
        "method": cfg.method,
        "tau": cfg.noise.tau,
        "repeats": repeats,
        "macro_mae": _mean_std([r.macro_mae for r in rows]),
        "macro_recall": _mean_std([r.macro_recall for r in rows]),
    }
    _dump(out_dir / "summary.json", agg)
    return manifests


def _mean_std(values) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "std": float(a.std(ddof=1)) if a.size > 1 else 0.0}


def find_run_dirs(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if (p / "manifest.json").is_file():
            found.append(p)
        elif p.is_dir():
            found.extend(sorted(m.parent for m in p.rglob("manifest.json")))
        else:
            raise DataError(f"not a run directory: {p}")
    return sorted(set(found))


def aggregate_runs(run_dirs) -> list[dict]:
    """Group runs by (method, tau) into mean/std rows ordered like the comparison table."""
    seen = {}
    groups: dict[tuple, list[EvalReport]] = {}
    for d in run_dirs:
        manifest = json.loads((d / "manifest.json").read_text())
        cfg = json.loads((d / "config.json").read_text())
        cfg.pop("output_dir", None)
        key = json.dumps(cfg, sort_keys=True)
        if key in seen:
            raise ConfigurationError(f"seed collision: {d} repeats the configuration and seeds of {seen[key]}")
        seen[key] = d
        rep = EvalReport.from_json((d / "eval_report.json").read_text())
        groups.setdefault((manifest["method"], float(manifest["tau"])), []).append(rep)
    order = {m: i for i, m in enumerate(METHODS)}
    rows = []
    for (method, tau), reps in sorted(groups.items(), key=lambda kv: (kv[0][1], order.get(kv[0][0], 99))):
        mae = _mean_std([r.macro_mae for r in reps])
        rec = _mean_std([r.macro_recall for r in reps])
        rows.append({"method": method, "tau": tau, "n_runs": len(reps),
                     "mae_mean": mae["mean"], "mae_std": mae["std"],
                     "recall_mean": rec["mean"], "recall_std": rec["std"]})
    return rows
