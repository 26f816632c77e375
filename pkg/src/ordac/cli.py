"""Command-line entry point: ``ordac generate|inject|run|evaluate|report``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import experiment as exp
from .data import generate_synthetic, load_csv, write_csv
from .errors import OrdacError
from .noise import build_noise_matrix, inject_noise, noise_summary

log = logging.getLogger("ordac")


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _config(args) -> exp.ExperimentConfig:
    cfg = exp.ExperimentConfig.load(args.config) if args.config else exp.ExperimentConfig()
    overrides = {}
    for item in args.set or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise OrdacError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = _value(val)
    flag_keys = {"method": "method", "tau": "noise.tau", "seed": "model.seed", "data": "dataset.csv",
                 "output_dir": "output_dir"}
    for attr, key in flag_keys.items():
        v = getattr(args, attr, None)
        if v is not None:
            overrides[key] = v
    return cfg.with_overrides(overrides) if overrides else cfg.validate()


def _add_config_flags(p, *, method=True):
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a dotted config key, e.g. correction.E_max=20 (repeatable)")
    if method:
        p.add_argument("--method", choices=exp.METHODS)
        p.add_argument("--tau", type=float)
        p.add_argument("--seed", type=int, help="model seed")
        p.add_argument("--data", help="dataset CSV (replaces the synthetic generator)")


def cmd_generate(args) -> int:
    cfg = _config(args)
    if cfg.dataset.synthetic is None:
        raise OrdacError("generate needs a synthetic dataset section")
    ds = generate_synthetic(cfg.dataset.synthetic)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, args.out)
    print(f"wrote {ds.n} samples (C={ds.C}, d={ds.d}) to {args.out}")
    return 0


def cmd_inject(args) -> int:
    ds = load_csv(args.data)
    truth = ds.evaluation_labels()
    matrix = build_noise_matrix(ds.C, args.tau, args.sigma_n)
    noisy = inject_noise(truth, matrix, args.seed)
    out = ds.replace(labels=noisy, label_true=truth, label_column="label_noisy")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, args.out)
    summary = noise_summary(truth, noisy, ds.C)
    summary.update(tau=args.tau, sigma_n=args.sigma_n, seed=args.seed)
    summary_path = args.summary or str(Path(args.out).with_suffix(".summary.json"))
    Path(summary_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"realized noise rate {summary['realized_rate']:.4f} (target {args.tau}) "
          f"over {summary['n']} labels; summary in {summary_path}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    manifests = exp.run_repeats(cfg, cfg.output_dir, args.repeats)
    for m in manifests:
        print(f"{m['method']} tau={m['tau']:g} seeds={m['seeds']} ok")
    return 0


def cmd_evaluate(args) -> int:
    if args.run_dir:
        run_dir = Path(args.run_dir)
        checkpoints = sorted((run_dir / "models").glob("model_*.npz"))
        test_csv = args.test or run_dir / "test.csv"
        out = Path(args.out or run_dir / "eval_report.json")
    else:
        if not (args.checkpoint and args.test):
            raise OrdacError("evaluate needs --run-dir or both --checkpoint and --test")
        checkpoints, test_csv = args.checkpoint, args.test
        out = Path(args.out or "eval_report.json")
    if not checkpoints:
        raise OrdacError("no checkpoints to evaluate")
    for p in [*checkpoints, test_csv]:
        if not Path(p).is_file():
            raise OrdacError(f"file not found: {p}")
    report = exp.evaluate_checkpoints(checkpoints, test_csv)
    out.write_text(report.to_json())
    out.with_suffix(".csv").write_text(report.to_csv())
    print(f"macro MAE {report.macro_mae:.4f}  macro recall {report.macro_recall:.4f} -> {out}")
    return 0


def format_table(rows) -> str:
    lines = [f"{'tau':>5}  {'method':<9} {'MAE':>17}  {'REC':>17}  runs"]
    for r in rows:
        lines.append(f"{r['tau']:>5.2f}  {r['method']:<9} "
                     f"{r['mae_mean']:.4f} ± {r['mae_std']:.4f}  "
                     f"{r['recall_mean']:.4f} ± {r['recall_std']:.4f}  {r['n_runs']}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    run_dirs = exp.find_run_dirs(args.runs)
    if not run_dirs:
        raise OrdacError("no run directories found")
    rows = exp.aggregate_runs(run_dirs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    table = format_table(rows)
    out.with_suffix(".txt").write_text(table + "\n")
    print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic ordinal dataset CSV")
    _add_config_flags(p, method=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inject", help="inject Gaussian asymmetric label noise into a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--sigma-n", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("run", help="run one method end to end")
    _add_config_flags(p)
    p.add_argument("--output-dir")
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="score checkpoints on a clean test split")
    p.add_argument("--run-dir")
    p.add_argument("--checkpoint", action="append")
    p.add_argument("--test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate runs into a method x tau table")
    p.add_argument("runs", nargs="+", help="run directories or roots to search")
    p.add_argument("--out", default="report.csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "repeats", 1) < 1:
        print("error: --repeats must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (OrdacError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
