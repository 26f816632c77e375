"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary. Multi-seed benchmark runs are shared through module fixtures.
"""
import dataclasses
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ordac.cli import main
from ordac.correction import (CorrectionParams, class_wise_means, correct_predictions, correction_coefficient,
                              filter_uncertain, kfold_train, ordac_train, shift_predictions, train_fldl,
                              train_on_corrected, update_distribution)
from ordac.data import IMBALANCED_COUNTS, split_folds
from ordac.experiment import ExperimentConfig, load_base_dataset, prepare_splits, predict_ranks, run_method
from ordac.label_dist import LabelDistribution, confidence, discretize, expected_rank, kl_divergence
from ordac.metrics import (class_histogram, class_of, label_quality, macro_mae, macro_recall,
                           total_variation)
from ordac.model import MlpRegressor
from ordac.noise import build_noise_matrix, inject_noise, noise_summary
from test_model import grad_check

SEEDS = range(10)
TOL = 1e-6


def record(name, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# 1. equation oracles --------------------------------------------------------

def _gauss_probs(mu, sigma, C):
    w = [math.exp(-((c - mu) ** 2) / (2 * sigma * sigma)) for c in range(C)]
    return [x / sum(w) for x in w]


def _oracle_cases():
    """(label, package value, independent scalar value)."""
    cases = []
    got = discretize(LabelDistribution(2.5, 1.0), 5)
    for c, v in enumerate(_gauss_probs(2.5, 1.0, 5)):
        cases.append((f"discretize(2.5,1,5)[{c}]", got[c], v))
    cases.append(("expected_rank([.1,.2,.3,.4])", expected_rank([0.1, 0.2, 0.3, 0.4]),
                  0 * 0.1 + 1 * 0.2 + 2 * 0.3 + 3 * 0.4))
    cases.append(("kl([1,0],[.5,.5])", kl_divergence([1, 0], [0.5, 0.5]), math.log(2)))
    cases.append(("kl([.5,.5],[.9,.1])", kl_divergence([0.5, 0.5], [0.9, 0.1]),
                  0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)))
    w1, w2 = math.exp(-1 / 18), math.exp(-4 / 18)
    T = build_noise_matrix(3, 0.2, 3.0).entries
    cases += [("T_00", T[0, 0], 0.8), ("T_01", T[0, 1], 0.2 * w1 / (w1 + w2)),
              ("T_02", T[0, 2], 0.2 * w2 / (w1 + w2))]
    p = [0.7, 0.2, 0.1]
    H = -sum(x * math.log(x) for x in p)
    cases.append(("gamma([.7,.2,.1])", float(confidence(p)), 1 - H / math.log(3)))
    # hand-set forward pass
    m = MlpRegressor(2, 3, 2)
    W1 = [[0.5, -1.0], [0.25, 0.75]]
    b1 = [0.1, -0.2]
    W2 = [[1.0, -0.5, 0.2], [-0.3, 0.8, 0.4]]
    b2 = [0.0, 0.1, -0.1]
    m.W1, m.b1, m.W2, m.b2 = map(np.array, (W1, b1, W2, b2))
    x = [1.5, -0.5]
    h = [max(0.0, x[0] * W1[0][j] + x[1] * W1[1][j] + b1[j]) for j in range(2)]
    z = [h[0] * W2[0][c] + h[1] * W2[1][c] + b2[c] for c in range(3)]
    e = [math.exp(v) for v in z]
    out = m.forward(x)
    cases += [(f"forward[{c}]", out[c], e[c] / sum(e)) for c in range(3)]
    # class-wise debiasing / coefficient / update
    means, counts = class_wise_means([1.0, 2.0, 3.0], [0, 0, 1], 3)
    cases += [("mean_0", means[0], 1.5), ("mean_1", means[1], 3.0), ("N_0", counts[0], 2)]
    means, _ = class_wise_means([4.2, 4.8], [4, 4], 5)
    cases.append(("shift(4.2)", shift_predictions([4.2, 4.8], [4, 4], means)[0], 4.2 - (4.5 - 4)))
    cases.append(("lambda(0.5, 1/e)", correction_coefficient(0.5, 1, math.e, epsilon=0.0)[0],
                  0.5 / (1 - (-1))))
    new = update_distribution(LabelDistribution(3.0, 0.75), 2.0, 0.2, 0.8, 5)
    cases += [("sigma_new", new.sigma, 0.75 + 0.2 * (1 - 0.75)), ("mu_new", new.mu, 3 - 0.8)]
    # three-sample fold traced by hand
    fix = correct_predictions([1.6, 0.8, 2.5], [0.5, 0.2, 0.9], [1.0, 1.0, 3.0], [0.75] * 3,
                              CorrectionParams(), 5)
    mean1 = (1.6 + 0.8) / 2
    shifted = [1.6 - (mean1 - 1), 0.8 - (mean1 - 1), 2.5 - (2.5 - 3)]
    for i, (g, mu, n_c) in enumerate(zip([0.5, 0.2, 0.9], [1.0, 1.0, 3.0], [2, 2, 1])):
        lam = g / (1 - math.log(n_c / 3 + 1e-8))
        err = shifted[i] - mu
        cases.append((f"fold mu[{i}]", fix.mu[i], mu + 0.8 * lam * err))
        cases.append((f"fold sigma[{i}]", fix.sigma[i], 0.75 + 0.2 * lam * (abs(err) - 0.75)))
    # metrics
    cases.append(("macro_mae example", macro_mae([0, 1, 2], [0, 2, 2], 3), (0 + 0.5) / 2))
    cases.append(("macro_recall example", macro_recall([0, 0, 2], [0, 1, 2], 3), (1 + 0 + 1) / 3))
    mae, rmse = label_quality([1.5, 2.0], [1, 3])
    cases += [("label MAE", mae, (0.5 + 1) / 2), ("label RMSE", rmse, math.sqrt((0.25 + 1) / 2))]
    return cases


def test_c01_equation_oracles():
    cases = _oracle_cases()
    bad = [(n, float(a), float(b)) for n, a, b in cases if abs(float(a) - float(b)) > TOL]
    record("C1 equation oracles", not bad, f"{len(cases) - len(bad)}/{len(cases)} within {TOL:g}"
           + (f"; failing {bad}" if bad else ""))


# 2. gradient check -------------------------------------------------------------

def test_c02_gradient_check():
    worst = [grad_check(1000 + s) for s in range(20)]
    record("C2 gradient check", max(worst) < 1e-4,
           f"20 random tiny models, worst relative error {max(worst):.2e} (tol 1e-4)")


# 3. noise realisation ---------------------------------------------------------

@pytest.mark.parametrize("tau", [0.2, 0.4])
def test_c03_noise_realization(tau):
    N, C = 100_000, 5
    labels = np.random.default_rng(0).integers(0, C, N)
    T = build_noise_matrix(C, tau, 3.0)
    noisy = inject_noise(labels, T, 0)
    s = noise_summary(labels, noisy, C)
    prior = np.bincount(labels, minlength=C) / N
    expected = np.array([sum(prior[i] * T.entries[i, j] for i in range(C) for j in range(C) if abs(i - j) == k)
                         for k in range(1, C)])
    observed = np.array(s["flip_distance_counts"][1:]) / N
    rel = np.abs(observed - expected) / expected
    ok = abs(s["realized_rate"] - tau) <= 0.01 and rel.max() <= 0.05
    record(f"C3 noise realization tau={tau}", ok,
           f"rate {s['realized_rate']:.4f} (±0.01), worst distance-bin rel. error {rel.max():.3f} (≤0.05)")


# 4. re-centering identity ---------------------------------------------------------

def test_c04_recentering_identity():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(500):
        n, C = rng.integers(1, 200), rng.integers(2, 10)
        preds = rng.normal(C / 2, C, n)
        classes = rng.integers(0, C, n)
        means, counts = class_wise_means(preds, classes, C)
        shifted = shift_predictions(preds, classes, means)
        for c in np.flatnonzero(counts):
            worst = max(worst, abs(shifted[classes == c].mean() - c))
    record("C4 re-centering identity", worst <= 1e-9, f"500 fuzzed sets, worst |mean - c| = {worst:.1e}")


# shared benchmark runs --------------------------------------------------------

def _config(seed, tau, counts=200, debias=True):
    cfg = ExperimentConfig().with_overrides({
        "noise.tau": tau, "correction.debias": debias,
        "dataset.synthetic.n_per_class": counts,
    })
    return cfg.shifted_seeds(seed)


def _benchmark(seed, tau, counts=200, debias=True, variants=True):
    cfg = _config(seed, tau, counts, debias)
    train, test, _ = prepare_splits(cfg, load_base_dataset(cfg))
    p, mp = cfg.correction, cfg.model
    res = ordac_train(train, split_folds(train, cfg.folds.K, cfg.folds.seed), p, mp)
    y = test.label_true
    out = {
        "train": train,
        "res": res,
        "ordac": macro_mae(predict_ranks(res.models, test.features), y, test.C),
        "baseline": macro_mae(predict_ranks([train_fldl(train, p.E_max, mp)], test.features), y, test.C),
    }
    if variants:
        out["ordac_c"] = macro_mae(predict_ranks([train_on_corrected(res.clean, p, mp)], test.features), y, test.C)
        kept, _ = filter_uncertain(res.clean, p.std_init)
        out["ordac_r"] = macro_mae(predict_ranks([train_on_corrected(kept, p, mp)], test.features), y, test.C)
    return out


@pytest.fixture(scope="module")
def balanced_04():
    return [_benchmark(s, 0.4) for s in SEEDS]


@pytest.fixture(scope="module")
def balanced_00():
    return [_benchmark(s, 0.0, variants=False) for s in SEEDS]


@pytest.fixture(scope="module")
def imbalanced_04():
    return [(_benchmark(s, 0.4, list(IMBALANCED_COUNTS), True, False),
             _benchmark(s, 0.4, list(IMBALANCED_COUNTS), False, False)) for s in SEEDS]


# 5. null corrections -------------------------------------------------------------

def _same_models(a, b):
    return all(np.array_equal(x.params[k], y.params[k]) for x, y in zip(a, b) for k in x.params)


def test_c05_null_corrections():
    cfg = _config(0, 0.4)
    train, _, _ = prepare_splits(cfg, load_base_dataset(cfg))
    plan = split_folds(train, cfg.folds.K, cfg.folds.seed)
    reference = kfold_train(train, plan, cfg.correction.E_max, cfg.model)
    details = []
    for label, params in [("E_corr>E_max", dataclasses.replace(cfg.correction, E_corr=cfg.correction.E_max + 1)),
                          ("alpha=beta=0", dataclasses.replace(cfg.correction, alpha_base=0.0, beta_base=0.0))]:
        res = ordac_train(train, plan, params, cfg.model)
        ok = (np.array_equal(res.clean.mu, train.mu) and np.array_equal(res.clean.sigma, train.sigma)
              and _same_models(res.models, reference))
        details.append((label, ok))
    record("C5 null-correction equivalences", all(ok for _, ok in details),
           ", ".join(f"{l}: {'identical' if ok else 'DIFFERENT'}" for l, ok in details))


# 6. label quality -------------------------------------------------------------

def test_c06_label_quality(balanced_04):
    wins, pairs = 0, []
    for run in balanced_04:
        train = run["train"]
        noisy = label_quality(train.labels, train.label_true)[0]
        fixed = label_quality(run["res"].clean.mu, train.label_true)[0]
        wins += fixed < noisy
        pairs.append(f"{noisy:.3f}->{fixed:.3f}")
    record("C6 label-quality improvement (tau=0.4)", wins >= 9,
           f"corrected MAE < noisy MAE in {wins}/10 seeds [{', '.join(pairs)}]")


# 7. model quality --------------------------------------------------------------

def test_c07_model_quality(balanced_04, balanced_00):
    def count(method):
        return sum(r[method] < r["baseline"] for r in balanced_04)

    wins = {m: count(m) for m in ("ordac", "ordac_c", "ordac_r")}
    means = {m: np.mean([r[m] for r in balanced_04]) for m in ("baseline", "ordac", "ordac_c", "ordac_r")}
    gap0 = float(np.mean([r["ordac"] for r in balanced_00]) - np.mean([r["baseline"] for r in balanced_00]))
    ok = all(w >= 9 for w in wins.values()) and gap0 <= 0.05
    record("C7 model-quality improvement", ok,
           "tau=0.4 wins vs baseline " + ", ".join(f"{m} {w}/10" for m, w in wins.items())
           + " | mean macro-MAE " + ", ".join(f"{m} {v:.3f}" for m, v in means.items())
           + f" | tau=0 mean(ordac)-mean(baseline) = {gap0:+.3f} (≤0.05)")


# 8. debiasing ablation ------------------------------------------------------------

def test_c08_debiasing_ablation(imbalanced_04):
    mae_wins = tv_wins = 0
    tvs = []
    for on, off in imbalanced_04:
        mae_wins += on["ordac"] < off["ordac"]
        true_hist = class_histogram(on["train"].label_true, 5)
        tv_on = total_variation(class_histogram(class_of(on["res"].clean.mu, 5), 5), true_hist)
        tv_off = total_variation(class_histogram(class_of(off["res"].clean.mu, 5), 5), true_hist)
        tv_wins += tv_on < tv_off
        tvs.append(f"{tv_on:.2f}/{tv_off:.2f}")
    record("C8 debiasing ablation", mae_wins >= 8 and tv_wins >= 9,
           f"test macro-MAE lower with debiasing {mae_wins}/10 (≥8); "
           f"histogram TV lower {tv_wins}/10 (≥9) [on/off {', '.join(tvs)}]")


# 9. ORDAC_R filter ----------------------------------------------------------------

def test_c09_filter_matches_sigma_history():
    cfg = _config(0, 0.4).with_overrides({"method": "ordac_r"})
    train, _, _ = prepare_splits(cfg, load_base_dataset(cfg))
    result = run_method(cfg, train)
    final_sigma = result.ordac.sigma_trace[-1]
    expected = set(np.flatnonzero(final_sigma >= cfg.correction.std_init).tolist())
    got = set(result.removed_ids.tolist())
    record("C9 ORDAC_R filter", got == expected and np.array_equal(result.ordac.sigma_trace[0], train.sigma),
           f"removed {len(got)} ids; equals {{i : sigma_final >= std_init}}: {got == expected}")


# 10. reproducibility -------------------------------------------------------------

def test_c10_reproducibility(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["run", "--method", "ordac", "--tau", "0.4", "--output-dir", str(first)]) == 0
    assert main(["run", "--config", str(first / "config.json"), "--output-dir", str(second)]) == 0
    same = {f: (first / f).read_bytes() == (second / f).read_bytes()
            for f in ("corrected_labels.csv", "eval_report.json", "eval_report.csv")}
    record("C10 reproducibility", all(same.values()),
           ", ".join(f"{f} {'identical' if s else 'DIFFERS'}" for f, s in same.items()))
