"""End-to-end acceptance suite.

One test per acceptance criterion, in order.  Each is verified against an
independent oracle (zooming grid search, mpmath quantiles, brute-force pair
counting, dense hand arithmetic) or a planted ground truth.
"""

import hashlib
import json
import math
import os
import time

import numpy as np
import pytest

from dominet.forest import ForestConfig, fit_forest, mda_importance
from dominet.lasso import LassoConfig, fit_rigorous_lasso, nodewise_regressions, rigorous_lambda
from dominet.metrics import ConfusionTable, confusion_metrics, roc_auc
from dominet.network import (
    CoefficientMatrix,
    column_norms,
    concentration,
    dominant_count,
    stack_coefficients,
)
from dominet.panel import standardize
from dominet.preprocess import FeatureMatrix, correlation_prune, near_zero_variance_filter
from dominet.synth import (
    SynthClassSpec,
    SynthPanelSpec,
    generate_classification_data,
    generate_dominant_panel,
)
from dominet.cli import main as cli_main
from oracles import auc_pair_counting, grid_search_lasso, lasso_objective, normal_quantile_mpmath


def test_criterion_01_lasso_matches_grid_oracle():
    """25 random instances (p <= 3, T = 50): objective within 1e-8 of a grid
    oracle and KKT conditions at 1e-6, in under 30 seconds."""
    start = time.monotonic()
    cfg = LassoConfig()
    for i in range(25):
        rng = np.random.default_rng(1000 + i)
        T, p = 50, (i % 3) + 1
        X = rng.normal(size=(T, p))
        beta_true = rng.choice([0.0, 1.0, -0.5], size=p)
        y = X @ beta_true + rng.normal(scale=0.5, size=T)

        fit = fit_rigorous_lasso(y, X, cfg)
        _, oracle_obj = grid_search_lasso(y, X, fit.lam, fit.psi)
        ours = lasso_objective(y, X, fit.beta, fit.lam, fit.psi)
        assert ours <= oracle_obj + 1e-8

        # KKT at 1e-6: equality on the active set, boundedness elsewhere
        grad = 2.0 / T * (X.T @ (y - X @ fit.beta))
        bound = fit.lam / T * fit.psi
        for j in range(p):
            if fit.beta[j] != 0.0:
                assert abs(grad[j] - bound[j] * np.sign(fit.beta[j])) < 1e-6
            else:
                assert abs(grad[j]) <= bound[j] + 1e-6
    assert time.monotonic() - start < 30.0


def test_criterion_02_lambda_matches_mpmath_quantiles():
    """Plugin penalty 2 c sqrt(n) Phi^{-1}(1 - gamma/(2p)) against a 50-digit
    mpmath quantile, 1e-6 relative error, 20 combinations incl. defaults."""
    combos = []
    for n in (50, 199, 1000, 77):
        for p in (1, 29, 76, 374):
            combos.append((n, p, 1.1, None))  # default gamma = 0.1 / ln(n)
    combos += [(199, 29, 1.0, 0.05), (199, 29, 1.5, 0.2),
               (500, 100, 1.1, 0.01), (100, 10, 2.0, 0.5)]
    assert len(combos) == 20
    for n, p, c, gamma in combos:
        cfg = LassoConfig(c=c, gamma=gamma)
        got = rigorous_lambda(n, p, cfg)
        g = gamma if gamma is not None else 0.1 / math.log(n)
        expected = 2.0 * c * math.sqrt(n) * normal_quantile_mpmath(1.0 - g / (2 * p))
        assert abs(got - expected) <= 1e-6 * abs(expected)


def test_criterion_03_concentration_ranking_hand_oracle():
    """3x3 worked example: K, column norms, and k reproduce dense arithmetic
    to 1e-12."""
    B = np.array([
        [0.0, 0.5, 0.0],
        [0.2, 0.0, 0.0],
        [0.0, 0.0, 0.0],
    ])
    variances = np.array([1.0, 4.0, 1.0])
    cm = CoefficientMatrix(("u1", "u2", "u3"), B)
    km = concentration(cm, variances)

    K_dense = np.diag(1.0 / variances) @ (np.eye(3) - B)
    assert np.allclose(km.K, K_dense, atol=1e-12)
    assert np.allclose(
        km.K, [[1.0, -0.5, 0.0], [-0.05, 0.25, 0.0], [0.0, 0.0, 1.0]], atol=1e-12
    )

    norms = column_norms(km)
    dense_norms = np.sqrt((K_dense**2).sum(axis=0))
    assert np.allclose(norms, dense_norms, atol=1e-12)
    assert np.allclose(norms, [math.sqrt(1.0025), math.sqrt(0.3125), 1.0], atol=1e-12)
    assert abs(norms[0] - 1.00125) < 1e-5
    assert abs(norms[1] - 0.55902) < 1e-5

    ranking = dominant_count(norms, km.unit_ids)
    assert ranking.ordered_units == ("u1", "u3", "u2")
    assert ranking.k == 2

    # published growth-ratio example: sorted norms (10, 9.5, 9, 1, 0.9) -> k = 3
    r = dominant_count(np.array([10.0, 9.5, 9.0, 1.0, 0.9]), tuple("abcde"))
    assert np.allclose(r.growth_ratios, [10 / 9.5, 9.5 / 9, 9.0, 1 / 0.9], atol=1e-12)
    assert r.k == 3


@pytest.mark.parametrize("m", [1, 2, 3])
def test_criterion_04_planted_dominance_recovery(m):
    """N=30, T=200 synthetic panels with m planted dominant units: the
    nodewise pipeline (adaptive penalty weights) returns k=m and ranks the
    planted units top-m in at least 90 of 100 seeds."""
    hits = 0
    for seed in range(100):
        spec = SynthPanelSpec(n_dominant=m, seed=seed)
        panel, truth = generate_dominant_panel(spec)
        sp = standardize(panel)
        fits = nodewise_regressions(sp, LassoConfig(), method="adaptive", threads=4)
        cm = stack_coefficients(fits, sp.unit_ids)
        km = concentration(cm, np.array([f.residual_variance for f in fits]))
        ranking = dominant_count(column_norms(km), km.unit_ids)
        if ranking.k == m and set(ranking.ordered_units[:m]) == truth:
            hits += 1
    assert hits >= 90, f"m={m}: planted recovery in only {hits}/100 seeds"


def test_criterion_05_reference_confusion_derivations():
    """Counts (13, 15, 5, 41): PPV 0.464286, sensitivity 0.722222,
    NPV 0.891304 at 1e-6; specificity asserted as 41/56 = 0.732143.

    Note: the reference tabulation reports specificity 0.732143, which equals
    TN / (TN + FP) = 41/56 computed from these counts; an alternative reading
    (41/46) would be the NPV denominator and does not match.  We assert the
    count-consistent value.
    """
    m = confusion_metrics(ConfusionTable(tp=13, fp=15, fn=5, tn=41))
    assert abs(m.ppv - 0.464286) < 1e-6
    assert abs(m.tpr - 0.722222) < 1e-6
    assert abs(m.npv - 0.891304) < 1e-6
    assert abs(m.tnr - 41 / 56) < 1e-12
    assert abs(m.tnr - 0.732143) < 1e-6


def test_criterion_06_auc_equals_pair_counting():
    """50 random score/label vectors (M <= 20): rank-based AUC equals
    exhaustive positive-negative pair counting exactly."""
    for seed in range(50):
        rng = np.random.default_rng(2000 + seed)
        M = int(rng.integers(4, 21))
        labels = np.zeros(M, dtype=int)
        labels[: max(1, M // 3)] = 1
        rng.shuffle(labels)
        # quantized scores so ties are exercised
        scores = np.round(rng.uniform(size=M), 1)
        auc, _ = roc_auc(scores, labels)
        assert auc == auc_pair_counting(scores, labels)


def _forest_runs(fm, n_runs, n_trees=500, seed0=0):
    cfg = ForestConfig(n_trees=n_trees)
    out = []
    for r in range(n_runs):
        run_seed = seed0 + r
        model = fit_forest(fm, cfg, run_seed=run_seed)
        covered = model.covered
        auc, _ = roc_auc(model.oob_probabilities[covered], model.labels[covered])
        mda = mda_importance(model, fm, np.random.default_rng([run_seed, 1 << 32]))
        out.append((auc, mda))
    return out


@pytest.fixture(scope="module")
def signal_runs():
    spec = SynthClassSpec(n_units=74, n_features=375, n_informative=3,
                          effect_size=1.5, seed=0)
    fm, informative = generate_classification_data(spec)
    start = time.monotonic()
    runs = _forest_runs(fm, n_runs=20)
    elapsed = time.monotonic() - start
    idx = sorted(fm.feature_names.index(n) for n in informative)
    return runs, idx, elapsed


def test_criterion_07_signal_auc(signal_runs):
    """M=74, p=375, 3 informative features at effect size 1.5: mean OOB AUC
    over 20 runs >= 0.90 at n_trees=500."""
    runs, _, elapsed = signal_runs
    assert elapsed < 300.0
    mean_auc = float(np.mean([auc for auc, _ in runs]))
    assert mean_auc >= 0.90, f"mean OOB AUC {mean_auc:.4f} < 0.90"


def test_criterion_07_signal_mda_top5(signal_runs):
    """All 3 planted features rank in the MDA top-5 in >= 95% of the runs."""
    runs, informative_idx, _ = signal_runs
    hits = 0
    for _, mda in runs:
        top5 = set(np.argsort(-mda, kind="stable")[:5].tolist())
        if set(informative_idx) <= top5:
            hits += 1
    assert hits >= 0.95 * len(runs), f"planted trio in MDA top-5 in only {hits}/{len(runs)} runs"


@pytest.fixture(scope="module")
def null_runs():
    spec = SynthClassSpec(n_units=74, n_features=375, n_informative=3,
                          effect_size=0.0, seed=0)
    fm, _ = generate_classification_data(spec)
    assessed = _forest_runs(fm, n_runs=50, seed0=0)
    band_runs = _forest_runs(fm, n_runs=20, seed0=10_000)
    return assessed, band_runs


def test_criterion_08_null_auc(null_runs):
    """Zero effect size: mean OOB AUC over 50 runs lies in [0.45, 0.55]."""
    assessed, _ = null_runs
    mean_auc = float(np.mean([auc for auc, _ in assessed]))
    assert 0.45 <= mean_auc <= 0.55, f"null mean AUC {mean_auc:.4f}"


def test_criterion_08_null_mda_band(null_runs):
    """No feature's MDA escapes the Monte-Carlo null band (alpha = 0.01,
    pooled over 20 disjoint-seed null runs) in more than 5% of (feature, run)
    cases across the 50 assessed runs."""
    assessed, band_runs = null_runs
    pool = np.concatenate([mda for _, mda in band_runs])
    lo, hi = np.quantile(pool, [0.005, 0.995])
    mdas = np.stack([mda for _, mda in assessed])
    exceed = float(((mdas < lo) | (mdas > hi)).mean())
    assert exceed <= 0.05, f"null-band exceedance {exceed:.4f} > 0.05"


def test_criterion_09_preprocessing_contracts():
    """Boundary behavior of both filters, the three-column pruning example,
    and pruning idempotence over 20 random matrices."""
    # near-zero variance at the boundary: ratio 19 is kept, 24 is removed
    def fm_of(cols, names):
        vals = np.column_stack(cols)
        ids = tuple(f"u{i}" for i in range(vals.shape[0]))
        return FeatureMatrix(ids, tuple(names), vals)

    col_95_5 = np.array([0.0] * 95 + [1.0] * 5)
    col_96_4 = np.array([0.0] * 96 + [1.0] * 4)
    _, report = near_zero_variance_filter(fm_of([col_95_5, col_96_4], ["keep", "drop"]))
    assert report.removed_nzv == ["drop"]
    assert report.surviving == ["keep"]

    # A~B worst pair, B also correlated with C: B has the larger mean |r|
    # and is removed; the remaining A-C correlation sits below the cutoff
    rng = np.random.default_rng(7)
    n = 4000
    target = np.array([
        [1.00, 0.92, 0.80],
        [0.92, 1.00, 0.88],
        [0.80, 0.88, 1.00],
    ])
    Z = rng.standard_normal((n, 3))
    Z = (Z - Z.mean(axis=0)) / Z.std(axis=0, ddof=1)
    Q, _ = np.linalg.qr(Z)
    vals = Q @ np.linalg.cholesky(target).T
    fm = fm_of([vals[:, 0], vals[:, 1], vals[:, 2]], ["A", "B", "C"])
    pruned, report = correlation_prune(fm, cutoff=0.85)
    assert report.removed_corr == ["B"]
    assert pruned.feature_names == ("A", "C")

    # idempotence on 20 random matrices with planted correlated pairs
    for seed in range(20):
        rng = np.random.default_rng(3000 + seed)
        M, p = 60, 10
        base = rng.normal(size=(M, 4))
        cols = [base[:, j % 4] + rng.normal(scale=rng.uniform(0.05, 2.0), size=M)
                for j in range(p)]
        fm = fm_of(cols, [f"f{j}" for j in range(p)])
        once, _ = correlation_prune(fm, cutoff=0.85)
        twice, rep2 = correlation_prune(once, cutoff=0.85)
        assert rep2.removed_corr == []
        assert twice.feature_names == once.feature_names


def _dir_digest(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


def test_criterion_10_thread_count_invariance(tmp_path):
    """network and classify produce byte-identical reports at 1, 4, and 8
    worker threads with a fixed seed."""
    synth_cfg = tmp_path / "synth.cfg"
    synth_cfg.write_text(
        "synth_kind = panel\nsynth_n_units = 12\nsynth_n_periods = 150\n"
        "synth_n_dominant = 1\nseed = 3\n"
    )
    data = tmp_path / "data"
    assert cli_main(["synth", "--config", str(synth_cfg), "--out", str(data)]) == 0

    feat_cfg = tmp_path / "synthf.cfg"
    feat_cfg.write_text(
        "synth_kind = features\nsynth_n_units = 24\nsynth_n_features = 15\n"
        "synth_n_informative = 2\nsynth_effect_size = 2.0\n"
        "synth_class_ratio = 0.33\nseed = 5\n"
    )
    assert cli_main(["synth", "--config", str(feat_cfg), "--out", str(data)]) == 0

    net_cfg = tmp_path / "net.cfg"
    net_cfg.write_text("lasso_method = adaptive\nseed = 1\n")
    cls_cfg = tmp_path / "cls.cfg"
    cls_cfg.write_text("n_trees = 50\nn_runs = 5\ntop_k = 5\nseed = 1\n")

    digests_net, digests_cls = [], []
    for threads in (1, 4, 8):
        out_n = tmp_path / f"net{threads}"
        assert cli_main(["network", str(data / "panel.csv"), "--config", str(net_cfg),
                         "--threads", str(threads), "--out", str(out_n)]) == 0
        digests_net.append(_dir_digest(out_n))

        out_c = tmp_path / f"cls{threads}"
        assert cli_main(["classify", str(data / "features.csv"), "--config", str(cls_cfg),
                         "--threads", str(threads), "--out", str(out_c)]) == 0
        digests_cls.append(_dir_digest(out_c))

    assert digests_net[0] == digests_net[1] == digests_net[2]
    assert digests_cls[0] == digests_cls[1] == digests_cls[2]
