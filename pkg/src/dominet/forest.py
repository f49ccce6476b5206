"""Stratified random-forest classifier with OOB evaluation and importance measures.

Trees are grown on per-class bootstrap samples (each class resampled with
replacement at its own size, so every bag keeps the class balance), splits
minimize Gini impurity over mtry randomly drawn candidate features, and each
unit's out-of-bag probability is the fraction of positive votes among trees
whose bag excluded it.  Importance comes in two flavours: MDI (weighted
impurity decrease accumulated over splits) and MDA (OOB accuracy drop under
per-tree permutation of a feature among that tree's OOB units).

Everything is deterministic given the master seed: tree t of run r draws its
randomness from seed material (seed + r, t), independent of scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .metrics import ConfusionTable, MetricSet, confusion_metrics, optimal_cutoff, roc_auc
from .preprocess import FeatureMatrix


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 1500
    mtry: int | None = None  # None = floor(sqrt(p)) of the matrix passed in
    min_node_size: int = 1
    stratified: bool = True
    seed: int = 0
    n_runs: int = 2000
    top_k: int = 30
    selection_mode: str = "top_k"  # or "any_split"

    def __post_init__(self):
        if self.n_trees < 1 or self.min_node_size < 1 or self.n_runs < 1:
            raise ValidationError("n_trees, min_node_size, n_runs must be positive")
        if self.selection_mode not in ("top_k", "any_split"):
            raise ValidationError(f"unknown selection_mode {self.selection_mode!r}")

    def resolve_mtry(self, p: int) -> int:
        m = self.mtry if self.mtry is not None else int(math.isqrt(p))
        if not 1 <= m <= p:
            raise ValidationError(f"mtry={m} out of range for p={p}")
        return m


@dataclass
class Tree:
    # parallel node arrays; feature == -1 marks a leaf
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray        # n_nodes x 2 weighted class counts (cols: neg, pos)
    inbag: np.ndarray         # per-unit bootstrap multiplicities
    mdi: np.ndarray           # per-feature sum of node_weight * impurity decrease
    votes_leaf: np.ndarray    # per-node majority class (ties -> negative)

    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature >= 0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Vectorized class votes for the rows of X."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            f = self.feature[node]
            active = np.flatnonzero(f >= 0)
            if active.size == 0:
                break
            go_left = X[active, f[active]] <= self.threshold[node[active]]
            node[active] = np.where(go_left, self.left[node[active]], self.right[node[active]])
        return self.votes_leaf[node]


def _gini_contrib(c1: np.ndarray, n: np.ndarray) -> np.ndarray:
    # n * gini(node) = n - (c1^2 + (n-c1)^2) / n
    return n - (c1**2 + (n - c1) ** 2) / n


def fit_tree(fm: FeatureMatrix, inbag: np.ndarray, cfg: ForestConfig,
             rng: np.random.Generator) -> Tree:
    """Grow one tree on the weighted bootstrap sample encoded by ``inbag``."""
    X = fm.values
    y = fm.label_array()
    p = fm.n_features
    mtry = cfg.resolve_mtry(p)
    idx_all = np.flatnonzero(inbag > 0)
    if idx_all.size == 0:
        raise ValidationError("empty in-bag sample")
    w_all = inbag[idx_all].astype(float)

    feature, threshold, left, right, counts = [], [], [], [], []
    mdi = np.zeros(p)
    total_weight = float(w_all.sum())

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        counts.append((0.0, 0.0))
        return len(feature) - 1

    def grow(node_id, idx, w):
        yi = y[idx]
        n1 = float(w[yi == 1].sum())
        n = float(w.sum())
        counts[node_id] = (n - n1, n1)
        if n1 == 0.0 or n1 == n or n <= cfg.min_node_size:
            return
        feats = np.sort(rng.choice(p, size=mtry, replace=False))
        Xs = X[np.ix_(idx, feats)]
        order = np.argsort(Xs, axis=0, kind="stable")
        V = np.take_along_axis(Xs, order, axis=0)
        W = w[order]
        W1 = (w * yi)[order]
        cumw = np.cumsum(W, axis=0)[:-1]
        cum1 = np.cumsum(W1, axis=0)[:-1]
        nr = n - cumw
        nr1 = n1 - cum1
        parent = _gini_contrib(np.array([n1]), np.array([n]))[0]
        decrease = (parent - _gini_contrib(cum1, cumw) - _gini_contrib(nr1, nr)) / n
        valid = V[1:] > V[:-1]
        decrease = np.where(valid, decrease, -np.inf)
        if decrease.size == 0 or not np.isfinite(decrease).any():
            return
        # tie rule: lower feature index, then lower threshold -> column-major scan
        flat = np.argmax(decrease.T)
        col, row = divmod(flat, decrease.shape[0])
        best = decrease[row, col]
        if best <= 0.0:
            return
        f = int(feats[col])
        thr = 0.5 * (V[row, col] + V[row + 1, col])
        go_left = X[idx, f] <= thr
        mdi[f] += (n / total_weight) * best
        lid, rid = new_node(), new_node()
        feature[node_id] = f
        threshold[node_id] = thr
        left[node_id] = lid
        right[node_id] = rid
        grow(lid, idx[go_left], w[go_left])
        grow(rid, idx[~go_left], w[~go_left])

    root = new_node()
    grow(root, idx_all, w_all)

    counts_arr = np.asarray(counts)
    return Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        counts=counts_arr,
        inbag=inbag,
        mdi=mdi,
        votes_leaf=(counts_arr[:, 1] > counts_arr[:, 0]).astype(np.int8),
    )


@dataclass
class ForestModel:
    trees: list[Tree]
    config: ForestConfig
    feature_names: tuple[str, ...]
    oob_probabilities: np.ndarray  # nan where never OOB
    oob_coverage: np.ndarray
    labels: np.ndarray

    @property
    def covered(self) -> np.ndarray:
        return self.oob_coverage > 0

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Fraction of positive votes over all trees (new-data prediction)."""
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict(X)
        return votes / len(self.trees)


def _draw_inbag(y: np.ndarray, stratified: bool, rng: np.random.Generator) -> np.ndarray:
    M = y.size
    inbag = np.zeros(M, dtype=np.intp)
    if stratified:
        for cls in (0, 1):
            members = np.flatnonzero(y == cls)
            draws = rng.integers(0, members.size, size=members.size)
            np.add.at(inbag, members[draws], 1)
    else:
        draws = rng.integers(0, M, size=M)
        np.add.at(inbag, draws, 1)
    return inbag


def fit_forest(fm: FeatureMatrix, cfg: ForestConfig, run_seed: int | None = None) -> ForestModel:
    """Fit cfg.n_trees trees on stratified bootstrap bags and collect OOB votes."""
    y = fm.label_array()
    for cls, name in ((1, "dominant"), (0, "follower")):
        if (y == cls).sum() < 2:
            raise ValidationError(f"class {name!r} has fewer than 2 units")
    cfg.resolve_mtry(fm.n_features)
    seed = cfg.seed if run_seed is None else run_seed

    pos_votes = np.zeros(fm.n_units)
    coverage = np.zeros(fm.n_units, dtype=np.intp)
    trees = []
    X = fm.values
    for t in range(cfg.n_trees):
        rng = np.random.default_rng([seed, t])
        inbag = _draw_inbag(y, cfg.stratified, rng)
        tree = fit_tree(fm, inbag, cfg, rng)
        trees.append(tree)
        oob = np.flatnonzero(inbag == 0)
        if oob.size:
            votes = tree.predict(X[oob])
            pos_votes[oob] += votes
            coverage[oob] += 1

    with np.errstate(invalid="ignore"):
        probs = np.where(coverage > 0, pos_votes / np.maximum(coverage, 1), np.nan)
    return ForestModel(trees, cfg, fm.feature_names, probs, coverage, y)


def mdi_importance(model: ForestModel) -> np.ndarray:
    """Per-feature impurity-decrease sums averaged over trees."""
    return np.mean([t.mdi for t in model.trees], axis=0)


def mda_importance(model: ForestModel, fm: FeatureMatrix,
                   rng: np.random.Generator) -> np.ndarray:
    """OOB accuracy drop when a feature is permuted among each tree's OOB units.

    Trees in which a feature never splits contribute exactly 0 for it.
    """
    X = fm.values
    y = model.labels
    p = fm.n_features
    deltas = np.zeros(p)
    for tree in model.trees:
        oob = np.flatnonzero(tree.inbag == 0)
        if oob.size == 0:
            continue
        Xo = X[oob]
        yo = y[oob]
        base_acc = float((tree.predict(Xo) == yo).mean())
        for f in tree.used_features():
            perm = rng.permutation(oob.size)
            Xp = Xo.copy()
            Xp[:, f] = Xo[perm, f]
            acc = float((tree.predict(Xp) == yo).mean())
            deltas[f] += base_acc - acc
    return deltas / len(model.trees)


@dataclass
class RunAggregate:
    feature_names: tuple[str, ...]
    n_runs: int
    mdi_mean: np.ndarray
    mda_mean: np.ndarray
    topk_frequency: np.ndarray           # runs in which the feature made the run's top-K
    confusion_mean: ConfusionTable       # unfloored means
    confusion_floored: ConfusionTable    # means rounded down, as tabulated
    metrics_mean: dict[str, float]
    metrics_se: dict[str, float]
    auc_mean: float
    auc_se: float
    oob_error_mean: float
    oob_error_se: float
    cutoff_mean: float
    zero_coverage_runs: int = 0          # runs where some unit had no OOB coverage
    metrics_floored: MetricSet = field(default=None)

    def importance_rows(self) -> list[dict]:
        return [
            {
                "feature": name,
                "mdi_mean": float(self.mdi_mean[j]),
                "mda_mean": float(self.mda_mean[j]),
                "topk_frequency": int(self.topk_frequency[j]),
            }
            for j, name in enumerate(self.feature_names)
        ]


def _single_run(fm, cfg, run_seed):
    model = fit_forest(fm, cfg, run_seed=run_seed)
    covered = model.covered
    scores = model.oob_probabilities[covered]
    labels = model.labels[covered]
    auc, _ = roc_auc(scores, labels)
    cutoff, mset, ct = optimal_cutoff(scores, labels)
    mdi = mdi_importance(model)
    mda = mda_importance(model, fm, np.random.default_rng([run_seed, 1 << 32]))
    if cfg.selection_mode == "top_k":
        k = min(cfg.top_k, fm.n_features)
        top = np.argsort(-mdi, kind="stable")[:k]
        selected = np.zeros(fm.n_features, dtype=bool)
        selected[top] = True
    else:
        selected = np.zeros(fm.n_features, dtype=bool)
        for tree in model.trees:
            selected[tree.used_features()] = True
    return {
        "auc": auc,
        "cutoff": cutoff,
        "ct": ct,
        "metrics": mset,
        "mdi": mdi,
        "mda": mda,
        "selected": selected,
        "zero_coverage": int((~covered).sum() > 0),
    }


def multi_run(fm: FeatureMatrix, cfg: ForestConfig, threads: int = 1) -> RunAggregate:
    """Aggregate n_runs forests with run seeds seed + run index."""
    run_seeds = [cfg.seed + r for r in range(cfg.n_runs)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda s: _single_run(fm, cfg, s), run_seeds))
    else:
        runs = [_single_run(fm, cfg, s) for s in run_seeds]

    def mean_se(values):
        arr = np.asarray(values, dtype=float)
        se = arr.std(ddof=1) / math.sqrt(arr.size) if arr.size > 1 else 0.0
        return float(arr.mean()), float(se)

    aucs = [r["auc"] for r in runs]
    errors = [r["metrics"].error_rate for r in runs]
    metric_names = ("ppv", "npv", "tpr", "tnr", "balanced_accuracy", "error_rate")
    metrics_mean, metrics_se = {}, {}
    for name in metric_names:
        vals = [getattr(r["metrics"], name) for r in runs]
        metrics_mean[name], metrics_se[name] = mean_se(vals)

    ct_mean = ConfusionTable(
        tp=float(np.mean([r["ct"].tp for r in runs])),
        fp=float(np.mean([r["ct"].fp for r in runs])),
        fn=float(np.mean([r["ct"].fn for r in runs])),
        tn=float(np.mean([r["ct"].tn for r in runs])),
    )
    ct_floor = ConfusionTable(
        tp=math.floor(ct_mean.tp), fp=math.floor(ct_mean.fp),
        fn=math.floor(ct_mean.fn), tn=math.floor(ct_mean.tn),
    )
    auc_mean, auc_se = mean_se(aucs)
    err_mean, err_se = mean_se(errors)
    return RunAggregate(
        feature_names=fm.feature_names,
        n_runs=cfg.n_runs,
        mdi_mean=np.mean([r["mdi"] for r in runs], axis=0),
        mda_mean=np.mean([r["mda"] for r in runs], axis=0),
        topk_frequency=np.sum([r["selected"] for r in runs], axis=0),
        confusion_mean=ct_mean,
        confusion_floored=ct_floor,
        metrics_mean=metrics_mean,
        metrics_se=metrics_se,
        auc_mean=auc_mean,
        auc_se=auc_se,
        oob_error_mean=err_mean,
        oob_error_se=err_se,
        cutoff_mean=float(np.mean([r["cutoff"] for r in runs])),
        zero_coverage_runs=sum(r["zero_coverage"] for r in runs),
        metrics_floored=confusion_metrics(ct_floor),
    )


def tune_mtry(fm: FeatureMatrix, cfg: ForestConfig, grid: list[int],
              n_folds: int = 5, n_repeats: int = 5) -> tuple[int, list[dict]]:
    """Stratified n_folds-fold CV repeated n_repeats times; best mean validation AUC wins."""
    y = fm.label_array()
    for cls in (0, 1):
        if (y == cls).sum() < n_folds:
            raise ValidationError(f"class {cls} too small for {n_folds}-fold CV")
    bad = [m for m in grid if m > fm.n_features or m < 1]
    if bad:
        raise ValidationError(f"mtry candidates out of range: {bad}")

    def fold_assignments(rng):
        folds = np.empty(y.size, dtype=np.intp)
        for cls in (0, 1):
            members = rng.permutation(np.flatnonzero(y == cls))
            folds[members] = np.arange(members.size) % n_folds
        return folds

    from dataclasses import replace as dc_replace

    table = []
    best = None
    for m in sorted(set(grid)):
        aucs = []
        for rep in range(n_repeats):
            rng = np.random.default_rng([cfg.seed, 7, rep])
            folds = fold_assignments(rng)
            for fold in range(n_folds):
                val = folds == fold
                train_fm = FeatureMatrix(
                    tuple(np.array(fm.unit_ids)[~val]),
                    fm.feature_names,
                    fm.values[~val],
                    tuple(np.array(fm.labels)[~val]),
                )
                sub_cfg = dc_replace(cfg, mtry=m)
                model = fit_forest(train_fm, sub_cfg, run_seed=cfg.seed + 1000 * rep + fold)
                probs = model.predict_proba(fm.values[val])
                auc, _ = roc_auc(probs, y[val])
                aucs.append(auc)
        mean_auc = float(np.mean(aucs))
        table.append({"mtry": m, "cv_auc_mean": mean_auc,
                      "cv_auc_se": float(np.std(aucs, ddof=1) / math.sqrt(len(aucs)))})
        if best is None or mean_auc > best[0]:
            best = (mean_auc, m)
    return best[1], table
