"""Feature screening ahead of forest training.

Two filters: a near-zero-variance rule (frequency ratio + unique percentage)
and greedy pairwise-correlation pruning at a cutoff, plus a class-mean
profiling table.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, DimensionError, ParseError, ValidationError

DOMINANT, FOLLOWER = "dominant", "follower"


@dataclass(frozen=True)
class FeatureMatrix:
    unit_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray  # M x p
    labels: tuple[str, ...] | None = None  # per unit, DOMINANT or FOLLOWER

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        M, p = len(self.unit_ids), len(self.feature_names)
        if vals.shape != (M, p):
            raise DimensionError(f"values shape {vals.shape}, expected ({M}, {p})")
        if self.labels is not None:
            if len(self.labels) != M:
                raise ValidationError(f"{len(self.labels)} labels for {M} units")
            bad = sorted({l for l in self.labels if l not in (DOMINANT, FOLLOWER)})
            if bad:
                raise ValidationError(f"unknown labels {bad}")

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def label_array(self) -> np.ndarray:
        """Labels as 0/1 (1 = dominant)."""
        if self.labels is None:
            raise ValidationError("feature matrix has no labels")
        return np.array([1 if l == DOMINANT else 0 for l in self.labels])

    def select(self, names: list[str]) -> "FeatureMatrix":
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(self.unit_ids, tuple(names), self.values[:, idx], self.labels)


@dataclass
class FilterReport:
    removed_nzv: list[str] = field(default_factory=list)
    removed_corr: list[str] = field(default_factory=list)
    surviving: list[str] = field(default_factory=list)
    cutoff: float | None = None

    def to_record(self) -> dict:
        return {
            "removed_nzv": self.removed_nzv,
            "removed_corr": self.removed_corr,
            "surviving": self.surviving,
            "cutoff": self.cutoff,
        }


def load_feature_csv(path) -> FeatureMatrix:
    """Read a feature CSV with header ``unit,label,<feature...>``; label may be empty."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 3 or header[0].strip() != "unit" or header[1].strip() != "label":
            raise ParseError(f"{path}: header must start with 'unit,label,'")
        names = tuple(h.strip() for h in header[2:])
        units, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            units.append(row[0].strip())
            labels.append(row[1].strip().lower())
            try:
                rows.append([float(c) for c in row[2:]])
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: non-numeric feature cell") from None
    have_labels = any(labels)
    if have_labels and not all(labels):
        missing = [u for u, l in zip(units, labels) if not l]
        raise ValidationError(f"{path}: units without labels: {missing}")
    return FeatureMatrix(
        tuple(units), names, np.asarray(rows, dtype=float),
        tuple(labels) if have_labels else None,
    )


def write_feature_csv(path, fm: FeatureMatrix):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit", "label", *fm.feature_names])
        labels = fm.labels or [""] * fm.n_units
        for u, l, row in zip(fm.unit_ids, labels, fm.values):
            w.writerow([u, l, *[repr(float(v)) for v in row]])


def _freq_ratio(col: np.ndarray) -> float:
    counts = Counter(col.tolist()).most_common(2)
    if len(counts) == 1:
        return math.inf
    return counts[0][1] / counts[1][1]


def near_zero_variance_filter(fm: FeatureMatrix, freq_ratio_cut: float = 19.0,
                              unique_pct_cut: float = 10.0) -> tuple[FeatureMatrix, FilterReport]:
    """Drop column j iff freq ratio > cut AND percent-unique < cut (both must hold)."""
    if fm.n_units < 2:
        raise ValidationError("need at least 2 units")
    M = fm.n_units
    removed, kept = [], []
    for j, name in enumerate(fm.feature_names):
        col = fm.values[:, j]
        ratio = _freq_ratio(col)
        unique_pct = len(np.unique(col)) / M * 100.0
        if ratio > freq_ratio_cut and unique_pct < unique_pct_cut:
            removed.append(name)
        else:
            kept.append(name)
    report = FilterReport(removed_nzv=removed, surviving=kept)
    return fm.select(kept), report


def correlation_prune(fm: FeatureMatrix, cutoff: float = 0.85,
                      keep: list[str] | None = None) -> tuple[FeatureMatrix, FilterReport]:
    """Greedily drop one member of the highest-|r| pair until no pair exceeds cutoff.

    The dropped member is the one with the larger mean absolute correlation
    against all remaining columns (ties go to the later column).  Names in
    ``keep`` are never removed.
    """
    sds = fm.values.std(axis=0, ddof=1)
    bad = [fm.feature_names[j] for j in np.flatnonzero(sds == 0.0)]
    if bad:
        raise DegenerateDataError(
            f"zero-variance columns must be filtered before pruning: {bad}"
        )
    keep_set = set(keep or [])
    unknown = sorted(keep_set - set(fm.feature_names))
    if unknown:
        raise ValidationError(f"keep-list names unknown features: {unknown}")

    corr = np.abs(np.corrcoef(fm.values, rowvar=False))
    if fm.n_features == 1:
        corr = corr.reshape(1, 1)
    np.fill_diagonal(corr, 0.0)
    alive = list(range(fm.n_features))
    removed = []
    while len(alive) > 1:
        sub = corr[np.ix_(alive, alive)]
        # candidate pairs, skipping those where both members are pinned
        best = None  # (r, ai, aj) with ai < aj positions in `alive`
        for a in range(len(alive)):
            for b in range(a + 1, len(alive)):
                if sub[a, b] <= cutoff:
                    continue
                na, nb = fm.feature_names[alive[a]], fm.feature_names[alive[b]]
                if na in keep_set and nb in keep_set:
                    continue
                if best is None or sub[a, b] > best[0]:
                    best = (sub[a, b], a, b)
        if best is None:
            break
        _, a, b = best
        mean_abs = sub.mean(axis=0) * len(alive) / (len(alive) - 1)  # exclude self zero
        na, nb = fm.feature_names[alive[a]], fm.feature_names[alive[b]]
        if na in keep_set:
            drop = b
        elif nb in keep_set:
            drop = a
        elif mean_abs[a] > mean_abs[b]:
            drop = a
        elif mean_abs[b] > mean_abs[a]:
            drop = b
        else:
            drop = b  # tie: later column index
        removed.append(fm.feature_names[alive[drop]])
        del alive[drop]
    surviving = [fm.feature_names[j] for j in alive]
    report = FilterReport(removed_corr=removed, surviving=surviving, cutoff=cutoff)
    return fm.select(surviving), report


def group_mean_differences(fm: FeatureMatrix, order: list[str] | None = None) -> list[dict]:
    """Per-feature class means, optionally ordered by an importance ranking."""
    y = fm.label_array()
    if y.sum() == 0 or y.sum() == y.size:
        raise ValidationError("both classes must be non-empty")
    dom = fm.values[y == 1].mean(axis=0)
    fol = fm.values[y == 0].mean(axis=0)
    rows = {
        name: {"feature": name, "follower_mean": float(f), "dominant_mean": float(d)}
        for name, f, d in zip(fm.feature_names, fol, dom)
    }
    if order is not None:
        unknown = [n for n in order if n not in rows]
        if unknown:
            raise ValidationError(f"ordering names unknown features: {unknown}")
        ordered = [rows[n] for n in order]
        ordered += [rows[n] for n in fm.feature_names if n not in set(order)]
        return ordered
    return [rows[n] for n in fm.feature_names]
