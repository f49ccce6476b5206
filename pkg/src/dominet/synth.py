"""Synthetic data with known ground truth.

Panels plant m dominant units whose innovations load onto every follower;
levels are cumulative sums so that first-differencing recovers the factor
structure.  Classification matrices plant a handful of informative features
shifted between classes, optionally with an equicorrelated block to exercise
correlation pruning.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .panel import Panel
from .preprocess import DOMINANT, FOLLOWER, FeatureMatrix


@dataclass(frozen=True)
class SynthPanelSpec:
    n_units: int = 30
    n_periods: int = 200
    n_dominant: int = 2
    loading_range: tuple[float, float] = (0.8, 1.2)
    spatial_rho: float = 0.3
    noise_sd: float = 0.5
    seed: int = 0
    dominant_correlation: float = 0.0  # off by default; mutually independent factors

    def __post_init__(self):
        if not 1 <= self.n_dominant < self.n_units:
            raise ValidationError("need 1 <= n_dominant < n_units")
        if self.n_periods < 3:
            raise ValidationError("need at least 3 periods")
        if not 0.0 <= self.spatial_rho < 1.0:
            raise ValidationError("spatial_rho must be in [0, 1)")
        if self.noise_sd <= 0:
            raise ValidationError("noise_sd must be positive")


@dataclass(frozen=True)
class SynthClassSpec:
    n_units: int = 74
    n_features: int = 375
    n_informative: int = 3
    effect_size: float = 1.5
    class_ratio: float = 18 / 74
    correlated_block: tuple[int, float] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_informative > self.n_features:
            raise ValidationError("n_informative must be <= n_features")
        if not 0.0 < self.class_ratio < 1.0:
            raise ValidationError("class_ratio must be in (0, 1)")
        if self.correlated_block is not None:
            size, rho = self.correlated_block
            if size > self.n_features - self.n_informative:
                raise ValidationError("correlated block does not fit among noise features")
            if not 0.0 <= rho < 1.0:
                raise ValidationError("block correlation must be in [0, 1)")


def _unit_ids(n: int) -> tuple[str, ...]:
    return tuple(f"u{i:03d}" for i in range(n))


def _dates(n: int) -> tuple[str, ...]:
    start = datetime.date(2020, 3, 1)
    return tuple((start + datetime.timedelta(days=i)).isoformat() for i in range(n))


def generate_dominant_panel(spec: SynthPanelSpec) -> tuple[Panel, set[str]]:
    """Panel of levels whose first differences follow the planted factor model."""
    rng = np.random.default_rng(spec.seed)
    N, T, m = spec.n_units, spec.n_periods, spec.n_dominant
    ids = _unit_ids(N)
    dominant_pos = np.sort(rng.choice(N, size=m, replace=False))
    follower_pos = np.setdiff1d(np.arange(N), dominant_pos)
    nf = follower_pos.size

    factors = rng.standard_normal((T, m))
    if spec.dominant_correlation > 0.0 and m > 1:
        rho = spec.dominant_correlation
        common = rng.standard_normal((T, 1))
        factors = np.sqrt(rho) * common + np.sqrt(1 - rho) * factors

    loadings = rng.uniform(*spec.loading_range, size=(nf, m))
    eta = rng.standard_normal((T, nf)) * spec.noise_sd  # follower innovations
    neighbor_avg = 0.5 * (np.roll(eta, 1, axis=1) + np.roll(eta, -1, axis=1))

    innovations = np.empty((T, N))
    innovations[:, dominant_pos] = factors
    innovations[:, follower_pos] = factors @ loadings.T + spec.spatial_rho * neighbor_avg + eta

    values = np.cumsum(innovations, axis=0)
    panel = Panel(ids, _dates(T), values)
    return panel, {ids[i] for i in dominant_pos}


def generate_classification_data(spec: SynthClassSpec) -> tuple[FeatureMatrix, set[str]]:
    """Labeled feature matrix with planted informative features (unit-sd noise)."""
    rng = np.random.default_rng(spec.seed)
    M, p = spec.n_units, spec.n_features
    n_pos = max(2, round(spec.class_ratio * M))
    if n_pos > M - 2:
        raise ValidationError("class_ratio leaves fewer than 2 followers")
    labels = np.zeros(M, dtype=int)
    labels[rng.choice(M, size=n_pos, replace=False)] = 1

    values = rng.standard_normal((M, p))
    informative = list(range(spec.n_informative))
    values[np.ix_(labels == 1, informative)] += spec.effect_size

    if spec.correlated_block is not None:
        size, rho = spec.correlated_block
        start = spec.n_informative
        common = rng.standard_normal((M, 1))
        block = np.sqrt(rho) * common + np.sqrt(1 - rho) * rng.standard_normal((M, size))
        values[:, start:start + size] = block

    names = tuple(f"f{j:04d}" for j in range(p))
    fm = FeatureMatrix(
        _unit_ids(M), names, values,
        tuple(DOMINANT if l else FOLLOWER for l in labels),
    )
    return fm, {names[j] for j in informative}
