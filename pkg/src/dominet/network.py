"""Coefficient/concentration matrices, column-norm ranking, and the growth criterion.

The stacked nodewise coefficients B (zero diagonal) and per-unit residual
precisions combine into K = diag(1/sigma_i^2) (I - B).  Units are ranked by
the L2 norm of their K column; the dominant-unit count is the position of the
largest ratio between consecutive sorted norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DimensionError, ValidationError
from .lasso import NodewiseFit


@dataclass(frozen=True)
class CoefficientMatrix:
    unit_ids: tuple[str, ...]
    B: np.ndarray  # N x N, zero diagonal

    def __post_init__(self):
        if self.B.shape != (len(self.unit_ids),) * 2:
            raise DimensionError(f"B shape {self.B.shape} vs {len(self.unit_ids)} units")
        if np.any(np.diag(self.B) != 0.0):
            raise ValidationError("B diagonal must be exactly zero")


@dataclass(frozen=True)
class ConcentrationMatrix:
    unit_ids: tuple[str, ...]
    K: np.ndarray
    residual_precisions: np.ndarray  # 1/sigma_i^2


@dataclass(frozen=True)
class DominanceRanking:
    ordered_units: tuple[str, ...]  # descending column norm
    norms: np.ndarray               # in ranking order
    growth_ratios: np.ndarray       # norms[i]/norms[i+1], length N-1
    k: int

    def to_record(self) -> dict:
        return {
            "units": list(self.ordered_units),
            "norms": [float(v) for v in self.norms],
            "ratios": [float(v) for v in self.growth_ratios],
            "k": self.k,
            "dominant_units": list(self.ordered_units[: self.k]),
        }


@dataclass(frozen=True)
class EdgeList:
    edges: list[tuple[str, str, float]]  # (source, target, coefficient)


def stack_coefficients(fits: list[NodewiseFit], unit_ids) -> CoefficientMatrix:
    """Row i gets fit i's coefficients with a zero inserted at position i."""
    unit_ids = tuple(unit_ids)
    N = len(unit_ids)
    if len(fits) != N:
        raise DimensionError(f"{len(fits)} fits for {N} units")
    B = np.zeros((N, N))
    for i, fit in enumerate(fits):
        if fit.beta.size != N - 1:
            raise DimensionError(
                f"fit {i} has {fit.beta.size} coefficients, expected {N - 1}"
            )
        B[i, :i] = fit.beta[:i]
        B[i, i + 1:] = fit.beta[i:]
    return CoefficientMatrix(unit_ids, B)


def concentration(cm: CoefficientMatrix, variances: np.ndarray) -> ConcentrationMatrix:
    """K = diag(1/sigma_i^2) (I - B)."""
    variances = np.asarray(variances, dtype=float)
    N = len(cm.unit_ids)
    if variances.shape != (N,):
        raise DimensionError(f"expected {N} variances, got {variances.shape}")
    bad = np.flatnonzero(variances <= 0.0)
    if bad.size:
        names = [cm.unit_ids[i] for i in bad]
        raise DegenerateDataError(f"non-positive residual variance for unit(s) {names}")
    precisions = 1.0 / variances
    K = precisions[:, None] * (np.eye(N) - cm.B)
    return ConcentrationMatrix(cm.unit_ids, K, precisions)


def column_norms(km: ConcentrationMatrix) -> np.ndarray:
    """Euclidean norm of each column of K, in unit order."""
    return np.linalg.norm(km.K, axis=0)


def dominant_count(norms: np.ndarray, unit_ids) -> DominanceRanking:
    """Rank by descending norm and place k at the largest consecutive-norm ratio.

    Ties in the sort keep original unit order; a zero successor norm counts as
    an infinite ratio and ends the scan there.
    """
    norms = np.asarray(norms, dtype=float)
    unit_ids = tuple(unit_ids)
    N = norms.size
    if N < 2:
        raise ValidationError(f"need at least 2 units, got {N}")
    if np.any(norms < 0):
        raise ValidationError("norms must be non-negative")
    if not np.any(norms > 0):
        raise DegenerateDataError("all column norms are zero")
    order = np.argsort(-norms, kind="stable")
    sorted_norms = norms[order]

    ratios = np.empty(N - 1)
    best_k, best_ratio = 1, -math.inf
    for i in range(N - 1):
        if sorted_norms[i + 1] == 0.0:
            ratios[i:] = math.inf
            best_k, best_ratio = i + 1, math.inf
            break
        ratios[i] = sorted_norms[i] / sorted_norms[i + 1]
        if ratios[i] > best_ratio:
            best_k, best_ratio = i + 1, ratios[i]
    return DominanceRanking(
        ordered_units=tuple(unit_ids[j] for j in order),
        norms=sorted_norms,
        growth_ratios=ratios,
        k=best_k,
    )


def edge_list(cm: CoefficientMatrix) -> EdgeList:
    """One edge per nonzero off-diagonal entry: unit j -> unit i when B[i,j] != 0."""
    rows, cols = np.nonzero(cm.B)
    return EdgeList([
        (cm.unit_ids[j], cm.unit_ids[i], float(cm.B[i, j]))
        for i, j in zip(rows, cols)
    ])


@dataclass(frozen=True)
class NormDensityDiagnostic:
    correlation: float
    slope: float
    slope_se: float
    r_squared: float
    n: int


def norm_density_diagnostic(norms, densities) -> NormDensityDiagnostic:
    """OLS of norms on cumulative incidence densities plus the Pearson correlation."""
    norms = np.asarray(norms, dtype=float)
    densities = np.asarray(densities, dtype=float)
    if norms.shape != densities.shape or norms.ndim != 1:
        raise DimensionError(f"shape mismatch {norms.shape} vs {densities.shape}")
    n = norms.size
    if n < 3:
        raise ValidationError(f"need at least 3 points, got {n}")
    sx = densities.std(ddof=1)
    sy = norms.std(ddof=1)
    if sx == 0.0 or sy == 0.0:
        raise DegenerateDataError("zero variance in norms or densities")
    xc = densities - densities.mean()
    yc = norms - norms.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ yc) / sxx
    intercept = norms.mean() - slope * densities.mean()
    resid = norms - (intercept + slope * densities)
    rss = float(resid @ resid)
    tss = float(yc @ yc)
    slope_se = math.sqrt(rss / (n - 2) / sxx)
    corr = float(xc @ yc) / math.sqrt(sxx * tss)
    return NormDensityDiagnostic(
        correlation=corr,
        slope=slope,
        slope_se=slope_se,
        r_squared=1.0 - rss / tss,
        n=n,
    )
