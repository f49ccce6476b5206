"""Per-unit L1-penalized regressions with plugin (data-driven) or adaptive penalty.

The estimator minimizes, for each unit i regressed on all other units,

    (1/T) * sum_t (y_t - X_t b)^2 + (lambda/T) * sum_j psi_j |b_j|

by cyclic coordinate descent.  The plugin penalty level is
lambda = 2 c sqrt(n) Phi^{-1}(1 - gamma/(2p)) and the loadings psi_j are
estimated from the residuals of the current fit, alternating fit and
loading updates until the loadings settle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy.stats import norm

from .errors import DimensionError, NumericError, ValidationError
from .panel import StandardizedPanel

PSI_FLOOR = 1e-12
ADAPTIVE_BETA_FLOOR = 1e-8


@dataclass(frozen=True)
class LassoConfig:
    c: float = 1.1
    gamma: float | None = None  # None = default rule 0.1/ln(n)
    max_loading_iters: int = 15
    loading_tol: float = 1e-4
    cd_tol: float = 1e-8
    cd_max_iters: int = 10_000
    # stub for the autocorrelation-robust loading variant; not implemented
    autocorrelation_robust: bool = False

    def __post_init__(self):
        if self.c < 1.0:
            raise ValidationError(f"slack parameter c must be >= 1, got {self.c}")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ValidationError(f"gamma must be in (0,1), got {self.gamma}")
        if self.loading_tol <= 0 or self.cd_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_loading_iters < 1 or self.cd_max_iters < 1:
            raise ValidationError("iteration caps must be positive")

    def resolve_gamma(self, n: int) -> float:
        return self.gamma if self.gamma is not None else 0.1 / math.log(n)


@dataclass
class NodewiseFit:
    unit_index: int
    beta: np.ndarray          # length p, exact zeros
    mask: np.ndarray          # bool, beta != 0
    lam: float
    psi: np.ndarray
    residual_variance: float  # (1/T) sum of squared residuals of the final fit
    loading_iterations: int
    converged: bool
    unit_id: str | None = None

    def to_record(self) -> dict:
        nz = np.flatnonzero(self.mask)
        return {
            "unit_index": self.unit_index,
            "unit_id": self.unit_id,
            "lambda": self.lam,
            "psi": self.psi.tolist(),
            "nonzero": [[int(j), float(self.beta[j])] for j in nz],
            "n_regressors": int(self.beta.size),
            "residual_variance": self.residual_variance,
            "loading_iterations": self.loading_iterations,
            "converged": self.converged,
        }


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0)."""
    if t < 0:
        raise ValidationError(f"threshold must be >= 0, got {t}")
    return math.copysign(max(abs(z) - t, 0.0), z)


def rigorous_lambda(n: int, p: int, cfg: LassoConfig) -> float:
    """Plugin penalty level 2 c sqrt(n) Phi^{-1}(1 - gamma/(2p))."""
    if n < 2 or p < 1:
        raise ValidationError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    gamma = cfg.resolve_gamma(n)
    tail = gamma / (2 * p)
    if tail >= 0.5:
        raise NumericError(f"gamma/(2p) = {tail} >= 0.5: quantile level not in upper tail")
    return 2.0 * cfg.c * math.sqrt(n) * float(norm.ppf(1.0 - tail))


def penalty_loadings(X: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    """Heteroskedasticity-robust loadings psi_j = sqrt((1/T) sum_t X_tj^2 e_t^2)."""
    X = np.asarray(X, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    if X.ndim != 2 or residuals.ndim != 1 or X.shape[0] != residuals.size:
        raise DimensionError(f"X is {X.shape}, residuals length {residuals.size}")
    psi = np.sqrt((X**2 * residuals[:, None] ** 2).mean(axis=0))
    return np.maximum(psi, PSI_FLOOR)


def lasso_objective(y: np.ndarray, X: np.ndarray, beta: np.ndarray,
                    lam: float, psi: np.ndarray) -> float:
    T = y.size
    r = y - X @ beta
    return float(r @ r) / T + lam / T * float(psi @ np.abs(beta))


@numba.njit(cache=True, nogil=True)
def _cd_kernel(Xty, G, diag, thresh, beta, s, tol, max_iters):  # pragma: no cover
    p = Xty.size
    iters = 0
    converged = False
    active = np.empty(p, dtype=np.intp)
    while iters < max_iters:
        # full sweep
        max_delta = 0.0
        for j in range(p):
            if diag[j] == 0.0:
                continue
            old = beta[j]
            rho = Xty[j] - s[j] + diag[j] * old
            mag = abs(rho) - thresh[j]
            new = 0.0
            if mag > 0.0:
                new = mag / diag[j] if rho > 0.0 else -mag / diag[j]
            if new != old:
                beta[j] = new
                d = new - old
                for i in range(p):
                    s[i] += d * G[j, i]
                if abs(d) > max_delta:
                    max_delta = abs(d)
        iters += 1
        if max_delta < tol:
            converged = True
            break
        n_active = 0
        for j in range(p):
            if beta[j] != 0.0:
                active[n_active] = j
                n_active += 1
        # passes over the active set until it settles
        while iters < max_iters:
            max_delta = 0.0
            for a in range(n_active):
                j = active[a]
                if diag[j] == 0.0:
                    continue
                old = beta[j]
                rho = Xty[j] - s[j] + diag[j] * old
                mag = abs(rho) - thresh[j]
                new = 0.0
                if mag > 0.0:
                    new = mag / diag[j] if rho > 0.0 else -mag / diag[j]
                if new != old:
                    beta[j] = new
                    d = new - old
                    for i in range(p):
                        s[i] += d * G[j, i]
                    if abs(d) > max_delta:
                        max_delta = abs(d)
            iters += 1
            if max_delta < tol:
                break
    return converged


def _cd_gram(Xty, G, lam, psi, cfg, beta0=None):
    """Cyclic CD on the penalized objective in Gram form. Returns (beta, converged).

    Maintains s = G @ beta incrementally; a full sweep alternates with passes
    over the active (nonzero) set until no coefficient moves by cd_tol.
    """
    p = Xty.size
    diag = np.ascontiguousarray(np.diag(G))
    beta = np.zeros(p) if beta0 is None else beta0.copy()
    s = G @ beta if beta0 is not None else np.zeros(p)
    converged = _cd_kernel(
        np.ascontiguousarray(Xty), np.ascontiguousarray(G), diag,
        0.5 * lam * np.ascontiguousarray(psi), beta, s,
        cfg.cd_tol, cfg.cd_max_iters,
    )
    return beta, bool(converged)


def _coordinate_descent(y, X, lam, psi, cfg, beta0=None):
    return _cd_gram(X.T @ y, X.T @ X, lam, psi, cfg, beta0=beta0)


def _check_finite(y, X):
    if not (np.isfinite(y).all() and np.isfinite(X).all()):
        raise NumericError("NaN or Inf in regression inputs")


def fit_rigorous_lasso(y: np.ndarray, X: np.ndarray, cfg: LassoConfig | None = None,
                       lam: float | None = None) -> NodewiseFit:
    """Plugin-penalty lasso with alternating loading estimation.

    ``lam`` overrides the plugin level (used by tests probing limiting cases).
    """
    cfg = cfg or LassoConfig()
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise DimensionError(f"X is {X.shape}, y length {y.size}")
    T, p = X.shape
    if T < 2:
        raise ValidationError(f"need T >= 2, got {T}")
    _check_finite(y, X)

    if lam is None:
        lam = rigorous_lambda(T, p, cfg)

    Xty = X.T @ y
    G = X.T @ X
    residuals = y - y.mean()
    psi = penalty_loadings(X, residuals)
    beta = None
    converged = False
    iters_done = 0
    for it in range(1, cfg.max_loading_iters + 1):
        iters_done = it
        beta, converged = _cd_gram(Xty, G, lam, psi, cfg, beta0=beta)
        residuals = y - X @ beta
        new_psi = penalty_loadings(X, residuals)
        rel = np.max(np.abs(new_psi - psi) / np.maximum(np.abs(psi), PSI_FLOOR))
        psi = new_psi
        if rel < cfg.loading_tol:
            break
    # final fit under the settled loadings
    beta, converged = _cd_gram(Xty, G, lam, psi, cfg, beta0=beta)
    residuals = y - X @ beta
    return NodewiseFit(
        unit_index=-1,
        beta=beta,
        mask=beta != 0.0,
        lam=float(lam),
        psi=psi,
        residual_variance=float(residuals @ residuals) / T,
        loading_iterations=iters_done,
        converged=converged,
    )


def _bic(y, X, beta):
    T = y.size
    r = y - X @ beta
    rss = float(r @ r)
    k = int(np.count_nonzero(beta))
    return T * math.log(max(rss, 1e-300) / T) + k * math.log(T)


def fit_adaptive_lasso(y: np.ndarray, X: np.ndarray, cfg: LassoConfig | None = None) -> NodewiseFit:
    """Adaptive lasso: OLS-based loadings 1/|b0_j|, lambda chosen by BIC on a log grid."""
    cfg = cfg or LassoConfig()
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise DimensionError(f"X is {X.shape}, y length {y.size}")
    T, p = X.shape
    if T < 2:
        raise ValidationError(f"need T >= 2, got {T}")
    _check_finite(y, X)

    if p >= T:
        # univariate OLS per regressor
        beta0 = np.array([(X[:, j] @ y) / max((X[:, j] @ X[:, j]), 1e-300) for j in range(p)])
    else:
        beta0, *_ = np.linalg.lstsq(X, y, rcond=None)
    psi = 1.0 / np.maximum(np.abs(beta0), ADAPTIVE_BETA_FLOOR)

    lam_max = 2.0 * np.max(np.abs(X.T @ y) / psi)
    if lam_max <= 0.0:
        beta = np.zeros(p)
        return NodewiseFit(-1, beta, beta != 0.0, 0.0, psi,
                           float(y @ y) / T, 0, True)
    grid = np.geomspace(lam_max, lam_max * 1e-4, 100)
    best = None
    beta = np.zeros(p)  # warm start down the path
    for lam in grid:
        beta, conv = _coordinate_descent(y, X, lam, psi, cfg, beta0=beta)
        score = _bic(y, X, beta)
        if best is None or score < best[0]:
            best = (score, lam, beta.copy(), conv)
    _, lam, beta, conv = best
    residuals = y - X @ beta
    return NodewiseFit(
        unit_index=-1,
        beta=beta,
        mask=beta != 0.0,
        lam=float(lam),
        psi=psi,
        residual_variance=float(residuals @ residuals) / T,
        loading_iterations=0,
        converged=conv,
    )


def nodewise_regressions(sp: StandardizedPanel, cfg: LassoConfig | None = None,
                         method: str = "rigorous", threads: int = 1) -> list[NodewiseFit]:
    """Fit each unit's column on all other columns; one fit per unit, in unit order."""
    cfg = cfg or LassoConfig()
    N = sp.n_units
    if N < 2:
        raise ValidationError(f"need at least 2 units, got {N}")
    if method not in ("rigorous", "adaptive"):
        raise ValidationError(f"unknown method {method!r}")
    V = sp.values

    def fit_one(i: int) -> NodewiseFit:
        y = V[:, i]
        X = np.delete(V, i, axis=1)
        try:
            if method == "rigorous":
                fit = fit_rigorous_lasso(y, X, cfg)
            else:
                fit = fit_adaptive_lasso(y, X, cfg)
        except Exception as exc:
            raise type(exc)(f"unit {sp.unit_ids[i]!r}: {exc}") from exc
        return replace(fit, unit_index=i, unit_id=sp.unit_ids[i])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fit_one, range(N)))
    return [fit_one(i) for i in range(N)]
