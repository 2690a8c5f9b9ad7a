"""Penalty-level calibration.

For each pathway there is a smallest penalty that just shuts the block out
of the model; the largest of these is the level above which the whole fit
is empty.  The block entry threshold solves

    || soft(X_l' y, alpha * lam) ||_2^2 - ((1 - alpha) * lam * w_l)^2 = 0

which is continuous and strictly decreasing in lam on (0, lam_star], so a
bracketed scalar root finder applies.  Closed forms cover both mixing
endpoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .data import PathwayMap, StandardizedData
from .errors import AlphaZeroError, PathsglError
from .solver import lasso_cd, soft_threshold

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-12
ROOT_MAXITER = 200


def lambda_star_from_scores(scores: np.ndarray, alpha: float) -> float:
    """Smallest penalty at which every lasso-part score is fully shrunk."""
    if alpha == 0.0:
        raise AlphaZeroError("lambda_star is undefined at alpha = 0")
    return float(np.max(np.abs(scores))) / alpha


def lambda_star(X_l: np.ndarray, y: np.ndarray, alpha: float) -> float:
    return lambda_star_from_scores(X_l.T @ y, alpha)


def lambda_min_from_scores(scores: np.ndarray, alpha: float, w_l: float) -> float:
    """Entry threshold of one block given its score vector X_l' y.

    Returns 0.0 when the scores are identically zero (the block can never
    enter, so there is no sign change to bracket).
    """
    scores = np.asarray(scores, dtype=float)
    amax = float(np.max(np.abs(scores))) if scores.size else 0.0
    if amax == 0.0:
        return 0.0
    if alpha == 0.0:
        return float(np.linalg.norm(scores)) / w_l
    if alpha == 1.0:
        return amax

    hi = amax / alpha
    gpen = (1.0 - alpha) * w_l

    def gap(lam: float) -> float:
        s = soft_threshold(scores, alpha * lam)
        return float(s @ s) - (gpen * lam) ** 2

    return float(brentq(gap, 0.0, hi, xtol=ROOT_XTOL, maxiter=ROOT_MAXITER))


def lambda_min_for_pathway(
    X_l: np.ndarray, y: np.ndarray, alpha: float, w_l: float = 1.0
) -> float:
    return lambda_min_from_scores(X_l.T @ y, alpha, w_l)


def lambda_min_batch(scores: np.ndarray, alpha: float, w_l: float, iters: int = 100) -> np.ndarray:
    """Vectorized entry thresholds for many score vectors at once.

    ``scores`` has one column per response (shape (P_l, R)); returns one
    threshold per column by bisection of the same gap function used in
    :func:`lambda_min_from_scores`.
    """
    scores = np.abs(np.asarray(scores, dtype=float))
    amax = scores.max(axis=0)
    if alpha == 0.0:
        return np.sqrt(np.einsum("jr,jr->r", scores, scores)) / w_l
    if alpha == 1.0:
        return amax.astype(float)

    gpen = (1.0 - alpha) * w_l
    lo = np.zeros_like(amax)
    hi = amax / alpha
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        s = np.maximum(scores - alpha * mid, 0.0)
        gap = np.einsum("jr,jr->r", s, s) - (gpen * mid) ** 2
        above = gap > 0.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


@dataclass
class LambdaGrid:
    """Per-pathway entry thresholds and the empty-model level."""

    lambda_max: float
    pathway_lambda_min: np.ndarray
    pathway_lambda_star: np.ndarray | None  # None at alpha = 0

    def fraction(self, frac: float) -> float:
        return frac * self.lambda_max


def compute_lambda_grid(
    data: StandardizedData,
    pmap: PathwayMap,
    alpha: float,
    weights: np.ndarray | None = None,
) -> LambdaGrid:
    """Entry thresholds for every pathway plus their maximum."""
    scores = data.X.T @ data.y
    return lambda_grid_from_scores(scores, pmap.groups, alpha, weights)


def lambda_grid_from_scores(
    scores: np.ndarray,
    groups: list[np.ndarray],
    alpha: float,
    weights: np.ndarray | None = None,
) -> LambdaGrid:
    L = len(groups)
    w = np.ones(L) if weights is None else np.asarray(weights, dtype=float)
    if w.size != L:
        raise PathsglError(f"got {w.size} weights for {L} pathways")
    mins = np.empty(L)
    stars = np.empty(L) if alpha > 0.0 else None
    for l, g in enumerate(groups):
        a = scores[g]
        mins[l] = lambda_min_from_scores(a, alpha, float(w[l]))
        if stars is not None:
            amax = float(np.max(np.abs(a))) if a.size else 0.0
            stars[l] = amax / alpha
    return LambdaGrid(float(mins.max()) if L else 0.0, mins, stars)


def lambda_max(
    data: StandardizedData,
    pmap: PathwayMap,
    alpha: float,
    weights: np.ndarray | None = None,
) -> float:
    """Smallest penalty level at which no pathway enters the model."""
    return compute_lambda_grid(data, pmap, alpha, weights).lambda_max


# ---------------------------------------------------------------------------
# lasso cardinality matching


@dataclass
class CardinalityMatch:
    """Lasso penalty matched to a target number of selected features."""

    lam: float
    coefficients: np.ndarray
    count: int
    exact: bool
    monotonicity_violations: int = 0


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    return float(np.max(np.abs(X.T @ y)))


def match_lasso_cardinality(
    data_or_X,
    y: np.ndarray | None = None,
    target_count: int = 0,
    n_grid: int = 400,
    floor_frac: float = 0.01,
    tol: float = 1e-8,
) -> CardinalityMatch:
    """Find a lasso penalty whose fit selects ``target_count`` features.

    Walks ``n_grid`` logarithmic steps from the empty-model level down to
    ``floor_frac`` of it with warm starts, stopping at the first level
    whose selected count reaches the target.  When no grid point hits the
    target exactly the closest count >= target is returned and flagged.
    Selected counts along the walk are expected to grow as the penalty
    shrinks; observed reversals are counted, not rejected.
    """
    if y is None:
        X, y = data_or_X.X, data_or_X.y
    else:
        X = data_or_X
    X = np.asfortranarray(X, dtype=float)

    lam_top = lasso_lambda_max(X, y)
    if target_count <= 0 or lam_top == 0.0:
        return CardinalityMatch(lam_top, np.zeros(X.shape[1]), 0, target_count == 0)

    grid = np.geomspace(lam_top, floor_frac * lam_top, n_grid)
    beta = np.zeros(X.shape[1])
    prev_count = 0
    violations = 0
    last: tuple[float, np.ndarray, int] | None = None
    for lam in grid:
        beta = lasso_cd(X, y, float(lam), tol=tol, beta0=beta)
        count = int(np.count_nonzero(beta))
        if count < prev_count:
            violations += 1
        prev_count = count
        last = (float(lam), beta.copy(), count)
        if count >= target_count:
            return CardinalityMatch(
                float(lam), beta.copy(), count, count == target_count, violations
            )
    lam, beta, count = last
    logger.warning(
        "cardinality match fell short: wanted %d, best grid point gives %d", target_count, count
    )
    return CardinalityMatch(lam, beta, count, False, violations)
