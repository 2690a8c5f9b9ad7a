"""Iterative pathway-weight tuning against permuted responses.

Under a permuted response no pathway should be favored, so the block that
would enter the model first (the argmax of the entry thresholds) should be
uniform across pathways.  Each iteration estimates that first-entry
distribution over R fresh permutations and nudges every weight by a
multiplicative factor that grows with the squared deviation from 1/L.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import PathwayMap, StandardizedData
from .errors import PathsglError
from .penalty import lambda_min_batch, lambda_min_from_scores
from .rng import derive_rng

logger = logging.getLogger(__name__)


def first_selected_pathway(
    data: StandardizedData,
    pmap: PathwayMap,
    alpha: float,
    weights: np.ndarray,
    permuted_y: np.ndarray,
) -> int:
    """Index of the pathway with the largest entry threshold for this response.

    Exact ties resolve to the lowest index (and are logged).
    """
    scores = data.X.T @ permuted_y
    mins = np.array(
        [
            lambda_min_from_scores(scores[g], alpha, float(weights[l]))
            for l, g in enumerate(pmap.groups)
        ]
    )
    top = int(np.argmax(mins))
    if np.count_nonzero(mins == mins[top]) > 1:
        logger.debug("entry-threshold tie at %.6g; taking lowest index", mins[top])
    return top


def _entry_thresholds_batch(
    X: np.ndarray,
    groups: list[np.ndarray],
    alpha: float,
    weights: np.ndarray,
    y_perms: np.ndarray,
) -> np.ndarray:
    """(L, R) entry thresholds for R permuted responses at once."""
    scores = X.T @ y_perms  # (P, R)
    return np.stack(
        [lambda_min_batch(scores[g], alpha, float(weights[l])) for l, g in enumerate(groups)]
    )


def empirical_selection_distribution(
    data: StandardizedData,
    pmap: PathwayMap,
    alpha: float,
    weights: np.ndarray,
    R: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Frequency with which each pathway enters first over R permutations."""
    if R <= 0:
        raise PathsglError("R must be positive")
    n = data.y.size
    y_perms = np.empty((n, R))
    for r in range(R):
        y_perms[:, r] = data.y[rng.permutation(n)]
    mins = _entry_thresholds_batch(data.X, pmap.groups, alpha, weights, y_perms)
    winners = np.argmax(mins, axis=0)
    return np.bincount(winners, minlength=pmap.n_pathways) / R


def update_factors(d: np.ndarray, eta: float, L: int) -> np.ndarray:
    """Multiplicative weight adjustments for deviations ``d`` from 1/L.

    An over-selected pathway (d > 0) gets a factor above one (heavier
    penalty), an under-selected one a factor below one; a pathway that was
    never selected gets exactly ``eta``.  Factors are clamped to
    [eta, 2 - eta] so a single iteration cannot overshoot.
    """
    d = np.asarray(d, dtype=float)
    factors = 1.0 - np.sign(d) * (eta - 1.0) * (L**2) * (d**2)
    # d == -1/L is the never-selected bound; force the exact factor there
    # rather than trusting L**2 * (1/L)**2 to round to 1.
    factors[d == -1.0 / L] = eta
    return np.clip(factors, eta, 2.0 - eta)


@dataclass
class TuneResult:
    """Final weights plus the per-iteration trace."""

    weights: np.ndarray
    converged: bool
    iterations: int
    sum_abs_dev: float  # at the returned weights
    distribution: np.ndarray  # first-entry frequencies at the returned weights
    trace: list[dict] = field(default_factory=list)


def tune_weights(
    data: StandardizedData,
    pmap: PathwayMap,
    alpha: float,
    eta: float = 0.5,
    epsilon: float = 0.05,
    R: int = 500,
    max_iters: int = 50,
    seed: int = 0,
    init_weights: np.ndarray | None = None,
) -> TuneResult:
    """Tune pathway weights until first-entry frequencies are near-uniform.

    Stops when the total absolute deviation drops below ``epsilon``; if the
    iteration cap is reached first, the iterate with the smallest observed
    deviation is returned with ``converged=False``.  Each iteration draws
    its own fresh batch of permutations from the seeded stream.
    """
    if not (0.0 < eta < 1.0):
        raise PathsglError(f"eta must be in (0, 1), got {eta}")
    L = pmap.n_pathways
    weights = np.ones(L) if init_weights is None else np.asarray(init_weights, dtype=float)
    if weights.size != L or np.any(weights <= 0):
        raise PathsglError("init_weights must be positive, one per pathway")

    best: tuple[float, np.ndarray, np.ndarray, int] | None = None
    trace: list[dict] = []
    for it in range(1, max_iters + 1):
        rng = derive_rng(seed, "weight-tuning", it)
        pi = empirical_selection_distribution(data, pmap, alpha, weights, R, rng)
        d = pi - 1.0 / L
        sum_abs = float(np.abs(d).sum())
        factors = update_factors(d, eta, L)
        trace.append(
            {
                "iteration": it,
                "weights": weights.copy(),
                "distribution": pi,
                "sum_abs_dev": sum_abs,
                "factors": factors,
            }
        )
        if best is None or sum_abs < best[0]:
            best = (sum_abs, weights.copy(), pi.copy(), it)
        if sum_abs < epsilon:
            return TuneResult(weights.copy(), True, it, sum_abs, pi, trace)
        weights = weights * factors

    sum_abs, w_best, pi_best, it_best = best
    logger.warning(
        "weight tuning hit %d iterations; best deviation %.4f at iteration %d",
        max_iters,
        sum_abs,
        it_best,
    )
    return TuneResult(w_best, False, max_iters, sum_abs, pi_best, trace)


def write_weights_tsv(path, pathway_ids: list[str], weights: np.ndarray) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write("pathway_id\tweight\n")
        for pid, w in zip(pathway_ids, weights):
            fh.write(f"{pid}\t{float(w)!r}\n")


def load_weights_tsv(path, pathway_ids: list[str]) -> np.ndarray:
    """Read a weights table and align it to ``pathway_ids``."""
    table: dict[str, float] = {}
    with open(path, "rt", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("pathway_id\t"):
            raise PathsglError(f"{path}: expected 'pathway_id\\tweight' header")
        for line in fh:
            if not line.strip():
                continue
            pid, w = line.rstrip("\n").split("\t")
            table[pid] = float(w)
    missing = [pid for pid in pathway_ids if pid not in table]
    if missing:
        raise PathsglError(f"{path}: no weight for pathways {missing[:5]}")
    return np.array([table[pid] for pid in pathway_ids])
