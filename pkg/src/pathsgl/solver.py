"""Sparse group lasso solvers for pathway-grouped designs.

Two fitting strategies share one block routine:

* ``fit_sgl_cgd``  -- every pathway block is regressed against the full
  response independently (one pass, no residual exchange between blocks).
* ``fit_sgl_bcgd`` -- blocks are cycled against partial residuals on an
  overlap-expanded design until the whole coefficient vector stabilizes.

Columns are assumed mean-centered with unit sum of squares (see
``data.standardize``); the coordinate updates rely on that scaling.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import ExpandedIndex, PathwayMap, StandardizedData
from .errors import NonConvergenceError, PathsglError

logger = logging.getLogger(__name__)


def soft_threshold(z, t):
    """Shrink ``z`` toward zero by ``t``, clipping at zero."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def pathway_selection_stat(X_l: np.ndarray, r: np.ndarray, alpha: float, lam: float) -> float:
    """l2 norm of the soft-thresholded block score; the block enters the
    model iff this exceeds (1 - alpha) * lam * w_l."""
    return float(np.linalg.norm(soft_threshold(X_l.T @ r, alpha * lam)))


def single_pathway_objective(
    X_l: np.ndarray, target: np.ndarray, beta: np.ndarray, alpha: float, lam: float, w_l: float
) -> float:
    r = target - X_l @ beta
    return (
        0.5 * float(r @ r)
        + (1.0 - alpha) * lam * w_l * float(np.linalg.norm(beta))
        + alpha * lam * float(np.abs(beta).sum())
    )


def sgl_objective(
    X: np.ndarray,
    y: np.ndarray,
    beta: np.ndarray,
    groups: list[np.ndarray],
    alpha: float,
    lam: float,
    weights: np.ndarray,
) -> float:
    """Joint objective: squared-error half-loss plus group and lasso terms."""
    r = y - X @ beta
    group_term = sum(
        float(weights[l]) * float(np.linalg.norm(beta[g])) for l, g in enumerate(groups)
    )
    return (
        0.5 * float(r @ r)
        + (1.0 - alpha) * lam * group_term
        + alpha * lam * float(np.abs(beta).sum())
    )


@dataclass
class SglConfig:
    """Penalty and convergence settings shared by both solvers.

    ``lam`` is the absolute penalty level; ``alpha`` mixes the lasso part
    (alpha = 1) against the group part (alpha = 0).  ``weights`` holds one
    positive multiplier per pathway (uniform when None).
    """

    lam: float
    alpha: float
    weights: np.ndarray | None = None
    tol: float = 1e-6
    outer_tol: float = 1e-5
    max_inner_iters: int = 10000
    max_outer_iters: int = 1000

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise PathsglError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lam < 0:
            raise PathsglError(f"lambda must be nonnegative, got {self.lam}")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if np.any(self.weights <= 0):
                raise PathsglError("pathway weights must be positive")

    def resolve_weights(self, n_pathways: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(n_pathways)
        if self.weights.size != n_pathways:
            raise PathsglError(
                f"got {self.weights.size} weights for {n_pathways} pathways"
            )
        return self.weights


@dataclass
class SglFit:
    """Result of one solver run, keyed by pathway and feature identifiers."""

    algorithm: str
    lam: float
    alpha: float
    selected_pathways: list[str]
    coefficients: dict[str, dict[str, float]]  # pathway id -> {feature id: coef}
    objective: float
    inner_iterations: dict[str, int]
    outer_iterations: int = 0
    nonconverged: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def selected_snps(self) -> list[str]:
        out: set[str] = set()
        for coefs in self.coefficients.values():
            out.update(coefs)
        return sorted(out)

    @property
    def converged(self) -> bool:
        return not self.nonconverged and "outer_nonconvergence" not in self.diagnostics

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "lambda": self.lam,
            "alpha": self.alpha,
            "selected_pathways": list(self.selected_pathways),
            "coefficients": {
                pid: dict(sorted(coefs.items())) for pid, coefs in self.coefficients.items()
            },
            "objective": self.objective,
            "iterations": {"outer": self.outer_iterations, "inner": dict(self.inner_iterations)},
            "nonconverged": list(self.nonconverged),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SglFit":
        return cls(
            algorithm=d["algorithm"],
            lam=d["lambda"],
            alpha=d["alpha"],
            selected_pathways=list(d["selected_pathways"]),
            coefficients={p: dict(c) for p, c in d["coefficients"].items()},
            objective=d["objective"],
            inner_iterations=dict(d["iterations"]["inner"]),
            outer_iterations=d["iterations"]["outer"],
            nonconverged=list(d.get("nonconverged", [])),
        )


# ---------------------------------------------------------------------------
# single-block coordinate solver


def _seed_pass(X_l: np.ndarray, resid: np.ndarray, beta: np.ndarray, alpha_lam: float) -> None:
    # One cyclic pass of plain soft-threshold updates.  Run when the block
    # iterate is all zero: the curvature term of the damped update divides
    # by the block norm, so the block needs a nonzero starting point.  Not
    # objective-checked; the following sweeps only ever decrease from here.
    for j in range(beta.size):
        cj = float(X_l[:, j] @ resid) + beta[j]
        if cj > alpha_lam:
            new = cj - alpha_lam
        elif cj < -alpha_lam:
            new = cj + alpha_lam
        else:
            new = 0.0
        if new != beta[j]:
            resid -= X_l[:, j] * (new - beta[j])
            beta[j] = new


def _newton_sweep(
    X_l: np.ndarray,
    resid: np.ndarray,
    beta: np.ndarray,
    alpha_lam: float,
    group_pen: float,
    max_halvings: int = 50,
) -> float:
    """One cyclic pass of damped single-coordinate updates.

    ``resid`` is maintained as target - X_l @ beta.  Returns the largest
    absolute coefficient change.  Every accepted move is checked against
    the block objective, halving the step toward the current point until
    the objective stops increasing.
    """
    l2 = float(beta @ beta)
    l1 = float(np.abs(beta).sum())
    rss = float(resid @ resid)
    maxdelta = 0.0
    for j in range(beta.size):
        bj = float(beta[j])
        xj = X_l[:, j]
        c = float(xj @ resid)
        if bj != 0.0:
            # exact-zero snap: with unit column scale the coordinate
            # minimizer sits at zero iff the leave-one-out score is inside
            # the lasso threshold
            if abs(c + bj) <= alpha_lam:
                cand = 0.0
            else:
                norm_b = math.sqrt(l2)
                d1 = -c + group_pen * bj / norm_b + alpha_lam * math.copysign(1.0, bj)
                d2 = 1.0 + (group_pen / norm_b) * (1.0 - bj * bj / l2)
                cand = bj - d1 / d2
        else:
            d_minus = -c - alpha_lam
            d_plus = -c + alpha_lam
            if d_minus > 0.0 and d_plus > 0.0:
                d1 = d_minus
            elif d_minus < 0.0 and d_plus < 0.0:
                d1 = d_plus
            else:
                # one-sided slopes straddle zero: the coordinate stays out
                continue
            if l2 == 0.0:
                continue  # collapsed block; caller re-seeds
            d2 = 1.0 + group_pen / math.sqrt(l2)
            cand = -d1 / d2
        if cand == bj:
            continue
        f_old = 0.5 * rss + group_pen * math.sqrt(l2) + alpha_lam * l1
        accepted = False
        new_resid = resid
        new_rss = rss
        new_l2 = l2
        new_l1 = l1
        for _ in range(max_halvings + 1):
            new_resid = resid - xj * (cand - bj)
            new_rss = float(new_resid @ new_resid)
            new_l2 = max(l2 + cand * cand - bj * bj, 0.0)
            new_l1 = l1 + abs(cand) - abs(bj)
            f_new = 0.5 * new_rss + group_pen * math.sqrt(new_l2) + alpha_lam * new_l1
            if f_new <= f_old:
                accepted = True
                break
            cand = 0.5 * (cand + bj)
            if cand == bj:
                break
        if not accepted:
            continue
        resid[:] = new_resid
        rss = new_rss
        l2 = new_l2
        l1 = new_l1
        beta[j] = cand
        maxdelta = max(maxdelta, abs(cand - bj))
    return maxdelta


def _solve_block(
    X_l: np.ndarray,
    target: np.ndarray,
    alpha: float,
    lam: float,
    w_l: float,
    tol: float,
    max_iters: int,
    beta0: np.ndarray | None = None,
) -> tuple[np.ndarray, int, bool]:
    """Minimize the single-block objective against ``target``.

    Applies the block selection gate first; returns (beta, sweeps, converged).
    """
    alpha_lam = alpha * lam
    group_pen = (1.0 - alpha) * lam * w_l
    p = X_l.shape[1]

    stat = pathway_selection_stat(X_l, target, alpha, lam)
    if stat <= group_pen or stat == 0.0:
        return np.zeros(p), 0, True

    if beta0 is not None and np.any(beta0):
        beta = np.array(beta0, dtype=float)
        resid = target - X_l @ beta
    else:
        beta = np.zeros(p)
        resid = np.array(target, dtype=float)
        _seed_pass(X_l, resid, beta, alpha_lam)

    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        if not beta.any():
            _seed_pass(X_l, resid, beta, alpha_lam)
        delta = _newton_sweep(X_l, resid, beta, alpha_lam, group_pen)
        if delta < tol:
            return beta, sweeps, True
    return beta, sweeps, False


def fit_pathway_cgd(
    X_l: np.ndarray,
    y: np.ndarray,
    alpha: float,
    lam: float,
    w_l: float = 1.0,
    tol: float = 1e-6,
    max_inner_iters: int = 10000,
) -> np.ndarray:
    """Fit one pathway block against ``y``; zero vector if the gate fails.

    Raises NonConvergenceError (carrying the last iterate) if the sweep
    limit is reached first.
    """
    X_l = np.asfortranarray(X_l, dtype=float)
    beta, sweeps, converged = _solve_block(X_l, y, alpha, lam, w_l, tol, max_inner_iters)
    if not converged:
        raise NonConvergenceError(
            f"block did not converge within {max_inner_iters} sweeps",
            last_iterate=beta,
            iterations=sweeps,
        )
    return beta


def kkt_block_residual(
    X_l: np.ndarray, target: np.ndarray, beta: np.ndarray, alpha: float, lam: float, w_l: float
) -> float:
    """Largest stationarity violation of a single-block solution.

    Zero for an exact minimizer: nonzero coordinates must zero the smooth
    subgradient, zero coordinates must have scores inside the lasso
    threshold, and an all-zero block must fail the selection gate.
    """
    alpha_lam = alpha * lam
    group_pen = (1.0 - alpha) * lam * w_l
    r = target - X_l @ beta
    if not np.any(beta):
        return max(pathway_selection_stat(X_l, target, alpha, lam) - group_pen, 0.0)
    norm_b = float(np.linalg.norm(beta))
    scores = X_l.T @ r
    worst = 0.0
    for j in range(beta.size):
        if beta[j] != 0.0:
            g = -scores[j] + group_pen * beta[j] / norm_b + alpha_lam * math.copysign(1.0, beta[j])
            worst = max(worst, abs(g))
        else:
            worst = max(worst, abs(scores[j]) - alpha_lam)
    return worst


# ---------------------------------------------------------------------------
# full fits


def _fit_to_ids(
    pmap: PathwayMap,
    betas: list[np.ndarray],
    columns: list[np.ndarray],
) -> tuple[list[str], dict[str, dict[str, float]]]:
    selected: list[str] = []
    coefficients: dict[str, dict[str, float]] = {}
    for l, beta in enumerate(betas):
        nz = np.flatnonzero(beta)
        if nz.size == 0:
            continue
        pid = pmap.pathway_ids[l]
        selected.append(pid)
        cols = columns[l]
        coefficients[pid] = {pmap.snp_ids[cols[k]]: float(beta[k]) for k in nz}
    return selected, coefficients


def fit_sgl_cgd(data: StandardizedData, pmap: PathwayMap, config: SglConfig) -> SglFit:
    """Fit every pathway block against the full response independently.

    A single ordered pass over pathways; shared features are fitted once
    per containing block, so no expanded design is needed.  Blocks that hit
    the sweep limit keep their last iterate and are listed in
    ``nonconverged``.
    """
    weights = config.resolve_weights(pmap.n_pathways)
    y = data.y
    base = 0.5 * float(y @ y)

    betas, sweeps_per_block, ok_mask = cgd_blocks(data.X, pmap.groups, y, config)

    inner: dict[str, int] = {}
    nonconverged: list[str] = []
    objective = base
    for l, beta in enumerate(betas):
        pid = pmap.pathway_ids[l]
        if sweeps_per_block[l]:
            inner[pid] = int(sweeps_per_block[l])
        if not ok_mask[l]:
            nonconverged.append(pid)
        if np.any(beta):
            f_l = single_pathway_objective(
                data.X[:, pmap.groups[l]], y, beta, config.alpha, config.lam, weights[l]
            )
            # each selected block is judged against the full response on
            # its own; count the shared baseline once
            objective += f_l - base

    selected, coefficients = _fit_to_ids(pmap, betas, pmap.groups)
    return SglFit(
        algorithm="cgd",
        lam=config.lam,
        alpha=config.alpha,
        selected_pathways=selected,
        coefficients=coefficients,
        objective=objective,
        inner_iterations=inner,
        outer_iterations=1,
        nonconverged=nonconverged,
    )


def cgd_blocks(
    X: np.ndarray,
    groups: list[np.ndarray],
    y: np.ndarray,
    config: SglConfig,
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Index-level single-pass fit: every block solved against ``y``.

    Returns (blocks, sweeps per block, converged mask).
    """
    weights = config.resolve_weights(len(groups))
    blocks: list[np.ndarray] = []
    sweeps_out = np.zeros(len(groups), dtype=int)
    ok_out = np.ones(len(groups), dtype=bool)
    for l, g in enumerate(groups):
        X_l = np.asfortranarray(X[:, g])
        beta, sweeps, ok = _solve_block(
            X_l, y, config.alpha, config.lam, weights[l], config.tol, config.max_inner_iters
        )
        blocks.append(beta)
        sweeps_out[l] = sweeps
        ok_out[l] = ok
    return blocks, sweeps_out, ok_out


def bcgd_blocks(
    X_star: np.ndarray,
    ranges: list[tuple[int, int]],
    y: np.ndarray,
    config: SglConfig,
) -> tuple[list[np.ndarray], int, bool, np.ndarray, np.ndarray, list[float]]:
    """Index-level cyclic fit on an expanded design.

    Returns (blocks, outer cycles, outer converged, inner sweep totals,
    per-block converged mask, per-cycle max changes).
    """
    L = len(ranges)
    weights = config.resolve_weights(L)
    X_star = np.asfortranarray(X_star)
    blocks = [np.zeros(b - a) for a, b in ranges]
    block_mats = [X_star[:, a:b] for a, b in ranges]
    resid = y.astype(float).copy()
    inner_total = np.zeros(L, dtype=int)
    block_converged = np.ones(L, dtype=bool)
    cycle_changes: list[float] = []

    outer = 0
    outer_converged = False
    for outer in range(1, config.max_outer_iters + 1):
        maxdelta = 0.0
        for l in range(L):
            X_l = block_mats[l]
            beta_l = blocks[l]
            warm = np.any(beta_l)
            r_l = resid + X_l @ beta_l if warm else resid
            new_beta, sweeps, ok = _solve_block(
                X_l,
                r_l,
                config.alpha,
                config.lam,
                weights[l],
                config.tol,
                config.max_inner_iters,
                beta0=beta_l if warm else None,
            )
            inner_total[l] += sweeps
            if not ok:
                block_converged[l] = False
            change = float(np.max(np.abs(new_beta - beta_l))) if beta_l.size else 0.0
            maxdelta = max(maxdelta, change)
            if np.any(new_beta):
                resid = r_l - X_l @ new_beta
            elif warm:
                resid = r_l
            blocks[l] = new_beta
        cycle_changes.append(maxdelta)
        if maxdelta < config.outer_tol:
            outer_converged = True
            break
    return blocks, outer, outer_converged, inner_total, block_converged, cycle_changes


def fit_sgl_bcgd(
    data: StandardizedData,
    pmap: PathwayMap,
    expanded: ExpandedIndex | None,
    config: SglConfig,
) -> SglFit:
    """Cycle pathway blocks against partial residuals until stable.

    Works on the overlap-expanded design (each block owns private copies
    of its columns).  Outer sweeps run in ascending pathway order; a block
    is refitted against the response minus every other block's fit.
    """
    from .data import expand_overlaps

    if expanded is None:
        expanded = expand_overlaps(pmap)
    weights = config.resolve_weights(pmap.n_pathways)
    y = data.y
    X_star = expanded.expand_matrix(data.X)
    L = pmap.n_pathways

    blocks, outer, outer_converged, inner_total, block_converged, cycle_changes = bcgd_blocks(
        X_star, expanded.ranges, y, config
    )

    selected, coefficients = _fit_to_ids(
        pmap, blocks, [expanded.group_columns(l) for l in range(L)]
    )
    beta_star = np.concatenate(blocks) if blocks else np.zeros(0)
    groups = [np.arange(a, b) for a, b in expanded.ranges]
    obj = sgl_objective(X_star, y, beta_star, groups, config.alpha, config.lam, weights)

    nonconverged = [pmap.pathway_ids[l] for l in range(L) if not block_converged[l]]
    diagnostics: dict = {}
    if not outer_converged:
        diagnostics["outer_nonconvergence"] = {
            "cycles": outer,
            "recent_cycle_changes": cycle_changes[-10:],
        }
        logger.warning(
            "outer loop hit %d cycles; recent max changes: %s",
            outer,
            ", ".join(f"{c:.3e}" for c in cycle_changes[-5:]),
        )
    inner = {
        pmap.pathway_ids[l]: int(inner_total[l]) for l in range(L) if inner_total[l]
    }
    return SglFit(
        algorithm="bcgd",
        lam=config.lam,
        alpha=config.alpha,
        selected_pathways=selected,
        coefficients=coefficients,
        objective=obj,
        inner_iterations=inner,
        outer_iterations=outer,
        nonconverged=nonconverged,
        diagnostics=diagnostics,
    )


def objective(
    data: StandardizedData, pmap: PathwayMap, fit: SglFit, weights: np.ndarray | None = None
) -> float:
    """Recompute the objective of a stored fit from its coefficients."""
    weights = np.ones(pmap.n_pathways) if weights is None else np.asarray(weights, dtype=float)
    base = 0.5 * float(data.y @ data.y)
    if fit.algorithm == "cgd":
        total = base
        for l, pid in enumerate(pmap.pathway_ids):
            coefs = fit.coefficients.get(pid)
            if not coefs:
                continue
            cols = pmap.groups[l]
            beta = np.zeros(cols.size)
            ids = [pmap.snp_ids[j] for j in cols]
            for k, sid in enumerate(ids):
                if sid in coefs:
                    beta[k] = coefs[sid]
            total += (
                single_pathway_objective(
                    data.X[:, cols], data.y, beta, fit.alpha, fit.lam, weights[l]
                )
                - base
            )
        return total
    # joint form on the expanded design
    from .data import expand_overlaps

    expanded = expand_overlaps(pmap)
    beta_star = np.zeros(expanded.width)
    for l, pid in enumerate(pmap.pathway_ids):
        coefs = fit.coefficients.get(pid)
        if not coefs:
            continue
        a, b = expanded.ranges[l]
        cols = expanded.backmap[a:b]
        for k in range(cols.size):
            sid = pmap.snp_ids[cols[k]]
            if sid in coefs:
                beta_star[a + k] = coefs[sid]
    groups = [np.arange(a, b) for a, b in expanded.ranges]
    X_star = expanded.expand_matrix(data.X)
    return sgl_objective(X_star, data.y, beta_star, groups, fit.alpha, fit.lam, weights)


# ---------------------------------------------------------------------------
# plain lasso


def lasso_cd(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_iters: int = 10000,
    beta0: np.ndarray | None = None,
) -> np.ndarray:
    """Coordinate-descent lasso on unit-sum-of-squares columns.

    Cycles the active set between full passes; terminates only when a full
    pass moves nothing beyond ``tol``, which enforces the stationarity
    conditions at that scale.
    """
    X = np.asfortranarray(X, dtype=float)
    n, p = X.shape
    if beta0 is None:
        beta = np.zeros(p)
        resid = y.astype(float).copy()
    else:
        beta = np.array(beta0, dtype=float)
        resid = y - X @ beta

    def pass_over(indices) -> float:
        nonlocal resid
        maxdelta = 0.0
        for j in indices:
            xj = X[:, j]
            cj = float(xj @ resid) + beta[j]
            if cj > lam:
                new = cj - lam
            elif cj < -lam:
                new = cj + lam
            else:
                new = 0.0
            if new != beta[j]:
                resid -= xj * (new - beta[j])
                maxdelta = max(maxdelta, abs(new - beta[j]))
                beta[j] = new
        return maxdelta

    all_idx = range(p)
    for _ in range(max_iters):
        delta = pass_over(all_idx)
        if delta < tol:
            return beta
        active = np.flatnonzero(beta)
        for _ in range(max_iters):
            if pass_over(active) < tol:
                break
    raise NonConvergenceError(
        f"lasso did not converge within {max_iters} passes", last_iterate=beta
    )


def fit_lasso(data: StandardizedData, lam: float, tol: float = 1e-8) -> np.ndarray:
    """Plain lasso over all features, ignoring pathway structure."""
    return lasso_cd(data.X, data.y, lam, tol=tol)


def lasso_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    r = y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())
