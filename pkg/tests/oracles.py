"""Independent reference solutions for the optimization tests.

Nothing here reuses the package's solvers.  The block oracle minimizes the
penalized least-squares objective by coarse grid search followed by exact
cyclic one-dimensional minimization (each coordinate subproblem is solved
by calculus: a closed form when the rest of the block is zero, otherwise a
bracketed root of the scalar stationarity equation).  The lasso oracle
solves the equivalent bound-constrained split-variable program with
L-BFGS-B and then polishes by refitting the detected support exactly.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import brentq, minimize


def block_objective(X, y, beta, alpha, lam, w=1.0):
    r = y - X @ beta
    return (
        0.5 * float(r @ r)
        + (1.0 - alpha) * lam * w * float(np.linalg.norm(beta))
        + alpha * lam * float(np.abs(beta).sum())
    )


def _coordinate_min(a, sjj, K, phi, alpha_lam):
    """Minimize 0.5*sjj*t^2 - a*t + phi*sqrt(K + t^2) + alpha_lam*|t| over t.

    ``a`` is the inner product of the column with the residual-plus-own-fit,
    ``K`` the squared norm of the other coordinates.  Strictly convex for
    sjj > 0, so the stationary point is the minimizer.
    """
    if K == 0.0:
        # the group term degenerates to an extra absolute-value penalty
        thr = phi + alpha_lam
        if a > thr:
            return (a - thr) / sjj
        if a < -thr:
            return (a + thr) / sjj
        return 0.0
    if abs(a) <= alpha_lam:
        return 0.0  # slope of the smooth part vanishes at 0; kink holds it

    if a > alpha_lam:
        sign = 1.0
    else:
        sign = -1.0

    def slope(t):
        return sjj * t - a + phi * t / math.sqrt(K + t * t) + alpha_lam * sign

    hi = abs(a) / sjj + 1.0
    lo = 0.0
    if sign > 0:
        return brentq(lambda t: slope(t), lo, hi, xtol=1e-15, maxiter=200)
    return brentq(lambda t: slope(-t), lo, hi, xtol=1e-15, maxiter=200) * -1.0


def _cyclic_exact(X, y, alpha, lam, w, beta0, tol=1e-13, max_sweeps=600):
    X = np.asarray(X, dtype=float)
    beta = np.array(beta0, dtype=float)
    resid = y - X @ beta
    phi = (1.0 - alpha) * lam * w
    alpha_lam = alpha * lam
    col_ss = np.einsum("ij,ij->j", X, X)
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(beta.size):
            bj = beta[j]
            a = float(X[:, j] @ resid) + col_ss[j] * bj
            K = max(float(beta @ beta) - bj * bj, 0.0)
            t = _coordinate_min(a, col_ss[j], K, phi, alpha_lam)
            if t != bj:
                resid -= X[:, j] * (t - bj)
                beta[j] = t
                biggest = max(biggest, abs(t - bj))
        if biggest < tol:
            break
    return beta


def grid_polish_minimum(X, y, alpha, lam, w=1.0, extra_starts=2, seed=0):
    """Global minimum of the single-block objective, to ~1e-10.

    Coarse grid search locates the basin; exact cyclic coordinate
    minimization polishes.  Several starts guard against the one point
    where coordinatewise moves can stall (the all-zero vector).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]

    # any minimizer beats beta = 0, which bounds both penalty norms
    f0 = 0.5 * float(y @ y)
    bounds = []
    if alpha > 0:
        bounds.append(f0 / (alpha * lam))
    if alpha < 1:
        bounds.append(f0 / ((1.0 - alpha) * lam * w))
    b = 1.05 * min(bounds)

    pts_per_dim = {1: 201, 2: 41, 3: 21, 4: 13, 5: 9, 6: 7}[p]
    axes = [np.linspace(-b, b, pts_per_dim)] * p
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p)
    R = y[None, :] - grid @ X.T
    fvals = (
        0.5 * np.einsum("ij,ij->i", R, R)
        + (1.0 - alpha) * lam * w * np.linalg.norm(grid, axis=1)
        + alpha * lam * np.abs(grid).sum(axis=1)
    )
    starts = [grid[int(np.argmin(fvals))], np.zeros(p)]
    lstsq_beta = np.linalg.lstsq(X, y, rcond=None)[0]
    starts.append(lstsq_beta)
    scores = X.T @ y
    shrunk = np.sign(scores) * np.maximum(np.abs(scores) - alpha * lam, 0.0)
    starts.append(shrunk)
    rng = np.random.default_rng(seed)
    for _ in range(extra_starts):
        starts.append(rng.normal(0.0, max(b / 10.0, 0.1), p))

    best_beta, best_f = None, np.inf
    for s in starts:
        beta = _cyclic_exact(X, y, alpha, lam, w, s)
        f = block_objective(X, y, beta, alpha, lam, w)
        if f < best_f:
            best_beta, best_f = beta, f
    return best_beta, best_f


def lasso_qp_oracle(X, y, lam, kkt_tol=1e-7):
    """High-precision lasso solution via the split-variable program.

    beta = u - v with u, v >= 0 turns the problem into a smooth
    bound-constrained QP; the L-BFGS-B support is then refitted exactly
    (the lasso solution on a known support with known signs is linear).
    Returns (beta, objective); raises if the result fails its own
    stationarity check.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape

    def fg(z):
        u, v = z[:p], z[p:]
        beta = u - v
        r = y - X @ beta
        g = -(X.T @ r)
        return 0.5 * float(r @ r) + lam * float(z.sum()), np.concatenate([g + lam, -g + lam])

    res = minimize(
        fg,
        np.zeros(2 * p),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * (2 * p),
        options={"maxiter": 5000, "ftol": 1e-18, "gtol": 1e-12},
    )
    beta = res.x[:p] - res.x[p:]

    support = np.flatnonzero(np.abs(beta) > 1e-7)
    if support.size:
        signs = np.sign(beta[support])
        Xs = X[:, support]
        refit = np.linalg.solve(Xs.T @ Xs, Xs.T @ y - lam * signs)
        if np.all(np.sign(refit) == signs):
            polished = np.zeros(p)
            polished[support] = refit
            if _lasso_kkt(X, y, polished, lam) <= kkt_tol:
                beta = polished
    viol = _lasso_kkt(X, y, beta, lam)
    if viol > kkt_tol:
        raise AssertionError(f"lasso oracle failed its stationarity check: {viol:.2e}")
    obj = 0.5 * float((y - X @ beta) @ (y - X @ beta)) + lam * float(np.abs(beta).sum())
    return beta, obj


def _lasso_kkt(X, y, beta, lam):
    scores = X.T @ (y - X @ beta)
    worst = 0.0
    for j in range(beta.size):
        if beta[j] != 0.0:
            worst = max(worst, abs(scores[j] - lam * np.sign(beta[j])))
        else:
            worst = max(worst, max(abs(scores[j]) - lam, 0.0))
    return worst


def exhaustive_expected_canberra(k, p, distance_fn):
    """Exact E[distance] over independent uniform permutation pairs.

    The distance depends only on the relative permutation, so averaging
    ``distance_fn(identity, pi, k)`` over all p! permutations equals the
    average over independent pairs.  Feasible for p <= 7.
    """
    ident = np.arange(1, p + 1, dtype=float)
    total = 0.0
    count = 0
    for perm in itertools.permutations(range(1, p + 1)):
        total += distance_fn(ident, np.array(perm, dtype=float), k)
        count += 1
    return total / count


def standardized_instance(rng, n, p):
    """Random design with centered unit-sum-of-squares columns + response."""
    X = rng.normal(size=(n, p))
    X -= X.mean(axis=0)
    X /= np.sqrt(np.einsum("ij,ij->j", X, X))
    y = rng.normal(size=n)
    y -= y.mean()
    return X, y
