"""Top-k comparison of two ranked variable lists.

The distance between two rankings counts, variable by variable, the
normalized difference of ranks with everything below position k collapsed
to k+1, so only the heads of the lists matter.  Distances are calibrated
against the Monte Carlo expectation for random rankings, tested by
permuting one list's rank assignments, and screened across k with a
step-up false-discovery correction.  Lists that rank only part of a
shared universe place every unranked variable at one fill rank: the size
of the combined universe.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateIdError,
    OutOfRangeError,
    PValueRangeError,
    UniverseMismatchError,
    ZeroExpectationError,
)
from .rng import derive_rng

logger = logging.getLogger(__name__)


@dataclass
class RankArray:
    """Ranks of a shared variable universe under one list.

    ``ranks[i]`` is the 1-based position of ``ids[i]`` in the list, or the
    fill rank (the universe size) when the list does not rank it.
    """

    ids: list[str]
    ranks: np.ndarray
    n_ranked: int

    @property
    def universe_size(self) -> int:
        return len(self.ids)

    def ranked_positions(self) -> np.ndarray:
        return np.flatnonzero(self.ranks <= self.n_ranked)


def build_rank_arrays(list_a: list[str], list_b: list[str]) -> tuple[RankArray, RankArray]:
    """Embed two ordered id lists into their shared universe.

    The universe is the union (first-seen order: all of A, then novel ids
    of B); ids absent from one list get that list's fill rank, equal to
    the universe size.
    """
    for name, lst in (("first", list_a), ("second", list_b)):
        if len(set(lst)) != len(lst):
            raise DuplicateIdError(f"{name} list contains duplicate ids")
    ids = list(list_a)
    seen = set(list_a)
    for v in list_b:
        if v not in seen:
            seen.add(v)
            ids.append(v)
    p_star = len(ids)
    pos_a = {v: i + 1 for i, v in enumerate(list_a)}
    pos_b = {v: i + 1 for i, v in enumerate(list_b)}
    tau = np.array([pos_a.get(v, p_star) for v in ids], dtype=float)
    sigma = np.array([pos_b.get(v, p_star) for v in ids], dtype=float)
    return RankArray(ids, tau, len(list_a)), RankArray(ids, sigma, len(list_b))


def canberra_topk(tau: np.ndarray, sigma: np.ndarray, k: int) -> float:
    """Rank-difference distance with positions beyond k collapsed to k+1."""
    tau = np.asarray(tau, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if tau.shape != sigma.shape:
        raise UniverseMismatchError("rank arrays have different lengths")
    if k < 1:
        raise OutOfRangeError(f"k must be >= 1, got {k}")
    a = np.minimum(tau, k + 1.0)
    b = np.minimum(sigma, k + 1.0)
    return float(np.sum(np.abs(a - b) / (a + b)))


def expected_canberra(k: int, p: int, M: int = 1000, seed: int = 0) -> float:
    """Monte Carlo mean distance between two uniform random rankings of p items."""
    if p < 1:
        raise OutOfRangeError(f"p must be >= 1, got {p}")
    if k < 1:
        raise OutOfRangeError(f"k must be >= 1, got {k}")
    if p == 1:
        return 0.0
    rng = derive_rng(seed, "expected-distance", k, p)
    total = 0.0
    for _ in range(M):
        tau = rng.permutation(p) + 1.0
        sigma = rng.permutation(p) + 1.0
        total += canberra_topk(tau, sigma, k)
    return total / M


def normalized_canberra(ca: float, expected: float) -> float:
    """Distance as a fraction of its random expectation; 0/0 is 0."""
    if ca == 0.0:
        return 0.0
    if expected <= 0.0:
        raise ZeroExpectationError("expected distance is zero but observed is not")
    return ca / expected


def permutation_pvalues(
    tau: RankArray,
    sigma: RankArray,
    k_values,
    Z: int = 1000,
    seed: int = 0,
) -> np.ndarray:
    """Permutation p-values of the top-k distances across ``k_values``.

    The null reshuffles the second list's rank assignments among the
    variables it actually ranks (fill ranks stay put); the p-value is the
    fraction of permutations at least as close as observed.  The random
    normalization cancels between the two sides, so raw distances are
    compared.
    """
    if tau.ids != sigma.ids:
        raise UniverseMismatchError("rank arrays cover different universes")
    k_values = list(k_values)
    obs = np.array([canberra_topk(tau.ranks, sigma.ranks, k) for k in k_values])
    ranked = sigma.ranked_positions()
    ranked_ranks = sigma.ranks[ranked]
    rng = derive_rng(seed, "rank-permutation")
    wins = np.zeros(len(k_values))
    sig_z = sigma.ranks.copy()
    for _ in range(Z):
        sig_z[ranked] = ranked_ranks[rng.permutation(ranked.size)]
        for i, k in enumerate(k_values):
            if obs[i] <= canberra_topk(tau.ranks, sig_z, k):
                wins[i] += 1
    return wins / Z


def bh_qvalues(p_values) -> np.ndarray:
    """Step-up false-discovery-adjusted values, capped at one."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return p.copy()
    if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
        raise PValueRangeError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    q_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    q_sorted = np.minimum(q_sorted, 1.0)
    q = np.empty(m)
    q[order] = q_sorted
    return q


def consensus_set(tau: RankArray, sigma: RankArray, k: int) -> list[tuple[str, float]]:
    """Variables ranked within the top k by both lists, with mean ranks.

    Rows are sorted by mean rank (ties by id).  Valid k may not exceed the
    shorter list.
    """
    if tau.ids != sigma.ids:
        raise UniverseMismatchError("rank arrays cover different universes")
    if not (1 <= k <= min(tau.n_ranked, sigma.n_ranked)):
        raise OutOfRangeError(
            f"k must be in [1, {min(tau.n_ranked, sigma.n_ranked)}], got {k}"
        )
    rows = [
        (tau.ids[i], 0.5 * (tau.ranks[i] + sigma.ranks[i]))
        for i in np.flatnonzero((tau.ranks <= k) & (sigma.ranks <= k))
    ]
    return sorted(rows, key=lambda t: (t[1], t[0]))


def mean_rank_summary(tau: RankArray, sigma: RankArray) -> list[tuple[str, float]]:
    """Mean rank of every variable ranked by both lists, best first.

    Empty when the ranked sets do not intersect; callers treat that as a
    flag rather than an error.
    """
    if tau.ids != sigma.ids:
        raise UniverseMismatchError("rank arrays cover different universes")
    both = (tau.ranks <= tau.n_ranked) & (sigma.ranks <= sigma.n_ranked)
    rows = [(tau.ids[i], 0.5 * (tau.ranks[i] + sigma.ranks[i])) for i in np.flatnonzero(both)]
    return sorted(rows, key=lambda t: (t[1], t[0]))


@dataclass
class RankComparison:
    """Full comparison report across a k grid."""

    k_values: list[int]
    distances: np.ndarray
    expected: np.ndarray
    normalized: np.ndarray
    p_values: np.ndarray
    q_values: np.ndarray
    best_k: int  # smallest k attaining the minimum normalized distance
    consensus: list[tuple[str, float]]
    mean_ranks: list[tuple[str, float]]
    intersection_empty: bool
    universe_size: int
    n_ranked_a: int
    n_ranked_b: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k_values": [int(k) for k in self.k_values],
            "distances": [float(v) for v in self.distances],
            "expected": [float(v) for v in self.expected],
            "normalized": [float(v) for v in self.normalized],
            "p_values": [float(v) for v in self.p_values],
            "q_values": [float(v) for v in self.q_values],
            "best_k": int(self.best_k),
            "consensus": [[v, float(r)] for v, r in self.consensus],
            "mean_ranks": [[v, float(r)] for v, r in self.mean_ranks],
            "intersection_empty": self.intersection_empty,
            "universe_size": int(self.universe_size),
            "n_ranked_a": int(self.n_ranked_a),
            "n_ranked_b": int(self.n_ranked_b),
        }


def compare_ranked_lists(
    list_a: list[str],
    list_b: list[str],
    k_values=None,
    Z: int = 1000,
    M: int = 1000,
    seed: int = 0,
) -> RankComparison:
    """End-to-end comparison of two ordered id lists.

    Default k grid is 1..min(len shorter list, 50).  The consensus set is
    reported at the smallest k minimizing the normalized distance.
    """
    tau, sigma = build_rank_arrays(list_a, list_b)
    k_cap = min(tau.n_ranked, sigma.n_ranked)
    if k_cap < 1:
        raise OutOfRangeError("both lists must rank at least one variable")
    if k_values is None:
        k_values = list(range(1, min(k_cap, 50) + 1))
    else:
        k_values = [int(k) for k in k_values]
        for k in k_values:
            if not (1 <= k <= k_cap):
                raise OutOfRangeError(f"k={k} outside [1, {k_cap}]")

    p_star = tau.universe_size
    distances = np.array([canberra_topk(tau.ranks, sigma.ranks, k) for k in k_values])
    expected = np.array([expected_canberra(k, p_star, M=M, seed=seed) for k in k_values])
    normalized = np.array(
        [normalized_canberra(d, e) for d, e in zip(distances, expected)]
    )
    p_values = permutation_pvalues(tau, sigma, k_values, Z=Z, seed=seed)
    q_values = bh_qvalues(p_values)
    best_k = int(k_values[int(np.argmin(normalized))])
    consensus = consensus_set(tau, sigma, best_k)
    mean_ranks = mean_rank_summary(tau, sigma)
    return RankComparison(
        k_values=k_values,
        distances=distances,
        expected=expected,
        normalized=normalized,
        p_values=p_values,
        q_values=q_values,
        best_k=best_k,
        consensus=consensus,
        mean_ranks=mean_ranks,
        intersection_empty=not mean_ranks,
        universe_size=p_star,
        n_ranked_a=tau.n_ranked,
        n_ranked_b=sigma.n_ranked,
    )


def read_ranked_list(path) -> list[str]:
    """Read an ordered id list: one id per line, or ``id TAB rank`` pairs."""
    rows: list[list[str]] = []
    with open(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.strip():
                rows.append(line.split("\t"))
    if not rows:
        return []
    if all(len(r) == 1 for r in rows):
        ids = [r[0] for r in rows]
    elif all(len(r) == 2 for r in rows):
        start = 0
        try:
            float(rows[0][1])
        except ValueError:
            start = 1  # header row
        pairs = [(float(r[1]), r[0]) for r in rows[start:]]
        if len({rk for rk, _ in pairs}) != len(pairs):
            raise DuplicateIdError(f"{path}: duplicate ranks")
        ids = [v for _, v in sorted(pairs)]
    else:
        raise OutOfRangeError(f"{path}: expected 1 or 2 tab-separated columns")
    if len(set(ids)) != len(ids):
        raise DuplicateIdError(f"{path}: duplicate ids")
    return ids
