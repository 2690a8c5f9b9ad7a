"""Selection-frequency ranking over half-sample refits.

Pathways, features, and genes are ranked by how often they are selected
when the model is refitted on repeated random subsamples of half the
samples.  Each subsample is re-standardized and gets its own penalty level
(a fixed fraction of that subsample's empty-model level).  A parallel run
with the response permuted within each subsample gives a null reference
for diagnosing selection bias.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import GenotypeMatrix, PathwayMap, Phenotype, expand_overlaps, standardize_arrays
from .errors import DegenerateVarianceError, PathsglError
from .penalty import lambda_grid_from_scores
from .rng import derive_rng
from .solver import SglConfig, bcgd_blocks, cgd_blocks
from .weights import load_weights_tsv  # noqa: F401  (re-export for CLI convenience)

logger = logging.getLogger(__name__)


@dataclass
class StabilityConfig:
    """Model settings applied inside every subsample refit."""

    alpha: float = 0.95
    lambda_frac: float = 0.95
    weights: np.ndarray | None = None
    algorithm: str = "cgd"  # "cgd" or "bcgd"
    tol: float = 1e-6
    outer_tol: float = 1e-5
    max_inner_iters: int = 10000
    max_outer_iters: int = 1000

    def __post_init__(self):
        if self.algorithm not in ("cgd", "bcgd"):
            raise PathsglError(f"unknown algorithm {self.algorithm!r}")
        if not (0.0 <= self.alpha <= 1.0):
            raise PathsglError(f"alpha must be in [0, 1], got {self.alpha}")
        if not (0.0 < self.lambda_frac):
            raise PathsglError("lambda_frac must be positive")


@dataclass
class RankingResult:
    """Selection frequencies at pathway, feature, and gene level."""

    pathway_ids: list[str]
    snp_ids: list[str]
    gene_ids: list[str]
    pathway_freq: np.ndarray
    snp_freq: np.ndarray
    gene_freq: np.ndarray
    B: int
    subsample_size: int
    pathway_count_mean: float
    pathway_count_sd: float
    snp_count_mean: float
    snp_count_sd: float
    null: bool = False
    snp_genes: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def table(self, level: str) -> list[tuple[int, str, float, str]]:
        """(rank, id, frequency, mapped genes) rows, highest frequency first.

        Ties order by identifier so output is stable.
        """
        if level == "pathway":
            ids, freq = self.pathway_ids, self.pathway_freq
        elif level == "snp":
            ids, freq = self.snp_ids, self.snp_freq
        elif level == "gene":
            ids, freq = self.gene_ids, self.gene_freq
        else:
            raise PathsglError(f"unknown ranking level {level!r}")
        order = sorted(range(len(ids)), key=lambda i: (-freq[i], ids[i]))
        rows = []
        for rank, i in enumerate(order, start=1):
            genes = ",".join(self.snp_genes.get(ids[i], ())) if level == "snp" else ""
            rows.append((rank, ids[i], float(freq[i]), genes))
        return rows


def subsample_indices(n: int, b: int, seed: int) -> np.ndarray:
    """Half-sample (floor(n/2)) without replacement, fixed by (seed, b)."""
    rng = derive_rng(seed, "subsample", b)
    return np.sort(rng.choice(n, n // 2, replace=False))


def write_ranking_tsv(path, rows: list[tuple[int, str, float, str]]) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write("rank\tid\tfrequency\tgenes\n")
        for rank, rid, freq, genes in rows:
            fh.write(f"{rank}\t{rid}\t{freq!r}\t{genes}\n")


def _selection_masks(
    X: np.ndarray,
    y: np.ndarray,
    pmap: PathwayMap,
    expanded,
    config: StabilityConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Fit once; return boolean (pathway selected, feature selected) masks."""
    grid = lambda_grid_from_scores(X.T @ y, pmap.groups, config.alpha, config.weights)
    lam = config.lambda_frac * grid.lambda_max
    sgl = SglConfig(
        lam=lam,
        alpha=config.alpha,
        weights=config.weights,
        tol=config.tol,
        outer_tol=config.outer_tol,
        max_inner_iters=config.max_inner_iters,
        max_outer_iters=config.max_outer_iters,
    )
    path_mask = np.zeros(pmap.n_pathways, dtype=bool)
    snp_mask = np.zeros(len(pmap.snp_ids), dtype=bool)
    if config.algorithm == "cgd":
        blocks, _, _ = cgd_blocks(X, pmap.groups, y, sgl)
        columns = pmap.groups
    else:
        X_star = expanded.expand_matrix(X)
        blocks, *_ = bcgd_blocks(X_star, expanded.ranges, y, sgl)
        columns = [expanded.group_columns(l) for l in range(pmap.n_pathways)]
    for l, beta in enumerate(blocks):
        nz = np.flatnonzero(beta)
        if nz.size:
            path_mask[l] = True
            snp_mask[columns[l][nz]] = True
    return path_mask, snp_mask


def rank_by_stability(
    genotype: GenotypeMatrix,
    phenotype: Phenotype,
    pmap: PathwayMap,
    config: StabilityConfig,
    B: int = 1000,
    seed: int = 0,
    threads: int = 1,
    permute_null: bool = False,
) -> RankingResult:
    """Selection frequencies over B half-sample refits.

    Every subsample is re-standardized from the raw data (constant columns
    within the subsample are zeroed, so they simply cannot be selected
    there) and fitted at ``lambda_frac`` of its own empty-model level.
    With ``permute_null`` the response is freshly permuted within each
    subsample before fitting.  Results are independent of ``threads``.
    """
    if genotype.sample_ids != phenotype.sample_ids:
        order = {sid: i for i, sid in enumerate(phenotype.sample_ids)}
        perm = np.asarray([order[sid] for sid in genotype.sample_ids])
        raw_y = phenotype.y[perm]
        covs = phenotype.covariates[perm] if phenotype.covariates is not None else None
    else:
        raw_y = phenotype.y
        covs = phenotype.covariates

    values = genotype.values
    n = genotype.n_samples
    expanded = expand_overlaps(pmap) if config.algorithm == "bcgd" else None

    gene_ids = pmap.all_genes()
    gene_pos = {g: i for i, g in enumerate(gene_ids)}
    member_union = sorted(set().union(*[set(g.tolist()) for g in pmap.groups]))

    def one_subsample(b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        idx = subsample_indices(n, b, seed)
        y_b = raw_y[idx]
        if permute_null:
            y_b = derive_rng(seed, "null-permutation", b).permutation(y_b)
        covs_b = covs[idx] if covs is not None else None
        X, y, *_ = standardize_arrays(values[idx], y_b, covs_b)
        path_mask, snp_mask = _selection_masks(X, y, pmap, expanded, config)
        gene_mask = np.zeros(len(gene_ids), dtype=bool)
        for j in np.flatnonzero(snp_mask):
            for g in pmap.snp_to_genes.get(pmap.snp_ids[j], ()):
                gene_mask[gene_pos[g]] = True
        return path_mask, snp_mask, gene_mask

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_subsample, range(B)))
    else:
        results = [one_subsample(b) for b in range(B)]

    path_counts = np.zeros(pmap.n_pathways)
    snp_counts = np.zeros(len(pmap.snp_ids))
    gene_counts = np.zeros(len(gene_ids))
    path_sizes = np.empty(B)
    snp_sizes = np.empty(B)
    for b, (pm, sm, gm) in enumerate(results):
        path_counts += pm
        snp_counts += sm
        gene_counts += gm
        path_sizes[b] = pm.sum()
        snp_sizes[b] = sm.sum()

    return RankingResult(
        pathway_ids=list(pmap.pathway_ids),
        snp_ids=[pmap.snp_ids[j] for j in member_union],
        gene_ids=gene_ids,
        pathway_freq=path_counts / B,
        snp_freq=snp_counts[member_union] / B,
        gene_freq=gene_counts / B,
        B=B,
        subsample_size=n // 2,
        pathway_count_mean=float(path_sizes.mean()),
        pathway_count_sd=float(path_sizes.std(ddof=1)) if B > 1 else 0.0,
        snp_count_mean=float(snp_sizes.mean()),
        snp_count_sd=float(snp_sizes.std(ddof=1)) if B > 1 else 0.0,
        null=permute_null,
        snp_genes={sid: pmap.snp_to_genes.get(sid, ()) for sid in
                   (pmap.snp_ids[j] for j in member_union)},
    )


def null_ranking(
    genotype: GenotypeMatrix,
    phenotype: Phenotype,
    pmap: PathwayMap,
    config: StabilityConfig,
    B: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> RankingResult:
    """Ranking under per-subsample response permutation (selection bias null)."""
    return rank_by_stability(
        genotype, phenotype, pmap, config, B=B, seed=seed, threads=threads, permute_null=True
    )


def _pearson(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    if a.size < 2 or np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateVarianceError("correlation undefined for a constant vector")
    r, p = stats.pearsonr(a, b)
    return float(r), float(p)


def bias_diagnostics(empirical: RankingResult, null: RankingResult) -> dict:
    """Correlate observed and null selection frequencies.

    Pathway level uses every pathway; feature and gene levels are
    restricted to entries with nonzero observed frequency.  A strong
    positive correlation flags structural selection bias (block size,
    overlap, allele-frequency mix) rather than signal.
    """
    if (
        empirical.pathway_ids != null.pathway_ids
        or empirical.snp_ids != null.snp_ids
        or empirical.gene_ids != null.gene_ids
    ):
        raise PathsglError("empirical and null rankings cover different universes")
    out: dict[str, float] = {}
    out["pathway_r"], out["pathway_p"] = _pearson(empirical.pathway_freq, null.pathway_freq)
    keep = empirical.snp_freq > 0
    out["snp_r"], out["snp_p"] = _pearson(empirical.snp_freq[keep], null.snp_freq[keep])
    keepg = empirical.gene_freq > 0
    out["gene_r"], out["gene_p"] = _pearson(empirical.gene_freq[keepg], null.gene_freq[keepg])
    return out
