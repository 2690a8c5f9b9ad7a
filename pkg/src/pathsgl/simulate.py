"""Synthetic genotype studies for power and false-positive benchmarking.

Two fixed layouts: disjoint pathways with causal features planted either
inside one pathway or scattered (study 1), and a chain of overlapping
pathways with causal features drawn from the private-plus-shared region
of one adjacent pair (study 2).  Genotypes are allele counts drawn from
Hardy-Weinberg proportions at uniform random allele frequencies; effects
are added on the raw counts so allele frequency shapes effect size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import PathwayMap, expand_overlaps
from .errors import EmptyTruthError, InvalidTopologyError, ZeroMafSumError
from .penalty import lambda_grid_from_scores, match_lasso_cardinality
from .rng import derive_rng
from .solver import SglConfig, bcgd_blocks, cgd_blocks

logger = logging.getLogger(__name__)

EXPECTED_BASELINE = 10.0  # theoretical mean of the baseline response


def simulate_genotypes(
    n: int, p: int, rng: np.random.Generator, maf_low: float = 0.1, maf_high: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Allele-count matrix under Hardy-Weinberg proportions.

    Each column draws its allele frequency m uniformly from
    [maf_low, maf_high]; counts 0/1/2 then occur with probabilities
    (1-m)^2, 2m(1-m), m^2.  Returns (values, frequencies).
    """
    if not (0.0 < maf_low <= maf_high <= 1.0):
        raise InvalidTopologyError("allele frequency bounds must satisfy 0 < low <= high <= 1")
    mafs = rng.uniform(maf_low, maf_high, p)
    p0 = (1.0 - mafs) ** 2
    p01 = p0 + 2.0 * mafs * (1.0 - mafs)
    u = rng.random((n, p))
    values = ((u > p0).astype(np.int8) + (u > p01).astype(np.int8))
    return values, mafs


def _synthetic_map(
    n_features: int,
    group_starts: list[int],
    group_size: int,
    snps_per_gene: int,
) -> PathwayMap:
    if n_features % snps_per_gene != 0:
        raise InvalidTopologyError("feature count must be a multiple of snps_per_gene")
    width = len(str(n_features))
    snp_ids = [f"snp{j + 1:0{width}d}" for j in range(n_features)]
    n_genes = n_features // snps_per_gene
    gwidth = len(str(n_genes))
    gene_of = [f"gene{j // snps_per_gene + 1:0{gwidth}d}" for j in range(n_features)]
    snp_to_genes = {snp_ids[j]: (gene_of[j],) for j in range(n_features)}

    L = len(group_starts)
    pwidth = len(str(L))
    pathway_ids = [f"path{l + 1:0{pwidth}d}" for l in range(L)]
    groups = [np.arange(s, s + group_size, dtype=np.intp) for s in group_starts]
    gene_to_pathways: dict[str, list[str]] = {}
    for l, g in enumerate(groups):
        if g[-1] >= n_features:
            raise InvalidTopologyError("pathway runs past the feature universe")
        for j in g:
            gene_to_pathways.setdefault(gene_of[j], [])
            if pathway_ids[l] not in gene_to_pathways[gene_of[j]]:
                gene_to_pathways[gene_of[j]].append(pathway_ids[l])
    return PathwayMap(
        pathway_ids,
        groups,
        snp_ids,
        snp_to_genes,
        {g: tuple(p) for g, p in gene_to_pathways.items()},
    )


def build_study1_pathways(
    p: int = 2500, L: int = 50, snps_per_gene: int = 5
) -> PathwayMap:
    """Disjoint consecutive pathways of equal size covering all features."""
    if p % L != 0:
        raise InvalidTopologyError(f"{p} features do not split into {L} equal pathways")
    size = p // L
    if size % snps_per_gene != 0:
        raise InvalidTopologyError("pathway size must be a multiple of snps_per_gene")
    return _synthetic_map(p, [l * size for l in range(L)], size, snps_per_gene)


def build_study2_pathways(
    L: int = 50, size: int = 30, overlap: int = 10, snps_per_gene: int = 5
) -> PathwayMap:
    """Chain of pathways where each shares ``overlap`` features with the next.

    Distinct feature count is L * (size - overlap) + overlap.
    """
    if not (0 < overlap < size):
        raise InvalidTopologyError("overlap must be strictly between 0 and the pathway size")
    stride = size - overlap
    if size % snps_per_gene or stride % snps_per_gene:
        raise InvalidTopologyError("size and stride must be multiples of snps_per_gene")
    n_features = L * stride + overlap
    return _synthetic_map(n_features, [l * stride for l in range(L)], size, snps_per_gene)


def choose_causal_study1(
    pmap: PathwayMap, n_causal: int, enriched: bool, rng: np.random.Generator
) -> np.ndarray:
    """Causal feature indices: within one random pathway, or anywhere."""
    if enriched:
        l = int(rng.integers(pmap.n_pathways))
        pool = pmap.groups[l]
    else:
        pool = np.arange(len(pmap.snp_ids))
    if n_causal > pool.size:
        raise InvalidTopologyError("cannot draw more causal features than the pool holds")
    return np.sort(rng.choice(pool, n_causal, replace=False))


def eligible_study2_pool(pmap: PathwayMap, l: int) -> np.ndarray:
    """Features private to pathways l, l+1 relative to their outer neighbors.

    (G_l minus G_{l-1}) union (G_{l+1} minus G_{l+2}); a missing outer
    neighbor contributes nothing to the subtraction.
    """
    L = pmap.n_pathways
    if not (0 <= l < L - 1):
        raise InvalidTopologyError(f"adjacent pair index {l} out of range")
    g = lambda i: set(pmap.groups[i].tolist()) if 0 <= i < L else set()
    pool = (g(l) - g(l - 1)) | (g(l + 1) - g(l + 2))
    return np.asarray(sorted(pool), dtype=np.intp)


def choose_causal_study2(
    pmap: PathwayMap, n_causal: int, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """Draw causal features for one random adjacent pathway pair."""
    l = int(rng.integers(pmap.n_pathways - 1))
    pool = eligible_study2_pool(pmap, l)
    if n_causal > pool.size:
        raise InvalidTopologyError("cannot draw more causal features than the pool holds")
    return np.sort(rng.choice(pool, n_causal, replace=False)), l


def inject_effects(
    values: np.ndarray,
    y_base: np.ndarray,
    causal: np.ndarray,
    mafs: np.ndarray,
    gamma: float,
    expected_y: float = EXPECTED_BASELINE,
) -> np.ndarray:
    """Add genetic effects on raw allele counts to a baseline response.

    Equal per-feature loadings 1/|S| scaled so the total effect is a
    ``gamma`` fraction of the response mean:
    delta = |S| * gamma * E(y) / (2 * sum of causal allele frequencies).
    """
    causal = np.asarray(causal)
    maf_sum = float(mafs[causal].sum())
    if maf_sum == 0.0:
        raise ZeroMafSumError("causal allele frequencies sum to zero")
    s = causal.size
    delta = s * gamma * expected_y / (2.0 * maf_sum)
    loading = delta / s
    return y_base + loading * values[:, causal].sum(axis=1)


def power_fpr(selected: set, truth: set) -> tuple[float, float]:
    """(recovered fraction of truth, false fraction of selections).

    The false-positive rate of an empty selection is zero by convention.
    """
    if not truth:
        raise EmptyTruthError("power undefined for an empty true set")
    power = len(selected & truth) / len(truth)
    fpr = len(selected - truth) / len(selected) if selected else 0.0
    return power, fpr


def _standardize_design(values: np.ndarray) -> np.ndarray:
    X = values.astype(float)
    X -= X.mean(axis=0)
    ss = np.einsum("ij,ij->j", X, X)
    norms = np.sqrt(np.where(ss == 0.0, 1.0, ss))
    X /= norms
    X[:, ss == 0.0] = 0.0
    return X


def _pathways_containing(pmap: PathwayMap, features: set[int]) -> set[int]:
    return {
        l
        for l, g in enumerate(pmap.groups)
        if features.intersection(g.tolist())
    }


@dataclass
class StudyReport:
    """Per-replicate records and per-gamma aggregates of one study run."""

    study: int
    config: dict
    records: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "config": self.config,
            "records": self.records,
            "aggregates": self.aggregates,
        }


def _power_histogram(powers: list[float], n_causal: int) -> dict[str, int]:
    """Counts over the attainable power levels 0, 1/|S|, ..., 1."""
    hist = {f"{k}/{n_causal}": 0 for k in range(n_causal + 1)}
    for pw in powers:
        k = int(round(pw * n_causal))
        hist[f"{k}/{n_causal}"] += 1
    return hist


def run_study1(
    gammas=(0.04, 0.08, 0.12),
    replicates: int = 100,
    seed: int = 0,
    n: int = 400,
    p: int = 2500,
    L: int = 50,
    n_causal: int = 5,
    enriched: bool = True,
    lambda_frac: float = 0.85,
    alpha: float = 0.8,
    algorithm: str = "bcgd",
    with_lasso: bool = True,
    tol: float = 1e-6,
) -> StudyReport:
    """Disjoint-pathway benchmark against a cardinality-matched lasso.

    One genotype draw is shared by all replicates; each replicate draws a
    fresh baseline response and causal set.  The sparse-group fit runs at
    ``lambda_frac`` of the replicate's empty-model level; the lasso is
    matched to the same number of selected features.
    """
    pmap = build_study1_pathways(p, L)
    geno_rng = derive_rng(seed, "study1-genotypes")
    values, mafs = simulate_genotypes(n, p, geno_rng)
    X = _standardize_design(values)
    expanded = expand_overlaps(pmap) if algorithm == "bcgd" else None
    X_star = X[:, expanded.backmap] if expanded is not None else None

    report = StudyReport(
        study=1,
        config={
            "gammas": [float(g) for g in gammas],
            "replicates": replicates,
            "seed": seed,
            "n": n,
            "p": p,
            "L": L,
            "n_causal": n_causal,
            "enriched": enriched,
            "lambda_frac": lambda_frac,
            "alpha": alpha,
            "algorithm": algorithm,
        },
    )

    for gi, gamma in enumerate(gammas):
        sgl_path_power = []
        sgl_path_fpr = []
        sgl_snp_power = []
        sgl_snp_fpr = []
        lasso_snp_power = []
        lasso_snp_fpr = []
        for rep in range(replicates):
            rng = derive_rng(seed, "study1-replicate", gi, rep)
            y_base = rng.normal(EXPECTED_BASELINE, 1.0, n)
            causal = choose_causal_study1(pmap, n_causal, enriched, rng)
            y_raw = inject_effects(values, y_base, causal, mafs, float(gamma))
            y = y_raw - y_raw.mean()

            grid = lambda_grid_from_scores(X.T @ y, pmap.groups, alpha)
            lam = lambda_frac * grid.lambda_max
            cfg = SglConfig(lam=lam, alpha=alpha, tol=tol)
            if algorithm == "bcgd":
                blocks, *_ = bcgd_blocks(X_star, expanded.ranges, y, cfg)
                columns = [expanded.group_columns(l) for l in range(L)]
            else:
                blocks, _, _ = cgd_blocks(X, pmap.groups, y, cfg)
                columns = pmap.groups
            sel_paths = set()
            sel_snps: set[int] = set()
            for l, beta in enumerate(blocks):
                nz = np.flatnonzero(beta)
                if nz.size:
                    sel_paths.add(l)
                    sel_snps.update(columns[l][nz].tolist())

            truth_snps = set(causal.tolist())
            truth_paths = _pathways_containing(pmap, truth_snps)
            ppow, pfpr = power_fpr(sel_paths, truth_paths)
            spow, sfpr = power_fpr(sel_snps, truth_snps)
            record = {
                "gamma": float(gamma),
                "replicate": rep,
                "sgl_selected_pathways": len(sel_paths),
                "sgl_selected_snps": len(sel_snps),
                "sgl_pathway_power": ppow,
                "sgl_pathway_fpr": pfpr,
                "sgl_snp_power": spow,
                "sgl_snp_fpr": sfpr,
            }
            sgl_path_power.append(ppow)
            sgl_path_fpr.append(pfpr)
            sgl_snp_power.append(spow)
            sgl_snp_fpr.append(sfpr)

            if with_lasso:
                match = match_lasso_cardinality(X, y, target_count=len(sel_snps))
                lasso_snps = set(np.flatnonzero(match.coefficients).tolist())
                lpow, lfpr = power_fpr(lasso_snps, truth_snps)
                record.update(
                    {
                        "lasso_lambda": match.lam,
                        "lasso_selected_snps": match.count,
                        "lasso_match_exact": match.exact,
                        "lasso_snp_power": lpow,
                        "lasso_snp_fpr": lfpr,
                    }
                )
                lasso_snp_power.append(lpow)
                lasso_snp_fpr.append(lfpr)
            report.records.append(record)

        agg = {
            "sgl_pathway_power_mean": float(np.mean(sgl_path_power)),
            "sgl_pathway_fpr_mean": float(np.mean(sgl_path_fpr)),
            "sgl_snp_power_mean": float(np.mean(sgl_snp_power)),
            "sgl_snp_fpr_mean": float(np.mean(sgl_snp_fpr)),
            "sgl_power_histogram": _power_histogram(sgl_snp_power, n_causal),
        }
        if with_lasso:
            agg.update(
                {
                    "lasso_snp_power_mean": float(np.mean(lasso_snp_power)),
                    "lasso_snp_fpr_mean": float(np.mean(lasso_snp_fpr)),
                    "lasso_power_histogram": _power_histogram(lasso_snp_power, n_causal),
                }
            )
        report.aggregates[f"{float(gamma)}"] = agg
    return report


def run_study2(
    gammas=(0.08, 0.12),
    replicates: int = 200,
    seed: int = 0,
    n: int = 400,
    L: int = 50,
    size: int = 30,
    overlap: int = 10,
    n_causal: int = 10,
    lambda_frac: float = 0.85,
    alpha: float = 0.85,
    tol: float = 1e-6,
) -> StudyReport:
    """Overlapping-pathway benchmark comparing both solvers.

    Causal features sit in the private-plus-shared region of one adjacent
    pathway pair; both the cyclic partial-residual solver and the
    independent single-pass solver are fitted on every replicate.
    """
    pmap = build_study2_pathways(L, size, overlap)
    p = len(pmap.snp_ids)
    geno_rng = derive_rng(seed, "study2-genotypes")
    values, mafs = simulate_genotypes(n, p, geno_rng)
    X = _standardize_design(values)
    expanded = expand_overlaps(pmap)
    X_star = X[:, expanded.backmap]
    exp_columns = [expanded.group_columns(l) for l in range(L)]

    report = StudyReport(
        study=2,
        config={
            "gammas": [float(g) for g in gammas],
            "replicates": replicates,
            "seed": seed,
            "n": n,
            "L": L,
            "size": size,
            "overlap": overlap,
            "p": p,
            "n_causal": n_causal,
            "lambda_frac": lambda_frac,
            "alpha": alpha,
        },
    )

    for gi, gamma in enumerate(gammas):
        per_algo: dict[str, dict[str, list[float]]] = {
            a: {"path_power": [], "path_fpr": [], "snp_power": [], "snp_fpr": [],
                "n_paths": [], "n_snps": []}
            for a in ("bcgd", "cgd")
        }
        for rep in range(replicates):
            rng = derive_rng(seed, "study2-replicate", gi, rep)
            y_base = rng.normal(EXPECTED_BASELINE, 1.0, n)
            causal, pair = choose_causal_study2(pmap, n_causal, rng)
            y_raw = inject_effects(values, y_base, causal, mafs, float(gamma))
            y = y_raw - y_raw.mean()
            truth_snps = set(causal.tolist())
            truth_paths = _pathways_containing(pmap, truth_snps)

            grid = lambda_grid_from_scores(X.T @ y, pmap.groups, alpha)
            cfg = SglConfig(lam=lambda_frac * grid.lambda_max, alpha=alpha, tol=tol)
            record = {"gamma": float(gamma), "replicate": rep, "causal_pair": pair}
            for algo in ("bcgd", "cgd"):
                if algo == "bcgd":
                    blocks, *_ = bcgd_blocks(X_star, expanded.ranges, y, cfg)
                    columns = exp_columns
                else:
                    blocks, _, _ = cgd_blocks(X, pmap.groups, y, cfg)
                    columns = pmap.groups
                sel_paths = set()
                sel_snps: set[int] = set()
                for l, beta in enumerate(blocks):
                    nz = np.flatnonzero(beta)
                    if nz.size:
                        sel_paths.add(l)
                        sel_snps.update(columns[l][nz].tolist())
                ppow, pfpr = power_fpr(sel_paths, truth_paths)
                spow, sfpr = power_fpr(sel_snps, truth_snps)
                bucket = per_algo[algo]
                bucket["path_power"].append(ppow)
                bucket["path_fpr"].append(pfpr)
                bucket["snp_power"].append(spow)
                bucket["snp_fpr"].append(sfpr)
                bucket["n_paths"].append(len(sel_paths))
                bucket["n_snps"].append(len(sel_snps))
                record.update(
                    {
                        f"{algo}_selected_pathways": len(sel_paths),
                        f"{algo}_selected_snps": len(sel_snps),
                        f"{algo}_pathway_power": ppow,
                        f"{algo}_pathway_fpr": pfpr,
                        f"{algo}_snp_power": spow,
                        f"{algo}_snp_fpr": sfpr,
                    }
                )
            report.records.append(record)

        report.aggregates[f"{float(gamma)}"] = {
            algo: {
                "pathway_power_mean": float(np.mean(b["path_power"])),
                "pathway_fpr_mean": float(np.mean(b["path_fpr"])),
                "snp_power_mean": float(np.mean(b["snp_power"])),
                "snp_fpr_mean": float(np.mean(b["snp_fpr"])),
                "selected_pathways_mean": float(np.mean(b["n_paths"])),
                "selected_snps_mean": float(np.mean(b["n_snps"])),
            }
            for algo, b in per_algo.items()
        }
    return report
