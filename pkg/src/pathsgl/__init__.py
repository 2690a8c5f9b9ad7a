"""Pathway-grouped sparse regression for genetic association studies.

Fits a dual-level (pathway and feature) sparse linear model over grouped,
possibly overlapping genotype features, calibrates penalty levels and
pathway weights, ranks selections by stability under subsampling, and
compares ranked variable lists.
"""

__version__ = "0.1.0"

from .data import (
    ExpandedIndex,
    GenotypeMatrix,
    PathwayMap,
    Phenotype,
    StandardizedData,
    expand_overlaps,
    load_genotypes,
    load_pathway_annotation,
    load_phenotype,
    standardize,
    standardize_arrays,
    write_genotypes,
    write_gmt,
    write_phenotype,
    write_snp_gene_map,
)
from .errors import (
    AlphaZeroError,
    DegenerateVarianceError,
    DuplicateIdError,
    EmptyTruthError,
    InvalidTopologyError,
    MissingValueError,
    NonConvergenceError,
    OutOfRangeError,
    PathsglError,
    PValueRangeError,
    RaggedRowError,
    SampleMismatchError,
    UniverseMismatchError,
    ZeroExpectationError,
    ZeroMafSumError,
)
from .penalty import (
    CardinalityMatch,
    LambdaGrid,
    compute_lambda_grid,
    lambda_grid_from_scores,
    lambda_max,
    lambda_min_batch,
    lambda_min_for_pathway,
    lambda_min_from_scores,
    lambda_star,
    lambda_star_from_scores,
    lasso_lambda_max,
    match_lasso_cardinality,
)
from .rankcompare import (
    RankArray,
    RankComparison,
    bh_qvalues,
    build_rank_arrays,
    canberra_topk,
    compare_ranked_lists,
    consensus_set,
    expected_canberra,
    mean_rank_summary,
    normalized_canberra,
    permutation_pvalues,
    read_ranked_list,
)
from .ranking import (
    RankingResult,
    StabilityConfig,
    bias_diagnostics,
    null_ranking,
    rank_by_stability,
    subsample_indices,
    write_ranking_tsv,
)
from .rng import derive_rng
from .simulate import (
    StudyReport,
    build_study1_pathways,
    build_study2_pathways,
    choose_causal_study1,
    choose_causal_study2,
    eligible_study2_pool,
    inject_effects,
    power_fpr,
    run_study1,
    run_study2,
    simulate_genotypes,
)
from .solver import (
    SglConfig,
    SglFit,
    bcgd_blocks,
    cgd_blocks,
    fit_lasso,
    fit_pathway_cgd,
    fit_sgl_bcgd,
    fit_sgl_cgd,
    kkt_block_residual,
    lasso_cd,
    lasso_objective,
    objective,
    pathway_selection_stat,
    sgl_objective,
    single_pathway_objective,
    soft_threshold,
)
from .weights import (
    TuneResult,
    empirical_selection_distribution,
    first_selected_pathway,
    load_weights_tsv,
    tune_weights,
    update_factors,
    write_weights_tsv,
)
