"""Command-line entry points.

Every subcommand writes a run manifest next to its outputs recording the
command, package version, master seed, resolved parameters, and a sha256
digest of every input file, so a run can be reproduced byte for byte.

Exit codes: 0 success, 2 validation failure (one-line diagnostic on
stderr), 3 solver non-convergence (outputs are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import expand_overlaps, load_genotypes, load_pathway_annotation, load_phenotype, standardize
from .errors import PathsglError
from .penalty import compute_lambda_grid
from .rankcompare import compare_ranked_lists, read_ranked_list
from .ranking import (
    StabilityConfig,
    bias_diagnostics,
    null_ranking,
    rank_by_stability,
    write_ranking_tsv,
)
from .simulate import run_study1, run_study2
from .solver import SglConfig, fit_sgl_bcgd, fit_sgl_cgd
from .weights import load_weights_tsv, tune_weights, write_weights_tsv

logger = logging.getLogger(__name__)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _emit_manifest(out_dir: Path, command: str, inputs: dict, params: dict, outputs: list[str], seed) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "parameters": params,
        "inputs": {str(p): digest for p, digest in inputs.items()},
        "outputs": sorted(outputs),
    }
    _write_json(out_dir / "run_manifest.json", manifest)


def _digest_inputs(paths: dict) -> dict:
    # digests are taken up front, before any parsing touches the files
    return {p: _sha256(p) for p in paths.values()}


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("SGL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise PathsglError(f"SGL_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _load_dataset(args):
    genotype = load_genotypes(args.genotypes)
    phenotype = load_phenotype(args.phenotype)
    pmap = load_pathway_annotation(args.pathways, args.snp_gene_map, genotype)
    return genotype, phenotype, pmap


def _add_dataset_args(sp) -> None:
    sp.add_argument("--genotypes", required=True, help="genotype TSV (samples x features)")
    sp.add_argument("--phenotype", required=True, help="phenotype TSV (sample_id, y, covariates)")
    sp.add_argument("--pathways", required=True, help="GMT file: pathway, then its genes")
    sp.add_argument("--snp-gene-map", required=True, help="TSV mapping feature id to gene id")
    sp.add_argument("--weights", help="optional pathway weights TSV")
    sp.add_argument("--out-dir", required=True, help="directory for outputs")


def _dataset_input_paths(args) -> dict:
    paths = {
        "genotypes": args.genotypes,
        "phenotype": args.phenotype,
        "pathways": args.pathways,
        "snp_gene_map": args.snp_gene_map,
    }
    if args.weights:
        paths["weights"] = args.weights
    return paths


def cmd_fit(args) -> int:
    inputs = _digest_inputs(_dataset_input_paths(args))
    genotype, phenotype, pmap = _load_dataset(args)
    data = standardize(genotype, phenotype)
    weights = load_weights_tsv(args.weights, pmap.pathway_ids) if args.weights else None

    if args.penalty is not None:
        lam = args.penalty
    else:
        lam = args.lambda_frac * compute_lambda_grid(data, pmap, args.alpha, weights).lambda_max
    config = SglConfig(lam=lam, alpha=args.alpha, weights=weights)
    if args.algorithm == "bcgd":
        fit = fit_sgl_bcgd(data, pmap, expand_overlaps(pmap), config)
    else:
        fit = fit_sgl_cgd(data, pmap, config)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "fit.json", fit.to_dict())
    params = {
        "algorithm": args.algorithm,
        "alpha": args.alpha,
        "lambda": lam,
        "lambda_frac": None if args.penalty is not None else args.lambda_frac,
    }
    _emit_manifest(out_dir, "fit", inputs, params, ["fit.json"], args.seed)
    if not fit.converged:
        print("warning: solver did not fully converge; outputs written", file=sys.stderr)
        return 3
    return 0


def cmd_rank(args) -> int:
    inputs = _digest_inputs(_dataset_input_paths(args))
    genotype, phenotype, pmap = _load_dataset(args)
    weights = load_weights_tsv(args.weights, pmap.pathway_ids) if args.weights else None
    config = StabilityConfig(
        alpha=args.alpha,
        lambda_frac=args.lambda_frac,
        weights=weights,
        algorithm=args.algorithm,
    )
    threads = _resolve_threads(args.threads)
    result = rank_by_stability(
        genotype, phenotype, pmap, config, B=args.subsamples, seed=args.seed, threads=threads
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for level in ("pathway", "snp", "gene"):
        name = f"{level}_ranking.tsv"
        write_ranking_tsv(out_dir / name, result.table(level))
        outputs.append(name)
    summary = {
        "B": result.B,
        "subsample_size": result.subsample_size,
        "pathway_count_mean": result.pathway_count_mean,
        "pathway_count_sd": result.pathway_count_sd,
        "snp_count_mean": result.snp_count_mean,
        "snp_count_sd": result.snp_count_sd,
    }
    if args.with_null:
        null = null_ranking(
            genotype, phenotype, pmap, config, B=args.subsamples, seed=args.seed, threads=threads
        )
        for level in ("pathway", "snp", "gene"):
            name = f"null_{level}_ranking.tsv"
            write_ranking_tsv(out_dir / name, null.table(level))
            outputs.append(name)
        summary["bias_diagnostics"] = bias_diagnostics(result, null)
    _write_json(out_dir / "ranking_summary.json", summary)
    outputs.append("ranking_summary.json")
    params = {
        "algorithm": args.algorithm,
        "alpha": args.alpha,
        "lambda_frac": args.lambda_frac,
        "B": args.subsamples,
        "threads": threads,
        "with_null": bool(args.with_null),
    }
    _emit_manifest(out_dir, "rank", inputs, params, outputs, args.seed)
    return 0


def cmd_tune_weights(args) -> int:
    inputs = _digest_inputs(_dataset_input_paths(args))
    genotype, phenotype, pmap = _load_dataset(args)
    data = standardize(genotype, phenotype)
    init = load_weights_tsv(args.weights, pmap.pathway_ids) if args.weights else None
    result = tune_weights(
        data,
        pmap,
        alpha=args.alpha,
        eta=args.eta,
        epsilon=args.epsilon,
        R=args.permutations,
        max_iters=args.max_iters,
        seed=args.seed,
        init_weights=init,
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_weights_tsv(out_dir / "weights.tsv", pmap.pathway_ids, result.weights)
    trace = {
        "converged": result.converged,
        "iterations": result.iterations,
        "sum_abs_dev": result.sum_abs_dev,
        "distribution": [float(v) for v in result.distribution],
        "trace": [
            {
                "iteration": t["iteration"],
                "weights": [float(v) for v in t["weights"]],
                "distribution": [float(v) for v in t["distribution"]],
                "sum_abs_dev": t["sum_abs_dev"],
                "factors": [float(v) for v in t["factors"]],
            }
            for t in result.trace
        ],
    }
    _write_json(out_dir / "tuning_trace.json", trace)
    params = {
        "alpha": args.alpha,
        "eta": args.eta,
        "epsilon": args.epsilon,
        "R": args.permutations,
        "max_iters": args.max_iters,
    }
    _emit_manifest(
        out_dir, "tune-weights", inputs, params, ["weights.tsv", "tuning_trace.json"], args.seed
    )
    if not result.converged:
        print(
            f"warning: tuning stopped at deviation {result.sum_abs_dev:.4f}; outputs written",
            file=sys.stderr,
        )
        return 3
    return 0


def cmd_compare_ranks(args) -> int:
    inputs = _digest_inputs({"list_a": args.list_a, "list_b": args.list_b})
    list_a = read_ranked_list(args.list_a)
    list_b = read_ranked_list(args.list_b)
    k_values = None
    if args.k_min is not None or args.k_max is not None:
        k_min = args.k_min or 1
        if args.k_max is None:
            raise PathsglError("--k-max is required when --k-min is given")
        k_values = list(range(k_min, args.k_max + 1))
    comparison = compare_ranked_lists(
        list_a, list_b, k_values=k_values, Z=args.permutations, M=args.mc_samples, seed=args.seed
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "rank_comparison.json", comparison.to_dict())
    params = {
        "k_min": args.k_min,
        "k_max": args.k_max,
        "Z": args.permutations,
        "M": args.mc_samples,
    }
    _emit_manifest(
        out_dir, "compare-ranks", inputs, params, ["rank_comparison.json"], args.seed
    )
    return 0


def cmd_simulate(args) -> int:
    gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
    if not gammas:
        raise PathsglError("--gammas must list at least one value")
    if args.study == 1:
        report = run_study1(
            gammas=gammas,
            replicates=args.replicates,
            seed=args.seed,
            enriched=not args.random_placement,
            lambda_frac=args.lambda_frac,
            alpha=args.alpha,
            algorithm=args.algorithm,
        )
    else:
        report = run_study2(
            gammas=gammas,
            replicates=args.replicates,
            seed=args.seed,
            lambda_frac=args.lambda_frac,
            alpha=args.alpha,
        )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "study_report.json", report.to_dict())
    columns = sorted({key for rec in report.records for key in rec})
    with open(out_dir / "study_records.tsv", "wt", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for rec in report.records:
            cells = []
            for col in columns:
                v = rec.get(col, "")
                cells.append(repr(v) if isinstance(v, float) else str(v))
            fh.write("\t".join(cells) + "\n")
    params = {
        "study": args.study,
        "gammas": gammas,
        "replicates": args.replicates,
        "alpha": args.alpha,
        "lambda_frac": args.lambda_frac,
    }
    _emit_manifest(
        out_dir, "simulate", {}, params, ["study_report.json", "study_records.tsv"], args.seed
    )
    return 0


def cmd_version(_args) -> int:
    print(f"pathsgl {__version__}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathsgl",
        description="Pathway-grouped sparse regression: fitting, ranking, and rank comparison.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="fit the sparse group model once")
    _add_dataset_args(sp)
    sp.add_argument("--algorithm", choices=("cgd", "bcgd"), default="cgd")
    sp.add_argument("--alpha", type=float, default=0.95)
    sp.add_argument("--lambda-frac", type=float, default=0.95,
                    help="penalty as a fraction of the empty-model level")
    sp.add_argument("--penalty", type=float, default=None,
                    help="absolute penalty level (overrides --lambda-frac)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("rank", help="stability ranking over half-sample refits")
    _add_dataset_args(sp)
    sp.add_argument("--algorithm", choices=("cgd", "bcgd"), default="cgd")
    sp.add_argument("--alpha", type=float, default=0.95)
    sp.add_argument("--lambda-frac", type=float, default=0.95)
    sp.add_argument("--subsamples", "-B", type=int, default=1000)
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: SGL_THREADS or all cores)")
    sp.add_argument("--with-null", action="store_true",
                    help="also rank under per-subsample response permutation")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("tune-weights", help="tune pathway weights on permuted responses")
    _add_dataset_args(sp)
    sp.add_argument("--alpha", type=float, default=0.95)
    sp.add_argument("--eta", type=float, default=0.5)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--permutations", "-R", type=int, default=500)
    sp.add_argument("--max-iters", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_tune_weights)

    sp = sub.add_parser("compare-ranks", help="top-k agreement of two ranked lists")
    sp.add_argument("--list-a", required=True)
    sp.add_argument("--list-b", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--k-min", type=int, default=None)
    sp.add_argument("--k-max", type=int, default=None)
    sp.add_argument("--permutations", "-Z", type=int, default=1000)
    sp.add_argument("--mc-samples", "-M", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_compare_ranks)

    sp = sub.add_parser("simulate", help="run a synthetic benchmark study")
    sp.add_argument("--study", type=int, choices=(1, 2), required=True)
    sp.add_argument("--gammas", default="0.12", help="comma-separated effect fractions")
    sp.add_argument("--replicates", type=int, default=100)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--lambda-frac", type=float, default=0.85)
    sp.add_argument("--algorithm", choices=("cgd", "bcgd"), default="bcgd",
                    help="study 1 solver (study 2 always runs both)")
    sp.add_argument("--random-placement", action="store_true",
                    help="study 1: scatter causal features instead of enriching one pathway")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("version", help="print the package version")
    sp.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.alpha is None:
        args.alpha = 0.8 if args.study == 1 else 0.85
    try:
        return args.func(args)
    except (PathsglError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
