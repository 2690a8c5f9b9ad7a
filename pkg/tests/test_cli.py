"""End-to-end command-line runs over small file-based fixtures."""

import hashlib
import json

import numpy as np
import pytest

from pathsgl import GenotypeMatrix, Phenotype, __version__
from pathsgl.cli import main
from pathsgl.data import (
    write_genotypes,
    write_gmt,
    write_phenotype,
    write_snp_gene_map,
)
from pathsgl.simulate import inject_effects, simulate_genotypes
from pathsgl.weights import write_weights_tsv


@pytest.fixture()
def dataset(tmp_path):
    """Genotype/phenotype/annotation files with signal in pathway pw1."""
    rng = np.random.default_rng(0)
    values, mafs = simulate_genotypes(40, 12, rng)
    y = inject_effects(values, rng.normal(10, 1, 40), np.array([0, 1]), mafs, 0.6)
    samples = [f"S{i:02d}" for i in range(40)]
    snps = [f"rs{j:02d}" for j in range(12)]
    write_genotypes(tmp_path / "geno.tsv", GenotypeMatrix(samples, snps, values))
    write_phenotype(tmp_path / "pheno.tsv", Phenotype(samples, y))
    write_snp_gene_map(
        tmp_path / "map.tsv", {snps[j]: (f"G{j:02d}",) for j in range(12)}
    )
    write_gmt(
        tmp_path / "paths.gmt",
        {
            "pw1": [f"G{j:02d}" for j in range(0, 4)],
            "pw2": [f"G{j:02d}" for j in range(4, 8)],
            "pw3": [f"G{j:02d}" for j in range(8, 12)],
        },
    )
    return tmp_path


def dataset_args(root):
    return [
        "--genotypes",
        str(root / "geno.tsv"),
        "--phenotype",
        str(root / "pheno.tsv"),
        "--pathways",
        str(root / "paths.gmt"),
        "--snp-gene-map",
        str(root / "map.tsv"),
    ]


# ---------------------------------------------------------------------------
# fit


def test_fit_defaults_and_manifest(dataset):
    out = dataset / "out"
    rc = main(["fit", *dataset_args(dataset), "--out-dir", str(out)])
    assert rc == 0

    fit = json.loads((out / "fit.json").read_text())
    assert "pw1" in fit["selected_pathways"]

    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "fit"
    assert manifest["version"] == __version__
    assert manifest["seed"] == 0
    assert manifest["parameters"]["alpha"] == 0.95
    assert manifest["parameters"]["lambda_frac"] == 0.95
    assert manifest["outputs"] == ["fit.json"]
    for path, digest in manifest["inputs"].items():
        assert digest == hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_fit_above_empty_model_level_selects_nothing(dataset):
    out = dataset / "out"
    rc = main(
        ["fit", *dataset_args(dataset), "--out-dir", str(out), "--lambda-frac", "1.01"]
    )
    assert rc == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["selected_pathways"] == []
    assert fit["coefficients"] == {}


def test_fit_missing_input_exits_2(dataset, capsys):
    args = dataset_args(dataset)
    args[1] = str(dataset / "nonexistent.tsv")
    rc = main(["fit", *args, "--out-dir", str(dataset / "out")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_fit_penalty_override_recorded(dataset):
    out = dataset / "out"
    rc = main(
        ["fit", *dataset_args(dataset), "--out-dir", str(out), "--penalty", "0.05"]
    )
    assert rc == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["parameters"]["lambda"] == 0.05
    assert manifest["parameters"]["lambda_frac"] is None


def test_fit_with_weights_file(dataset):
    write_weights_tsv(dataset / "w.tsv", ["pw1", "pw2", "pw3"], np.array([1.0, 1.0, 5.0]))
    out = dataset / "out"
    rc = main(
        [
            "fit",
            *dataset_args(dataset),
            "--weights",
            str(dataset / "w.tsv"),
            "--out-dir",
            str(out),
        ]
    )
    assert rc == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert "weights" in str(manifest["inputs"])


def test_fit_reruns_are_byte_identical(dataset):
    out1, out2 = dataset / "o1", dataset / "o2"
    base = ["fit", *dataset_args(dataset), "--algorithm", "bcgd", "--seed", "7"]
    assert main([*base, "--out-dir", str(out1)]) == 0
    assert main([*base, "--out-dir", str(out2)]) == 0
    assert (out1 / "fit.json").read_bytes() == (out2 / "fit.json").read_bytes()
    assert (
        out1 / "run_manifest.json"
    ).read_bytes() == (out2 / "run_manifest.json").read_bytes()


# ---------------------------------------------------------------------------
# rank


def rank_args(root, out, extra=()):
    return [
        "rank",
        *dataset_args(root),
        "--out-dir",
        str(out),
        "--subsamples",
        "12",
        "--lambda-frac",
        "0.7",
        "--alpha",
        "0.9",
        "--seed",
        "5",
        *extra,
    ]


def test_rank_outputs_and_null_diagnostics(dataset):
    out = dataset / "out"
    rc = main(rank_args(dataset, out, ["--with-null", "--threads", "2"]))
    assert rc == 0
    produced = {
        "pathway_ranking.tsv",
        "snp_ranking.tsv",
        "gene_ranking.tsv",
        "null_pathway_ranking.tsv",
        "null_snp_ranking.tsv",
        "null_gene_ranking.tsv",
        "ranking_summary.json",
        "run_manifest.json",
    }
    assert produced <= {p.name for p in out.iterdir()}

    lines = (out / "pathway_ranking.tsv").read_text().splitlines()
    assert lines[0] == "rank\tid\tfrequency\tgenes"
    top = lines[1].split("\t")
    assert top[0] == "1" and top[1] == "pw1"  # signal pathway leads

    summary = json.loads((out / "ranking_summary.json").read_text())
    assert summary["B"] == 12 and summary["subsample_size"] == 20
    assert {"pathway_r", "pathway_p", "snp_r", "snp_p", "gene_r", "gene_p"} <= set(
        summary["bias_diagnostics"]
    )


def test_rank_thread_count_does_not_change_outputs(dataset):
    out1, out2 = dataset / "t1", dataset / "t2"
    assert main(rank_args(dataset, out1, ["--threads", "1"])) == 0
    assert main(rank_args(dataset, out2, ["--threads", "4"])) == 0
    for name in ("pathway_ranking.tsv", "snp_ranking.tsv", "gene_ranking.tsv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_rank_reads_thread_env(dataset, monkeypatch):
    monkeypatch.setenv("SGL_THREADS", "2")
    out = dataset / "env"
    assert main(rank_args(dataset, out)) == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["parameters"]["threads"] == 2

    monkeypatch.setenv("SGL_THREADS", "many")
    rc = main(rank_args(dataset, dataset / "bad"))
    assert rc == 2


# ---------------------------------------------------------------------------
# tune-weights


def test_tune_weights_writes_trace(dataset):
    out = dataset / "out"
    rc = main(
        [
            "tune-weights",
            *dataset_args(dataset),
            "--out-dir",
            str(out),
            "--alpha",
            "0.9",
            "--permutations",
            "64",
            "--max-iters",
            "10",
            "--seed",
            "3",
        ]
    )
    assert rc in (0, 3)  # converged or best-iterate fallback, both write
    weights = (out / "weights.tsv").read_text().splitlines()
    assert weights[0] == "pathway_id\tweight"
    assert len(weights) == 4
    trace = json.loads((out / "tuning_trace.json").read_text())
    assert {"converged", "iterations", "sum_abs_dev", "distribution", "trace"} == set(
        trace
    )
    entry = trace["trace"][0]
    assert {"iteration", "weights", "distribution", "sum_abs_dev", "factors"} == set(
        entry
    )
    assert len(entry["factors"]) == 3


def test_tune_weights_nonconvergence_exit_3(dataset, capsys):
    # a single iteration cannot reach a 3-pathway deviation below 0.05
    out = dataset / "out"
    rc = main(
        [
            "tune-weights",
            *dataset_args(dataset),
            "--out-dir",
            str(out),
            "--alpha",
            "0.9",
            "--permutations",
            "16",
            "--max-iters",
            "1",
            "--epsilon",
            "0.0001",
            "--seed",
            "3",
        ]
    )
    assert rc == 3
    assert "warning" in capsys.readouterr().err
    assert (out / "weights.tsv").exists()  # outputs written despite exit 3


# ---------------------------------------------------------------------------
# compare-ranks


def test_compare_ranks_identical_lists(dataset, tmp_path):
    lst = tmp_path / "a.txt"
    lst.write_text("".join(f"v{i}\n" for i in range(10)))
    out = tmp_path / "out"
    rc = main(
        [
            "compare-ranks",
            "--list-a",
            str(lst),
            "--list-b",
            str(lst),
            "--out-dir",
            str(out),
            "--permutations",
            "20",
            "--mc-samples",
            "30",
        ]
    )
    assert rc == 0
    report = json.loads((out / "rank_comparison.json").read_text())
    assert all(v == 0.0 for v in report["distances"])
    assert all(v == 0.0 for v in report["normalized"])
    assert all(v == 1.0 for v in report["p_values"])
    assert all(v == 1.0 for v in report["q_values"])
    assert report["best_k"] == 1


def test_compare_ranks_k_range_and_validation(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("x\ny\nz\n")
    b.write_text("z\nx\nw\n")
    out = tmp_path / "out"
    rc = main(
        [
            "compare-ranks",
            "--list-a",
            str(a),
            "--list-b",
            str(b),
            "--out-dir",
            str(out),
            "--k-min",
            "1",
            "--k-max",
            "3",
            "--permutations",
            "10",
            "--mc-samples",
            "10",
        ]
    )
    assert rc == 0
    report = json.loads((out / "rank_comparison.json").read_text())
    assert report["k_values"] == [1, 2, 3]
    assert report["universe_size"] == 4

    rc = main(
        [
            "compare-ranks",
            "--list-a",
            str(a),
            "--list-b",
            str(b),
            "--out-dir",
            str(out),
            "--k-min",
            "1",
        ]
    )
    assert rc == 2  # k-min without k-max


def test_compare_ranks_seeded_reruns_identical(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("".join(f"g{i}\n" for i in range(12)))
    b.write_text("".join(f"g{i}\n" for i in np.random.default_rng(1).permutation(12)))
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        rc = main(
            [
                "compare-ranks",
                "--list-a",
                str(a),
                "--list-b",
                str(b),
                "--out-dir",
                str(out),
                "--permutations",
                "25",
                "--mc-samples",
                "25",
                "--seed",
                "9",
            ]
        )
        assert rc == 0
        outs.append((out / "rank_comparison.json").read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# simulate


def test_simulate_study1_writes_report(tmp_path):
    out = tmp_path / "out"
    rc = main(
        [
            "simulate",
            "--study",
            "1",
            "--gammas",
            "0.12",
            "--replicates",
            "2",
            "--out-dir",
            str(out),
            "--seed",
            "1",
        ]
    )
    assert rc == 0
    report = json.loads((out / "study_report.json").read_text())
    assert report["study"] == 1
    assert report["config"]["alpha"] == 0.8  # study-1 default mixing
    assert len(report["records"]) == 2
    records = (out / "study_records.tsv").read_text().splitlines()
    assert len(records) == 3  # header + one row per replicate
    header = records[0].split("\t")
    assert "sgl_snp_power" in header and "lasso_snp_power" in header
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["outputs"] == ["study_records.tsv", "study_report.json"]


def test_simulate_rejects_empty_gammas(tmp_path, capsys):
    rc = main(
        [
            "simulate",
            "--study",
            "1",
            "--gammas",
            ",",
            "--replicates",
            "1",
            "--out-dir",
            str(tmp_path / "out"),
        ]
    )
    assert rc == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# version


def test_version_prints_package_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == f"pathsgl {__version__}"
