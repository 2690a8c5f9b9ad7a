"""Data containers and loaders: genotypes, phenotypes, pathway annotation.

File formats are deliberately plain TSV/GMT so fixtures can be written by
hand.  All heavy numeric state lives in numpy arrays; identifier lists keep
their file order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateIdError,
    MissingValueError,
    PathsglError,
    RaggedRowError,
    SampleMismatchError,
)

logger = logging.getLogger(__name__)

_ALLOWED_CELLS = {"0", "1", "2"}


def _check_unique(ids, what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateIdError(f"duplicate {what} id: {i!r}")
        seen.add(i)


@dataclass
class GenotypeMatrix:
    """Allele-count matrix, samples by SNPs, entries in {0, 1, 2}."""

    sample_ids: list[str]
    snp_ids: list[str]
    values: np.ndarray  # (N, P) int8

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (len(self.sample_ids), len(self.snp_ids)):
            raise PathsglError("genotype shape does not match id lists")
        bad = ~np.isin(self.values, (0, 1, 2))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise MissingValueError(
                f"genotype cell ({self.sample_ids[i]}, {self.snp_ids[j]}) "
                f"is {self.values[i, j]!r}, expected 0/1/2"
            )
        _check_unique(self.sample_ids, "sample")
        _check_unique(self.snp_ids, "feature")

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def n_features(self) -> int:
        return len(self.snp_ids)


@dataclass
class Phenotype:
    """Quantitative response plus optional covariate columns."""

    sample_ids: list[str]
    y: np.ndarray  # (N,)
    covariates: np.ndarray | None = None  # (N, K) or None
    covariate_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (len(self.sample_ids),):
            raise PathsglError("phenotype length does not match sample ids")
        if self.covariates is not None:
            self.covariates = np.asarray(self.covariates, dtype=float)
            if self.covariates.shape[0] != len(self.sample_ids):
                raise PathsglError("covariate rows do not match sample ids")
        _check_unique(self.sample_ids, "sample")


@dataclass
class PathwayMap:
    """Grouping of genotype features into (possibly overlapping) pathways.

    ``groups[l]`` holds sorted indices into the feature universe
    ``snp_ids``; the same index may appear in several groups.
    """

    pathway_ids: list[str]
    groups: list[np.ndarray]
    snp_ids: list[str]
    snp_to_genes: dict[str, tuple[str, ...]]
    gene_to_pathways: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        _check_unique(self.pathway_ids, "pathway")
        self.groups = [np.asarray(g, dtype=np.intp) for g in self.groups]
        if len(self.groups) != len(self.pathway_ids):
            raise PathsglError("group count does not match pathway ids")
        p = len(self.snp_ids)
        for pid, g in zip(self.pathway_ids, self.groups):
            if g.size == 0:
                raise PathsglError(f"pathway {pid!r} has no features")
            if g.min() < 0 or g.max() >= p:
                raise PathsglError(f"pathway {pid!r} has out-of-range feature index")
            if np.any(np.diff(g) <= 0):
                raise PathsglError(f"pathway {pid!r} indices must be sorted and unique")

    @property
    def n_pathways(self) -> int:
        return len(self.pathway_ids)

    def member_ids(self, l: int) -> list[str]:
        return [self.snp_ids[j] for j in self.groups[l]]

    def genes_for_feature(self, snp_id: str) -> tuple[str, ...]:
        return self.snp_to_genes.get(snp_id, ())

    def all_genes(self) -> list[str]:
        """Genes reachable from any grouped feature, in first-seen order."""
        out: list[str] = []
        seen = set()
        for g in self.groups:
            for j in g:
                for gene in self.snp_to_genes.get(self.snp_ids[j], ()):
                    if gene not in seen:
                        seen.add(gene)
                        out.append(gene)
        return out


@dataclass
class StandardizedData:
    """Design matrix and response after centering, scaling, and adjustment.

    Columns are mean-centered and scaled to unit sum of squares; constant
    columns are kept in place as all-zero columns and listed in
    ``excluded_columns`` (an all-zero column can never be selected).
    """

    X: np.ndarray  # (N, P) float64
    y: np.ndarray  # (N,)
    column_means: np.ndarray
    column_norms: np.ndarray  # sqrt of centered sum of squares, pre-scaling
    excluded_columns: np.ndarray  # indices of constant columns
    y_mean: float
    covariate_coefs: np.ndarray | None = None  # OLS coefs of [1 | covariates]

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass
class ExpandedIndex:
    """Column layout of the overlap-expanded design matrix.

    Pathway ``l`` occupies expanded columns ``range(*ranges[l])``;
    ``backmap[k]`` is the original feature index behind expanded column k.
    """

    ranges: list[tuple[int, int]]
    backmap: np.ndarray  # (P*,) intp

    @property
    def width(self) -> int:
        return int(self.backmap.size)

    def expand_matrix(self, X: np.ndarray) -> np.ndarray:
        return X[:, self.backmap]

    def group_columns(self, l: int) -> np.ndarray:
        a, b = self.ranges[l]
        return self.backmap[a:b]


# ---------------------------------------------------------------------------
# loaders / writers


def _read_tsv_rows(path) -> list[list[str]]:
    with open(path, "rt", encoding="utf-8") as fh:
        return [line.rstrip("\n").split("\t") for line in fh if line.strip() != ""]


def load_genotypes(path) -> GenotypeMatrix:
    """Read a genotype TSV: header of feature ids, one sample per row."""
    rows = _read_tsv_rows(path)
    if not rows:
        raise RaggedRowError(f"{path}: empty genotype file")
    header = rows[0]
    snp_ids = header[1:]
    if not snp_ids:
        raise RaggedRowError(f"{path}: header has no feature columns")
    sample_ids: list[str] = []
    values = np.empty((len(rows) - 1, len(snp_ids)), dtype=np.int8)
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RaggedRowError(f"{path}:{r}: expected {len(header)} fields, got {len(row)}")
        sample_ids.append(row[0])
        for c, cell in enumerate(row[1:]):
            if cell not in _ALLOWED_CELLS:
                raise MissingValueError(f"{path}:{r}: cell {cell!r} is not an allele count (0/1/2)")
            values[r - 2, c] = int(cell)
    return GenotypeMatrix(sample_ids, snp_ids, values)


def write_genotypes(path, genotype: GenotypeMatrix) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write("sample_id\t" + "\t".join(genotype.snp_ids) + "\n")
        for i, sid in enumerate(genotype.sample_ids):
            fh.write(sid + "\t" + "\t".join(str(int(v)) for v in genotype.values[i]) + "\n")


def load_phenotype(path) -> Phenotype:
    """Read a phenotype TSV: sample_id, y, then covariate columns."""
    rows = _read_tsv_rows(path)
    if not rows:
        raise RaggedRowError(f"{path}: empty phenotype file")
    header = rows[0]
    if len(header) < 2:
        raise RaggedRowError(f"{path}: need at least sample id and response columns")
    cov_names = header[2:]
    sample_ids: list[str] = []
    y: list[float] = []
    covs: list[list[float]] = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RaggedRowError(f"{path}:{r}: expected {len(header)} fields, got {len(row)}")
        sample_ids.append(row[0])
        try:
            y.append(float(row[1]))
            covs.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise MissingValueError(f"{path}:{r}: non-numeric value") from exc
    cov_arr = np.asarray(covs) if cov_names else None
    return Phenotype(sample_ids, np.asarray(y), cov_arr, cov_names)


def write_phenotype(path, phenotype: Phenotype) -> None:
    names = ["sample_id", "y"] + list(phenotype.covariate_names)
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write("\t".join(names) + "\n")
        for i, sid in enumerate(phenotype.sample_ids):
            cells = [sid, repr(float(phenotype.y[i]))]
            if phenotype.covariates is not None:
                cells += [repr(float(v)) for v in phenotype.covariates[i]]
            fh.write("\t".join(cells) + "\n")


def load_pathway_annotation(gmt_path, snp_gene_path, genotype: GenotypeMatrix) -> PathwayMap:
    """Build a PathwayMap from a GMT file and a SNP-to-gene map.

    GMT lines are ``pathway_id TAB gene TAB gene ...``; the map file has one
    ``snp_id TAB gene_id`` pair per line.  Genes without any typed feature
    are ignored; pathways left with zero mappable features are dropped with
    a warning.
    """
    snp_index = {sid: j for j, sid in enumerate(genotype.snp_ids)}

    gene_to_snps: dict[str, list[str]] = {}
    snp_to_genes: dict[str, list[str]] = {}
    for r, row in enumerate(_read_tsv_rows(snp_gene_path), start=1):
        if len(row) != 2:
            raise RaggedRowError(f"{snp_gene_path}:{r}: expected 2 fields, got {len(row)}")
        snp, gene = row
        if snp not in snp_index:
            continue
        gene_to_snps.setdefault(gene, []).append(snp)
        genes = snp_to_genes.setdefault(snp, [])
        if gene not in genes:
            genes.append(gene)

    pathway_ids: list[str] = []
    groups: list[np.ndarray] = []
    gene_to_pathways: dict[str, list[str]] = {}
    for r, row in enumerate(_read_tsv_rows(gmt_path), start=1):
        if len(row) < 2:
            raise RaggedRowError(f"{gmt_path}:{r}: expected pathway id plus genes")
        pid, genes = row[0], row[1:]
        members: set[int] = set()
        for gene in genes:
            for snp in gene_to_snps.get(gene, ()):
                members.add(snp_index[snp])
        if not members:
            logger.warning("pathway %r has no mappable features; dropped", pid)
            continue
        pathway_ids.append(pid)
        groups.append(np.asarray(sorted(members), dtype=np.intp))
        for gene in genes:
            if gene in gene_to_snps:
                gene_to_pathways.setdefault(gene, []).append(pid)

    return PathwayMap(
        pathway_ids,
        groups,
        list(genotype.snp_ids),
        {s: tuple(g) for s, g in snp_to_genes.items()},
        {g: tuple(p) for g, p in gene_to_pathways.items()},
    )


def write_gmt(path, pathway_to_genes: dict[str, list[str]]) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        for pid, genes in pathway_to_genes.items():
            fh.write(pid + "\t" + "\t".join(genes) + "\n")


def write_snp_gene_map(path, snp_to_genes: dict[str, tuple[str, ...]]) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        for snp, genes in snp_to_genes.items():
            for gene in genes:
                fh.write(f"{snp}\t{gene}\n")


# ---------------------------------------------------------------------------
# standardization


def standardize_arrays(
    raw_X: np.ndarray,
    raw_y: np.ndarray,
    covariates: np.ndarray | None = None,
):
    """Center/scale a raw design and response; see :func:`standardize`.

    Returns (X, y, column_means, column_norms, excluded, y_mean, cov_coefs).
    Used directly by subsampling code, which re-standardizes within each
    subsample.
    """
    raw_X = np.asarray(raw_X, dtype=float)
    raw_y = np.asarray(raw_y, dtype=float)
    n = raw_y.size

    cov_coefs = None
    if covariates is not None and covariates.size:
        design = np.column_stack([np.ones(n), covariates])
        cov_coefs, *_ = np.linalg.lstsq(design, raw_y, rcond=None)
        y = raw_y - design @ cov_coefs
    else:
        y = raw_y.copy()
    y_mean = float(y.mean())
    y = y - y_mean

    means = raw_X.mean(axis=0)
    X = raw_X - means
    ss = np.einsum("ij,ij->j", X, X)
    norms = np.sqrt(ss)
    excluded = np.flatnonzero(norms == 0.0)
    safe = np.where(norms == 0.0, 1.0, norms)
    X /= safe
    X[:, excluded] = 0.0
    return X, y, means, norms, excluded, y_mean, cov_coefs


def standardize(genotype: GenotypeMatrix, phenotype: Phenotype) -> StandardizedData:
    """Align samples, adjust y for covariates, center and unit-scale columns.

    The response is replaced by its OLS residual on an intercept plus any
    covariates, then centered; genotype columns are centered and scaled to
    unit sum of squares.  Constant columns are flagged and zeroed.
    """
    if set(genotype.sample_ids) != set(phenotype.sample_ids):
        raise SampleMismatchError("genotype and phenotype sample sets differ")
    if genotype.sample_ids != phenotype.sample_ids:
        order = {sid: i for i, sid in enumerate(phenotype.sample_ids)}
        perm = np.asarray([order[sid] for sid in genotype.sample_ids])
        raw_y = phenotype.y[perm]
        covs = phenotype.covariates[perm] if phenotype.covariates is not None else None
    else:
        raw_y = phenotype.y
        covs = phenotype.covariates

    X, y, means, norms, excluded, y_mean, cov_coefs = standardize_arrays(
        genotype.values, raw_y, covs
    )
    if excluded.size:
        logger.warning("%d constant genotype columns zeroed", excluded.size)
    return StandardizedData(X, y, means, norms, excluded, y_mean, cov_coefs)


def expand_overlaps(pmap: PathwayMap) -> ExpandedIndex:
    """Lay out pathway blocks side by side, duplicating shared features."""
    ranges: list[tuple[int, int]] = []
    parts: list[np.ndarray] = []
    start = 0
    for g in pmap.groups:
        stop = start + g.size
        ranges.append((start, stop))
        parts.append(g)
        start = stop
    backmap = np.concatenate(parts) if parts else np.empty(0, dtype=np.intp)
    return ExpandedIndex(ranges, backmap.astype(np.intp))
