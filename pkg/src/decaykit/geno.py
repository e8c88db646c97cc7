"""Genotype and phenotype containers, CSV ingestion and marker QC.

Allele counts are held in a float64 array with ``NaN`` marking missing
cells, so the usual numpy reductions (``nanmean`` and friends) apply
directly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

MISSING = np.nan
_MISSING_TOKENS = {"", "NA", "na", "NaN", "nan"}


@dataclass(frozen=True, eq=False)
class MarkerMatrix:
    """Individuals x markers matrix of allele counts in {0, 1, 2} or missing."""

    counts: np.ndarray
    marker_ids: tuple[str, ...]
    individual_ids: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 2:
            raise ValidationError("counts must be a 2-D array")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "marker_ids", tuple(str(m) for m in self.marker_ids))
        object.__setattr__(self, "individual_ids", tuple(str(i) for i in self.individual_ids))
        n, p = counts.shape
        if len(self.individual_ids) != n:
            raise ValidationError(f"{len(self.individual_ids)} individual ids for {n} rows")
        if len(self.marker_ids) != p:
            raise ValidationError(f"{len(self.marker_ids)} marker ids for {p} columns")
        _check_unique(self.marker_ids, "marker")
        _check_unique(self.individual_ids, "individual")
        obs = counts[~np.isnan(counts)]
        bad = obs[(obs != 0) & (obs != 1) & (obs != 2)]
        if bad.size:
            raise ValidationError(f"allele count {bad[0]!r} outside {{0, 1, 2}}")

    @property
    def n_individuals(self) -> int:
        return self.counts.shape[0]

    @property
    def n_markers(self) -> int:
        return self.counts.shape[1]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.counts)

    def rows(self, index) -> "MarkerMatrix":
        index = np.asarray(index, dtype=int)
        return MarkerMatrix(self.counts[index], self.marker_ids,
                            [self.individual_ids[i] for i in index])

    def columns(self, index) -> "MarkerMatrix":
        index = np.asarray(index, dtype=int)
        return MarkerMatrix(self.counts[:, index], [self.marker_ids[j] for j in index],
                            self.individual_ids)

    def to_csv(self, path) -> None:
        write_genotype_csv(self, path)


def _check_unique(ids, what):
    if len(set(ids)) != len(ids):
        seen = set()
        dup = next(i for i in ids if i in seen or seen.add(i))
        raise ValidationError(f"duplicate {what} id {dup!r}")


@dataclass(frozen=True, eq=False)
class PhenotypeVector:
    values: np.ndarray
    trait_name: str = "trait"
    individual_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise ValidationError("phenotype values must be finite")
        object.__setattr__(self, "values", values)
        if self.individual_ids is not None:
            ids = tuple(str(i) for i in self.individual_ids)
            if len(ids) != len(values):
                raise ValidationError("phenotype ids and values differ in length")
            object.__setattr__(self, "individual_ids", ids)

    def __len__(self):
        return len(self.values)

    def subset(self, index) -> "PhenotypeVector":
        index = np.asarray(index, dtype=int)
        ids = None if self.individual_ids is None else [self.individual_ids[i] for i in index]
        return PhenotypeVector(self.values[index], self.trait_name, ids)


@dataclass
class QCReport:
    removed_maf: list[str] = field(default_factory=list)
    removed_missing: list[str] = field(default_factory=list)
    removed_ld: list[str] = field(default_factory=list)
    imputed_cells: int = 0

    def to_dict(self) -> dict:
        return {"removed_maf": list(self.removed_maf),
                "removed_missing": list(self.removed_missing),
                "removed_ld": list(self.removed_ld),
                "imputed_cells": int(self.imputed_cells)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# --------------------------------------------------------------------- I/O

def _parse_cell(tok: str, path, lineno: int, col: str) -> float:
    tok = tok.strip()
    if tok in _MISSING_TOKENS:
        return MISSING
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: non-numeric allele count {tok!r} for marker {col}")
    if v not in (0.0, 1.0, 2.0):
        raise ValidationError(f"{path}:{lineno}: allele count {tok!r} outside {{0, 1, 2}} "
                              f"for marker {col}")
    return v


def read_genotype_csv(path) -> MarkerMatrix:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        if len(header) < 2 or header[0].strip() != "id":
            raise ParseError(f"{path}:1: header must be 'id,<marker1>,...'")
        markers = [h.strip() for h in header[1:]]
        _check_unique(markers, "marker")
        ids, rows = [], []
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            ids.append(row[0].strip())
            rows.append([_parse_cell(t, path, lineno, markers[j]) for j, t in enumerate(row[1:])])
    if not rows:
        raise ParseError(f"{path}: no individuals")
    return MarkerMatrix(np.array(rows, dtype=float), markers, ids)


def read_phenotype_csv(path, trait_name: str | None = None) -> PhenotypeVector:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        if len(header) != 2 or header[0].strip() != "id":
            raise ParseError(f"{path}:1: header must be 'id,<trait>'")
        ids, values = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{reader.line_num}: expected 2 fields, got {len(row)}")
            try:
                values.append(float(row[1]))
            except ValueError:
                raise ParseError(f"{path}:{reader.line_num}: non-numeric phenotype {row[1]!r}")
            ids.append(row[0].strip())
    return PhenotypeVector(np.array(values), trait_name or header[1].strip(), ids)


def load_dataset(genotype_path, phenotype_path=None):
    """Read a genotype CSV and, optionally, a phenotype CSV for the same individuals.

    Phenotype rows may come in any order but must cover exactly the genotyped
    individuals; they are returned aligned to the genotype row order.
    """
    geno = read_genotype_csv(genotype_path)
    if phenotype_path is None:
        return geno, None
    pheno = read_phenotype_csv(phenotype_path)
    if len(pheno) != geno.n_individuals:
        raise ValidationError(f"{phenotype_path}: {len(pheno)} phenotypes for "
                              f"{geno.n_individuals} genotyped individuals")
    pos = {pid: k for k, pid in enumerate(pheno.individual_ids)}
    if len(pos) != len(pheno):
        raise ValidationError(f"{phenotype_path}: duplicate individual ids")
    try:
        order = [pos[i] for i in geno.individual_ids]
    except KeyError as exc:
        raise ValidationError(f"{phenotype_path}: no phenotype for individual {exc.args[0]!r}")
    return geno, pheno.subset(order)


def _fmt_count(v: float) -> str:
    return "NA" if math.isnan(v) else str(int(v))


def write_genotype_csv(m: MarkerMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *m.marker_ids])
        for iid, row in zip(m.individual_ids, m.counts):
            w.writerow([iid, *map(_fmt_count, row)])


def write_phenotype_csv(y: PhenotypeVector, path, ids=None) -> None:
    ids = ids if ids is not None else y.individual_ids
    if ids is None:
        ids = [f"ind{i}" for i in range(len(y))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", y.trait_name])
        for iid, v in zip(ids, y.values):
            w.writerow([iid, repr(float(v))])


# ---------------------------------------------------------------------- QC

def minor_allele_frequency(counts: np.ndarray) -> np.ndarray:
    """Per-marker MAF ignoring missing cells (NaN where a marker has no data)."""
    with np.errstate(invalid="ignore"):
        p = np.nanmean(counts, axis=0) / 2.0 if counts.size else np.array([])
    return np.minimum(p, 1.0 - p)


def knn_impute(counts: np.ndarray, k: int = 10) -> tuple[np.ndarray, int]:
    """Fill missing cells from the ``k`` nearest markers.

    Marker-to-marker distance is the mean squared difference over the
    individuals observed in both. A missing cell (i, j) takes the mean of
    ``counts[i, l]`` over the ``k`` closest markers ``l`` observed at ``i``;
    with fewer than ``k`` such markers the observed mean of marker ``j`` is
    used instead. Results are rounded half-up to {0, 1, 2}.
    """
    if k < 1:
        raise ValidationError(f"knn_k must be >= 1, got {k}")
    counts = np.asarray(counts, dtype=float)
    miss = np.isnan(counts)
    targets = np.flatnonzero(miss.any(axis=0))
    if targets.size == 0:
        return counts.copy(), 0
    obs = (~miss).astype(float)
    x0 = np.where(miss, 0.0, counts)
    x0sq = x0 * x0
    out = counts.copy()
    n_imputed = 0
    for start in range(0, targets.size, 256):
        blk = targets[start:start + 256]
        ob, xb, xbsq = obs[:, blk], x0[:, blk], x0sq[:, blk]
        overlap = ob.T @ obs
        ssd = xbsq.T @ obs + ob.T @ x0sq - 2.0 * (xb.T @ x0)
        with np.errstate(invalid="ignore", divide="ignore"):
            dist = np.where(overlap > 0, np.maximum(ssd, 0.0) / overlap, np.inf)
        for t, j in enumerate(blk):
            d = dist[t].copy()
            d[j] = np.inf
            col_mean = np.nanmean(counts[:, j]) if (~miss[:, j]).any() else 0.0
            for i in np.flatnonzero(miss[:, j]):
                cand = np.flatnonzero(~miss[i] & np.isfinite(d))
                if cand.size < k:
                    v = col_mean
                else:
                    order = np.lexsort((cand, d[cand]))[:k]
                    v = counts[i, cand[order]].mean()
                out[i, j] = min(2.0, max(0.0, math.floor(v + 0.5)))
                n_imputed += 1
    return out, n_imputed


def ld_prune(counts: np.ndarray, r_max: float = 0.95, block: int = 512) -> np.ndarray:
    """Boolean keep-mask: a marker is dropped when |r| > r_max with an earlier kept marker."""
    counts = np.asarray(counts, dtype=float)
    n, p = counts.shape
    sd = counts.std(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(sd > 0, (counts - counts.mean(axis=0)) / sd, 0.0)
    keep = np.zeros(p, dtype=bool)
    for start in range(0, p, block):
        cols = np.arange(start, min(start + block, p))
        zb = z[:, cols]
        kept = np.flatnonzero(keep[:start])
        dropped = np.zeros(cols.size, dtype=bool)
        if kept.size:
            dropped |= (np.abs(zb.T @ z[:, kept]) / n > r_max).any(axis=1)
        within = np.abs(zb.T @ zb) / n > r_max
        for t in range(cols.size):
            if dropped[t]:
                continue
            keep[cols[t]] = True
            later = within[t].copy()
            later[:t + 1] = False
            dropped |= later
    return keep


def qc_pipeline(m: MarkerMatrix, maf_min: float = 0.01, missing_max: float = 0.20,
                ld_r_max: float = 0.95, knn_k: int = 10, seed: int = 0):
    """Marker QC: MAF filter, missingness filter, kNN imputation, LD pruning.

    Steps run in that order. Markers whose MAF drops below ``maf_min`` as a
    result of imputation are also dropped (listed under ``removed_maf``), which
    keeps the pipeline idempotent. The returned matrix has no missing cells.

    ``seed`` is accepted for interface stability; every step is deterministic.
    """
    if not 0.0 <= maf_min <= 0.5:
        raise ValidationError(f"maf_min must lie in [0, 0.5], got {maf_min}")
    if not 0.0 <= missing_max <= 1.0:
        raise ValidationError(f"missing_max must lie in [0, 1], got {missing_max}")
    if not 0.0 < ld_r_max <= 1.0:
        raise ValidationError(f"ld_r_max must lie in (0, 1], got {ld_r_max}")
    if m.n_individuals == 0 or m.n_markers == 0:
        raise ValidationError("empty marker matrix")

    report = QCReport()
    ids = np.array(m.marker_ids, dtype=object)
    counts = m.counts

    maf = minor_allele_frequency(counts)
    low = maf < maf_min
    report.removed_maf.extend(ids[low])
    counts, ids = counts[:, ~low], ids[~low]

    frac = np.isnan(counts).mean(axis=0)
    gappy = frac > missing_max
    report.removed_missing.extend(ids[gappy])
    counts, ids = counts[:, ~gappy], ids[~gappy]
    _require_markers(ids)

    counts, report.imputed_cells = knn_impute(counts, knn_k)
    low = minor_allele_frequency(counts) < maf_min
    report.removed_maf.extend(ids[low])
    counts, ids = counts[:, ~low], ids[~low]
    _require_markers(ids)

    keep = ld_prune(counts, ld_r_max)
    report.removed_ld.extend(ids[~keep])
    counts, ids = counts[:, keep], ids[keep]

    report.removed_maf = [str(s) for s in report.removed_maf]
    report.removed_missing = [str(s) for s in report.removed_missing]
    report.removed_ld = [str(s) for s in report.removed_ld]
    return MarkerMatrix(counts, list(ids), m.individual_ids), report


def _require_markers(ids):
    if len(ids) == 0:
        raise ValidationError("QC removed every marker")


def standardize(m: MarkerMatrix | np.ndarray, marker_ids=None) -> np.ndarray:
    """Column-standardise allele counts to mean 0 and sample sd 1 (ddof=1)."""
    if isinstance(m, MarkerMatrix):
        x, marker_ids = m.counts, m.marker_ids
    else:
        x = np.asarray(m, dtype=float)
    if np.isnan(x).any():
        raise ValidationError("standardize requires a matrix without missing cells")
    if x.shape[0] < 2:
        raise ValidationError("standardize needs at least two individuals")
    sd = x.std(axis=0, ddof=1)
    flat = np.flatnonzero(sd == 0)
    if flat.size:
        name = marker_ids[flat[0]] if marker_ids is not None else f"column {flat[0]}"
        raise ValidationError(f"marker {name} has zero variance")
    return (x - x.mean(axis=0)) / sd
