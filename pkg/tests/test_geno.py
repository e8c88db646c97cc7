import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decaykit.errors import ParseError, ValidationError
from decaykit.geno import (MarkerMatrix, PhenotypeVector, knn_impute, ld_prune, load_dataset,
                           minor_allele_frequency, qc_pipeline, read_genotype_csv, standardize,
                           write_genotype_csv, write_phenotype_csv)

from conftest import make_matrix


def test_parse_small_csv_with_missing(tiny_csv):
    p = tiny_csv("id,a,b\nx,0,1\ny,2,NA\nz,1,0\n")
    m = read_genotype_csv(p)
    assert m.counts.shape == (3, 2)
    assert m.missing.sum() == 1
    assert list(m.marker_ids) == ["a", "b"]


def test_empty_cell_is_missing(tiny_csv):
    m = read_genotype_csv(tiny_csv("id,a,b\nx,0,\ny,2,1\n"))
    assert np.isnan(m.counts[0, 1])


def test_duplicate_marker_rejected(tiny_csv):
    with pytest.raises(ValueError, match="duplicate"):
        read_genotype_csv(tiny_csv("id,a,a\nx,0,1\ny,1,1\n"))


def test_bad_cells_name_line(tiny_csv):
    with pytest.raises(ValidationError, match=r"geno.csv:3"):
        read_genotype_csv(tiny_csv("id,a,b\nx,0,1\ny,3,1\n"))
    with pytest.raises(ParseError, match=r"geno.csv:2"):
        read_genotype_csv(tiny_csv("id,a,b\nx,0,abc\n"))


def test_phenotype_length_mismatch(tiny_csv):
    g = tiny_csv("id,a,b\nx,0,1\ny,2,1\nz,1,0\n")
    p = tiny_csv("id,yield\nx,1.0\ny,2.0\n", "pheno.csv")
    with pytest.raises(ValidationError, match="length|mismatch|phenotype"):
        load_dataset(g, p)


def test_phenotypes_aligned_by_id(tiny_csv):
    g = tiny_csv("id,a,b\nx,0,1\ny,2,1\nz,1,0\n")
    p = tiny_csv("id,yield\nz,3.0\nx,1.0\ny,2.0\n", "pheno.csv")
    _, y = load_dataset(g, p)
    assert list(y.values) == [1.0, 2.0, 3.0]
    assert y.trait_name == "yield"


def test_matrix_rejects_bad_counts():
    with pytest.raises(ValidationError):
        MarkerMatrix(np.array([[0.0, 3.0]]), ["a", "b"], ["x"])
    with pytest.raises(ValidationError):
        MarkerMatrix(np.array([[0.0, 0.5]]), ["a", "b"], ["x"])


def test_phenotype_rejects_nonfinite():
    with pytest.raises(ValidationError):
        PhenotypeVector(np.array([1.0, np.nan]))


def test_csv_roundtrip(tmp_path):
    m = make_matrix([[0, 1, np.nan], [2, 2, 1]])
    write_genotype_csv(m, tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[1] == "ind0,0,1,NA"
    back = read_genotype_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(np.isnan(back.counts), np.isnan(m.counts))
    np.testing.assert_array_equal(np.nan_to_num(back.counts), np.nan_to_num(m.counts))
    y = PhenotypeVector(np.array([0.1, 1 / 3]), "t", m.individual_ids)
    write_phenotype_csv(y, tmp_path / "p.csv")
    _, y2 = load_dataset(tmp_path / "g.csv", tmp_path / "p.csv")
    assert list(y2.values) == list(y.values)


# ------------------------------------------------------------------- QC

def test_rare_marker_removed_by_maf():
    rng = np.random.default_rng(0)
    x = rng.binomial(2, 0.4, size=(100, 5)).astype(float)
    x[:, 2] = 0.0
    x[17, 2] = 1.0
    m = make_matrix(x)
    assert minor_allele_frequency(x)[2] == pytest.approx(0.005)
    out, rep = qc_pipeline(m)
    assert rep.removed_maf == ["snp2"]
    assert "snp2" not in out.marker_ids


def test_identical_columns_second_pruned():
    rng = np.random.default_rng(1)
    x = rng.binomial(2, 0.5, size=(50, 4)).astype(float)
    x[:, 3] = x[:, 1]
    out, rep = qc_pipeline(make_matrix(x))
    assert rep.removed_ld == ["snp3"]
    assert list(out.marker_ids) == ["snp0", "snp1", "snp2"]


def test_missingness_filter():
    rng = np.random.default_rng(2)
    x = rng.binomial(2, 0.5, size=(20, 4)).astype(float)
    x[:5, 0] = np.nan
    _, rep = qc_pipeline(make_matrix(x), missing_max=0.2)
    assert rep.removed_missing == ["snp0"]


def brute_force_knn(counts, k):
    """Cell-by-cell nearest-marker imputation with explicit loops."""
    n, m = counts.shape
    out = counts.copy()
    for j in range(m):
        for i in range(n):
            if not math.isnan(counts[i, j]):
                continue
            dists = []
            for l in range(m):
                if l == j or math.isnan(counts[i, l]):
                    continue
                shared = [r for r in range(n) if not math.isnan(counts[r, j]) and not math.isnan(counts[r, l])]
                if not shared:
                    continue
                d = sum((counts[r, j] - counts[r, l]) ** 2 for r in shared) / len(shared)
                dists.append((d, l))
            dists.sort()
            if len(dists) < k:
                col = [counts[r, j] for r in range(n) if not math.isnan(counts[r, j])]
                v = sum(col) / len(col)
            else:
                v = sum(counts[i, l] for _, l in dists[:k]) / k
            out[i, j] = min(2.0, max(0.0, math.floor(v + 0.5)))
    return out


def test_knn_single_cell_copies_identical_neighbour():
    x = np.array([[0, 0, 2], [1, 1, 0], [2, 2, 1], [1, np.nan, 2], [0, 0, 0]], dtype=float)
    out, n = knn_impute(x, k=1)
    assert n == 1
    assert out[3, 1] == 1.0
    np.testing.assert_array_equal(out, brute_force_knn(x, 1))


@pytest.mark.parametrize("k", [1, 3, 5])
def test_knn_matches_brute_force(k):
    rng = np.random.default_rng(k)
    x = rng.binomial(2, 0.4, size=(25, 12)).astype(float)
    x[rng.random(x.shape) < 0.1] = np.nan
    out, n = knn_impute(x, k)
    assert n == int(np.isnan(x).sum())
    np.testing.assert_array_equal(out, brute_force_knn(x, k))


def test_ld_prune_against_pairwise_oracle():
    rng = np.random.default_rng(5)
    base = rng.binomial(2, 0.5, size=(40, 6)).astype(float)
    x = np.hstack([base, base[:, [0, 2]], 2 - base[:, [4]]])
    keep = ld_prune(x, 0.95)
    r = np.corrcoef(x.T)
    oracle = []
    for j in range(x.shape[1]):
        if all(abs(r[j, l]) <= 0.95 for l in oracle):
            oracle.append(j)
    assert list(np.flatnonzero(keep)) == oracle
    assert list(np.flatnonzero(~keep)) == [6, 7, 8]


def test_qc_idempotent():
    rng = np.random.default_rng(3)
    x = rng.binomial(2, rng.uniform(0.0, 0.5, 40), size=(60, 40)).astype(float)
    x[rng.random(x.shape) < 0.03] = np.nan
    once, _ = qc_pipeline(make_matrix(x))
    twice, rep = qc_pipeline(once)
    np.testing.assert_array_equal(once.counts, twice.counts)
    assert rep.removed_maf == rep.removed_missing == rep.removed_ld == []


def test_qc_removing_everything_errors():
    x = np.zeros((10, 3))
    with pytest.raises(ValidationError, match="every marker"):
        qc_pipeline(make_matrix(x))


def test_qc_report_json():
    out, rep = qc_pipeline(make_matrix(np.random.default_rng(0).binomial(2, 0.5, (20, 5))))
    d = rep.to_dict()
    assert set(d) == {"removed_maf", "removed_missing", "removed_ld", "imputed_cells"}


# ---------------------------------------------------------- standardize

def test_standardize_012():
    np.testing.assert_allclose(standardize(np.array([[0.0], [1.0], [2.0]]))[:, 0], [-1, 0, 1])


def test_standardize_0022():
    z = standardize(np.array([[0.0], [0.0], [2.0], [2.0]]))[:, 0]
    v = math.sqrt(3) / 2
    np.testing.assert_allclose(z, [-v, -v, v, v], atol=1e-12)


def test_standardize_constant_column_names_marker():
    m = make_matrix([[1, 0], [1, 2], [1, 1]])
    with pytest.raises(ValidationError, match="snp0"):
        standardize(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 20), st.integers(1, 8), st.integers(0, 10_000))
def test_standardize_moments(n, m, seed):
    x = np.random.default_rng(seed).binomial(2, 0.5, size=(n, m)).astype(float)
    x[0], x[1] = 0.0, 2.0
    z = standardize(x)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0, ddof=1), 1.0, atol=1e-12)
