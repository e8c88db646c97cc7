import numpy as np
import pytest

from decaykit.clustering import PopulationSplit, _lloyd, kmeans2, kmeans_split, rebalance_split
from decaykit.errors import ValidationError
from decaykit.fst import estimate_fst
from decaykit.geno import standardize
from decaykit.synthetic import two_population


def blobs(seed=0, n=(30, 20)):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 0.1, size=(n[0], 5))
    b = rng.normal(10.0, 0.1, size=(n[1], 5))
    return np.vstack([a, b])


def test_planted_blobs_recovered():
    s = kmeans_split(blobs())
    assert list(s.training) == list(range(30))
    assert list(s.target) == list(range(30, 50))


def test_same_seed_same_split():
    x = np.random.default_rng(2).normal(size=(40, 6))
    a = kmeans_split(x, seed=5)
    b = kmeans_split(x, seed=5)
    assert np.array_equal(a.training, b.training) and np.array_equal(a.target, b.target)


def test_duplicated_pairs_co_clustered():
    x = np.array([[0.0, 1.0], [0.0, 1.0], [5.0, -1.0], [5.0, -1.0]])
    labels, _ = kmeans2(x)
    assert labels[0] == labels[1] and labels[2] == labels[3] and labels[0] != labels[2]
    # equal sizes: the cluster holding row 0 becomes training
    assert list(kmeans_split(x).training) == [0, 1]


def test_identical_rows_rejected():
    with pytest.raises(ValidationError):
        kmeans2(np.ones((5, 3)))


def test_wcss_beats_random_balanced_partitions():
    x = np.random.default_rng(3).normal(size=(40, 8))
    _, wcss = kmeans2(x)
    rng = np.random.default_rng(0)

    def wcss_of(labels):
        return sum(((x[labels == c] - x[labels == c].mean(axis=0)) ** 2).sum() for c in (0, 1))

    rand = [wcss_of(rng.permutation(np.repeat([0, 1], 20))) for _ in range(100)]
    assert wcss <= min(rand)


def test_bn_two_population_recovery():
    m, labels = two_population(100, 100, fst=0.1, n_markers=2000, seed=4)
    s = kmeans_split(standardize(m), m)
    pred = np.zeros(m.n_individuals, dtype=int)
    pred[s.target] = 1
    agree = max((pred == labels).mean(), (pred != labels).mean())
    assert agree >= 0.95
    assert s.fst0 > 0.05


def test_split_validation():
    with pytest.raises(ValidationError):
        PopulationSplit([0, 1], [1, 2])
    with pytest.raises(ValidationError):
        PopulationSplit([], [1])


def test_split_json_uses_ids():
    s = PopulationSplit([1, 0], [2], 0.1)
    assert s.to_dict(["a", "b", "c"]) == {"training": ["a", "b"], "target": ["c"], "fst0": 0.1}


@pytest.fixture
def small_split():
    m, labels = two_population(40, 8, fst=0.1, n_markers=400, seed=1)
    return m, PopulationSplit(np.flatnonzero(labels == 0)[:30], np.flatnonzero(labels == 1)[:4])


def test_rebalance_noop(small_split):
    m, s = small_split
    out = rebalance_split(s, m, 4)
    assert np.array_equal(out.training, s.training) and np.array_equal(out.target, s.target)
    assert out.fst0 == pytest.approx(estimate_fst(m, s.training, s.target).value)


def test_rebalance_single_move_brute_force(small_split):
    m, s = small_split
    out = rebalance_split(s, m, 3)
    cands = [estimate_fst(m, list(s.training) + [i], [t for t in s.target if t != i]).value
             for i in s.target]
    assert out.fst0 == max(cands)
    assert out.training.size == 31 and out.target.size == 3
    assert np.union1d(out.training, out.target).size == 34
    again = rebalance_split(s, m, 3)
    assert np.array_equal(again.target, out.target)


def test_rebalance_limits(small_split):
    m, s = small_split
    with pytest.raises(ValidationError):
        rebalance_split(s, m, 2)
    with pytest.raises(ValidationError):
        rebalance_split(s, m, 5)
