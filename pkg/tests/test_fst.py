import math

import numpy as np
import pytest
from scipy import stats

from decaykit.errors import InsufficientDataError, ValidationError
from decaykit.fst import (AlleleFrequencySet, _loglik, allele_frequencies, betabinomial_loglik,
                          estimate_fst, fst_between, maximize_loglik)
from decaykit.synthetic import balding_nichols, sample_genotypes


def bn_fixture(f, seed, n=100, m=5000):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.05, 0.95, m)
    train = sample_genotypes(p, n, rng)
    target = sample_genotypes(balding_nichols(p, f, rng), n, rng)
    return train, target


def grid_oracle(afs, lo=1e-6, hi=0.5, n=2000):
    """Two-stage grid search: coarse grid over the bounds, then a fine grid around the best cell."""
    coarse = np.linspace(lo, hi, n)
    ll = [_loglik(afs.p, afs.counts, afs.sizes, f) for f in coarse]
    k = int(np.argmax(ll))
    fine = np.linspace(coarse[max(k - 1, 0)], coarse[min(k + 1, n - 1)], n)
    ll = [_loglik(afs.p, afs.counts, afs.sizes, f) for f in fine]
    return fine[int(np.argmax(ll))]


def test_allele_frequency_examples():
    assert allele_frequencies(np.array([[0.0], [1.0], [2.0]]), [0, 1, 2])[0] == 0.5
    assert allele_frequencies(np.full((3, 1), 2.0), [0, 1, 2])[0] == 1.0
    assert allele_frequencies(np.array([[0.0], [0.0], [1.0], [2.0]]), [0, 1, 2, 3])[0] == 0.375


def test_loglik_single_marker_matches_pmf():
    afs = AlleleFrequencySet(np.array([0.5]), np.array([1.0]), np.array([2.0]))
    # a = b = 0.5 at f = 0.5
    expected = stats.betabinom.logpmf(1, 2, 0.5, 0.5)
    assert betabinomial_loglik(afs, 0.5) == pytest.approx(expected, abs=1e-12)
    # by hand: C(2,1) B(1.5,1.5)/B(.5,.5) = 2 * (pi/8) / pi = 1/4
    assert betabinomial_loglik(afs, 0.5) == pytest.approx(math.log(0.25), abs=1e-12)


def test_loglik_additive_over_markers():
    one = AlleleFrequencySet(np.array([0.3]), np.array([2.0]), np.array([10.0]))
    two = AlleleFrequencySet(np.array([0.7]), np.array([9.0]), np.array([12.0]))
    both = AlleleFrequencySet(np.array([0.3, 0.7]), np.array([2.0, 9.0]), np.array([10.0, 12.0]))
    assert betabinomial_loglik(both, 0.1) == pytest.approx(
        betabinomial_loglik(one, 0.1) + betabinomial_loglik(two, 0.1), abs=1e-12)


def test_loglik_matches_scipy_on_many_markers():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.05, 0.95, 50)
    s = rng.integers(2, 40, 50).astype(float)
    c = rng.binomial(s.astype(int), p).astype(float)
    f = 0.07
    a, b = p * (1 - f) / f, (1 - p) * (1 - f) / f
    oracle = stats.betabinom.logpmf(c, s, a, b).sum()
    assert betabinomial_loglik(AlleleFrequencySet(p, c, s), f) == pytest.approx(oracle, rel=1e-12)


def test_monomorphic_training_rejected():
    train = np.zeros((5, 20))
    target = np.ones((5, 20))
    with pytest.raises(InsufficientDataError):
        fst_between(train, target)


def test_overlapping_sets_rejected():
    with pytest.raises(ValidationError):
        estimate_fst(np.ones((4, 12)), [0, 1], [1, 2])


def test_panmictic_near_zero():
    rng = np.random.default_rng(4)
    p = rng.uniform(0.05, 0.95, 5000)
    x = sample_genotypes(p, 400, rng)
    est = estimate_fst(x, np.arange(200), np.arange(200, 400))
    assert est.value <= 0.01
    assert est.n_markers_used == 5000


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bn_005_recovered(seed):
    train, target = bn_fixture(0.05, seed)
    assert 0.03 <= fst_between(train, target).value <= 0.07


@pytest.mark.parametrize("f", [0.01, 0.05, 0.1])
def test_brent_matches_grid(f):
    train, target = bn_fixture(f, 7)
    afs = AlleleFrequencySet.from_counts(train, target)
    est = maximize_loglik(afs)
    assert abs(est.value - grid_oracle(afs)) <= 1e-4


def test_boundary_optimum_reported():
    # target identical in frequency to training: the likelihood peaks at the lower bound
    rng = np.random.default_rng(9)
    p = rng.uniform(0.2, 0.8, 200)
    afs = AlleleFrequencySet(p, np.round(p * 2000), np.full(200, 2000.0))
    assert maximize_loglik(afs).value < 1e-3


def test_missing_cells_ignored():
    train, target = bn_fixture(0.05, 3, n=60, m=500)
    holed = target.copy()
    holed[0, :10] = np.nan
    a = fst_between(train, target)
    b = fst_between(train, holed)
    assert abs(a.value - b.value) < 0.005
