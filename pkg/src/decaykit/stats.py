"""Regression fits and tests used to summarise decay curves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats as sps

from .errors import InsufficientDataError, ValidationError
from .rng import stream


@dataclass(frozen=True)
class LineFit:
    intercept: float
    slope: float
    r2: float

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def ols_line(x, y) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValidationError("x and y differ in length")
    if x.size < 3:
        raise InsufficientDataError("need at least 3 points")
    dx = x - x.mean()
    sxx = dx @ dx
    if sxx <= 1e-300 or np.ptp(x) == 0:
        raise ValidationError("x is constant; slope undefined")
    dy = y - y.mean()
    slope = (dx @ dy) / sxx
    intercept = y.mean() - slope * x.mean()
    syy = dy @ dy
    r2 = 1.0 if syy == 0 else float(np.clip((dx @ dy) ** 2 / (sxx * syy), 0.0, 1.0))
    return LineFit(float(intercept), float(slope), r2)


def permutation_test(a, b, n_perm: int = 10_000, seed: int = 0, exhaustive: bool | None = None) -> float:
    """Two-sided permutation test for a difference in means.

    The statistic is ``mean(a) - mean(b)``. With ``exhaustive`` (the default
    whenever all label assignments number at most ``n_perm``) the p-value is
    the exact fraction of assignments with ``|T| >= |T_obs|``; otherwise
    ``n_perm`` random relabellings are drawn and ``p = (1 + hits) / (1 + n_perm)``.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValidationError("both samples must be nonempty")
    if n_perm < 100:
        raise ValidationError("n_perm must be >= 100")
    pooled = np.concatenate([a, b])
    n, na = pooled.size, a.size
    total = pooled.sum()
    observed = abs(a.mean() - b.mean())
    # relative slack so float round-off never drops the observed labelling
    eps = 1e-12 * max(1.0, np.abs(pooled).max())
    if exhaustive is None:
        exhaustive = math.comb(n, na) <= n_perm
    if exhaustive:
        hits = count = 0
        for idx in combinations(range(n), na):
            sa = pooled[list(idx)].sum()
            t = abs(sa / na - (total - sa) / (n - na))
            hits += t >= observed - eps
            count += 1
        return hits / count
    rng = stream(seed, "permutation-test")
    hits = 0
    for start in range(0, n_perm, 2000):
        k = min(2000, n_perm - start)
        perm = np.argsort(rng.random((k, n)), axis=1)
        sa = pooled[perm[:, :na]].sum(axis=1)
        t = np.abs(sa / na - (total - sa) / (n - na))
        hits += int(np.count_nonzero(t >= observed - eps))
    return (1 + hits) / (1 + n_perm)


def compare_r2_permutation(r2_linear_set, r2_quadratic_set, n_perm: int = 10_000, seed: int = 0,
                           exhaustive: bool | None = None) -> float:
    """p-value for equal mean R^2 between linear and squared-scale decay fits."""
    return permutation_test(r2_linear_set, r2_quadratic_set, n_perm, seed, exhaustive)


@dataclass(frozen=True)
class CorrelationTest:
    r: float
    t: float
    p_value: float
    n: int
    degenerate: bool = False


def correlation_t_test(x, y) -> CorrelationTest:
    """Pearson r with its exact t-test, ``t = r sqrt((n - 2) / (1 - r^2))`` on n - 2 df."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n != y.size:
        raise ValidationError("x and y differ in length")
    if n < 4:
        raise InsufficientDataError("need at least 4 pairs")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValidationError("correlation undefined for a constant vector")
    r = float(np.clip(np.corrcoef(x, y)[0, 1], -1.0, 1.0))
    if 1.0 - abs(r) < 1e-15:
        return CorrelationTest(math.copysign(1.0, r), math.copysign(math.inf, r), 0.0, n, True)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = float(2.0 * sps.t.sf(abs(t), n - 2))
    return CorrelationTest(r, t, p, n)


def fst_kinship_diagnostics(pairs) -> CorrelationTest:
    """Correlation between F_ST estimates and mean cross-kinship for (fst, kbar) pairs."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("pairs must be a sequence of (fst, kbar)")
    return correlation_t_test(arr[:, 0], arr[:, 1])


def benjamini_hochberg(p_values) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values (step-up, monotone, capped at 1)."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return p
    if np.any((p < 0) | (p > 1)):
        raise ValidationError("p-values must lie in [0, 1]")
    return np.asarray(sps.false_discovery_control(p, method="bh"))


def fisher_z_ci(r: float, n: int, z: float = 1.96) -> tuple[float, float]:
    """Confidence interval for a correlation via the Fisher z-transform."""
    if n < 4:
        raise InsufficientDataError("Fisher interval needs n >= 4")
    if abs(r) >= 1:
        return (r, r)
    centre = math.atanh(r)
    half = z / math.sqrt(n - 3)
    return (math.tanh(centre - half), math.tanh(centre + half))
