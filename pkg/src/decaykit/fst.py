"""Beta-Binomial maximum-likelihood F_ST between a training and a target population.

The training population plays the ancestral role: its allele frequencies are
plugged in as known, and each target allele count is modelled as

    c_k ~ BetaBinomial(s_k, p_k (1 - F) / F, (1 - p_k) (1 - F) / F)

(the Balding-Nichols parameterisation). ``F`` is found by bounded Brent
maximisation of the summed log-likelihood.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import betaln, gammaln

from .errors import InsufficientDataError, ValidationError
from .geno import MarkerMatrix

DEFAULT_BOUNDS = (1e-6, 0.5)
MIN_MARKERS = 10


@dataclass(frozen=True, eq=False)
class AlleleFrequencySet:
    p: np.ndarray
    counts: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        p, c, s = (np.asarray(a, dtype=float) for a in (self.p, self.counts, self.sizes))
        if not (p.shape == c.shape == s.shape and p.ndim == 1):
            raise ValidationError("p, counts and sizes must be 1-D and of equal length")
        if np.any((p <= 0) | (p >= 1)):
            raise ValidationError("training frequencies must lie strictly inside (0, 1)")
        if np.any((c < 0) | (c > s)):
            raise ValidationError("target counts must satisfy 0 <= count <= size")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "sizes", s)

    @property
    def n_markers(self) -> int:
        return self.p.size

    @classmethod
    def from_counts(cls, train_counts, target_counts) -> "AlleleFrequencySet":
        """Build from two individuals x markers count arrays (NaN = missing).

        Markers monomorphic (or unobserved) in the training sample, or with no
        observed target genotypes, are dropped.
        """
        tr = np.asarray(train_counts, dtype=float)
        ta = np.asarray(target_counts, dtype=float)
        if tr.ndim != 2 or ta.ndim != 2 or tr.shape[1] != ta.shape[1]:
            raise ValidationError("training and target arrays must share the marker axis")
        if tr.shape[0] == 0 or ta.shape[0] == 0:
            raise ValidationError("empty training or target sample")
        with np.errstate(invalid="ignore"):
            p = np.nanmean(tr, axis=0) / 2.0
        sizes = 2.0 * (~np.isnan(ta)).sum(axis=0)
        counts = np.nansum(ta, axis=0)
        use = np.isfinite(p) & (p > 0) & (p < 1) & (sizes > 0)
        return cls(p[use], counts[use], sizes[use])


@dataclass(frozen=True)
class FstEstimate:
    value: float
    loglik: float
    n_markers_used: int


def allele_frequencies(m: MarkerMatrix | np.ndarray, subset) -> np.ndarray:
    """Reference-allele frequency of every marker within ``subset``."""
    counts = m.counts if isinstance(m, MarkerMatrix) else np.asarray(m, dtype=float)
    idx = np.asarray(subset, dtype=int)
    if idx.size == 0:
        raise ValidationError("empty subset")
    sub = counts[idx]
    if np.isnan(sub).any():
        raise ValidationError("allele_frequencies requires no missing cells")
    return sub.sum(axis=0) / (2.0 * idx.size)


def betabinomial_loglik(afs: AlleleFrequencySet, f: float) -> float:
    if not 0.0 < f < 1.0:
        raise ValidationError(f"F must lie in (0, 1), got {f}")
    if afs.n_markers == 0:
        raise InsufficientDataError("no markers polymorphic in the training sample")
    return _loglik(afs.p, afs.counts, afs.sizes, f)


def _loglik(p, c, s, f):
    scale = (1.0 - f) / f
    a = p * scale
    b = (1.0 - p) * scale
    ll = betaln(c + a, s - c + b) - betaln(a, b)
    ll += gammaln(s + 1.0) - gammaln(c + 1.0) - gammaln(s - c + 1.0)
    return float(ll.sum())


def maximize_loglik(afs: AlleleFrequencySet, bounds=DEFAULT_BOUNDS, xtol: float = 1e-7) -> FstEstimate:
    lo, hi = bounds
    if not 0.0 < lo < hi < 1.0:
        raise ValidationError(f"invalid bounds {bounds}")
    if afs.n_markers < MIN_MARKERS:
        raise InsufficientDataError(f"only {afs.n_markers} polymorphic markers; need {MIN_MARKERS}")
    p, c, s = afs.p, afs.counts, afs.sizes
    res = minimize_scalar(lambda f: -_loglik(p, c, s, f), bounds=(lo, hi),
                          method="bounded", options={"xatol": xtol, "maxiter": 500})
    best_f, best_ll = float(res.x), -float(res.fun)
    # bounded Brent never evaluates the endpoints themselves
    for edge in (lo, hi):
        ll = _loglik(p, c, s, edge)
        if ll > best_ll:
            best_f, best_ll = edge, ll
    return FstEstimate(best_f, best_ll, afs.n_markers)


def fst_between(train_counts, target_counts, bounds=DEFAULT_BOUNDS) -> FstEstimate:
    """F_ST of the target sample relative to the training sample, from raw count arrays."""
    return maximize_loglik(AlleleFrequencySet.from_counts(train_counts, target_counts), bounds)


def estimate_fst(m: MarkerMatrix | np.ndarray, training, target, bounds=DEFAULT_BOUNDS) -> FstEstimate:
    """F_ST between two disjoint index sets of one marker matrix (training = ancestral)."""
    counts = m.counts if isinstance(m, MarkerMatrix) else np.asarray(m, dtype=float)
    tr = np.asarray(training, dtype=int)
    ta = np.asarray(target, dtype=int)
    if tr.size == 0 or ta.size == 0:
        raise ValidationError("training and target sets must be nonempty")
    if np.intersect1d(tr, ta).size:
        raise ValidationError("training and target sets overlap")
    return fst_between(counts[tr], counts[ta], bounds)
