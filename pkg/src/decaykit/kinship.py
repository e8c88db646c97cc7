"""Allelic-correlation kinship and its link to Euclidean distance."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class KinshipMatrix:
    k: np.ndarray
    individual_ids: tuple[str, ...] | None = None

    def to_csv(self, path) -> None:
        n = self.k.shape[0]
        ids = self.individual_ids or tuple(f"ind{i}" for i in range(n))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", *ids])
            for iid, row in zip(ids, self.k):
                w.writerow([iid, *(repr(float(v)) for v in row)])


def allelic_kinship(x_std, individual_ids=None, tol: float = 1e-6) -> KinshipMatrix:
    """Mean product of standardised allele counts, ``K = X X^T / m``."""
    x = np.asarray(x_std, dtype=float)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValidationError("x_std must be an n x m matrix with m >= 1")
    worst = np.abs(x.mean(axis=0)).max()
    if worst > tol:
        raise ValidationError(f"input is not column-standardised (max |column mean| = {worst:.3g})")
    k = x @ x.T / x.shape[1]
    k = 0.5 * (k + k.T)
    return KinshipMatrix(k, None if individual_ids is None else tuple(individual_ids))


def mean_cross_kinship(kin: KinshipMatrix | np.ndarray, set_a, set_b) -> float:
    """Average kinship between members of two disjoint sets of individuals."""
    k = kin.k if isinstance(kin, KinshipMatrix) else np.asarray(kin)
    a = np.asarray(set_a, dtype=int)
    b = np.asarray(set_b, dtype=int)
    if a.size == 0 or b.size == 0:
        raise ValidationError("both index sets must be nonempty")
    if np.intersect1d(a, b).size:
        raise ValidationError("index sets overlap")
    return float(k[np.ix_(a, b)].mean())


def euclidean_distance_sq(x_std, i: int, j: int) -> float:
    x = np.asarray(x_std, dtype=float)
    n = x.shape[0]
    for idx in (i, j):
        if not -n <= idx < n:
            raise IndexError(f"row {idx} out of range for {n} individuals")
    d = x[i] - x[j]
    return float(d @ d)
