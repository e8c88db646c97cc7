"""Two-way k-means split of a population and greedy rebalancing of the split."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .fst import estimate_fst
from .geno import MarkerMatrix
from .rng import stream


@dataclass(frozen=True, eq=False)
class PopulationSplit:
    training: np.ndarray
    target: np.ndarray
    fst0: float = float("nan")

    def __post_init__(self):
        tr = np.sort(np.asarray(self.training, dtype=int))
        ta = np.sort(np.asarray(self.target, dtype=int))
        if tr.size == 0 or ta.size == 0:
            raise ValidationError("training and target sets must be nonempty")
        if np.intersect1d(tr, ta).size:
            raise ValidationError("training and target sets overlap")
        object.__setattr__(self, "training", tr)
        object.__setattr__(self, "target", ta)

    def to_dict(self, ids=None) -> dict:
        name = (lambda i: ids[i]) if ids is not None else int
        return {"training": [name(i) for i in self.training],
                "target": [name(i) for i in self.target],
                "fst0": float(self.fst0)}

    def to_json(self, ids=None) -> str:
        return json.dumps(self.to_dict(ids), indent=2) + "\n"


def _lloyd(x, centers, max_iter):
    labels = None
    xsq = (x * x).sum(axis=1)[:, None]
    for _ in range(max_iter):
        d = xsq - 2.0 * x @ centers.T + (centers * centers).sum(axis=1)[None, :]
        new = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(centers.shape[0]):
            members = labels == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its centre
                far = np.argmax(d[np.arange(len(x)), labels])
                centers[c] = x[far]
    wcss = sum(((x[labels == c] - centers[c]) ** 2).sum() for c in range(centers.shape[0]))
    return labels, float(wcss)


def kmeans2(x, n_starts: int = 25, max_iter: int = 100, seed: int = 0):
    """Lloyd's algorithm with k=2, best of ``n_starts`` random-row initialisations.

    Returns (labels, wcss). Labels are canonical: 0 for the larger cluster,
    or on equal sizes the cluster holding the lowest row index.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        raise ValidationError("k-means split needs at least 4 individuals")
    if np.all(x == x[0]):
        raise ValidationError("all profiles are identical; no split exists")
    best = None
    for start in range(n_starts):
        rng = stream(seed, "kmeans-start", start)
        first = rng.integers(n)
        others = np.flatnonzero((x != x[first]).any(axis=1))
        rows = [first, rng.choice(others)]
        labels, wcss = _lloyd(x, x[rows].copy(), max_iter)
        if best is None or wcss < best[1] - 1e-9 * abs(best[1]):
            best = (labels, wcss)
    labels, wcss = best
    sizes = np.bincount(labels, minlength=2)
    if sizes[0] != sizes[1]:
        big = int(np.argmax(sizes))
    else:
        big = int(labels[0])
    return np.where(labels == big, 0, 1), wcss


def kmeans_split(x_std, m: MarkerMatrix | np.ndarray | None = None, n_starts: int = 25,
                 max_iter: int = 100, seed: int = 0) -> PopulationSplit:
    """Split into two minimally related subsets; the larger becomes the training set.

    ``x_std`` holds the standardised profiles used for clustering; ``m`` the
    allele counts used to compute ``fst0`` (skipped when ``m`` is None).
    """
    labels, _ = kmeans2(x_std, n_starts, max_iter, seed)
    training = np.flatnonzero(labels == 0)
    target = np.flatnonzero(labels == 1)
    fst0 = estimate_fst(m, training, target).value if m is not None else float("nan")
    return PopulationSplit(training, target, fst0)


def rebalance_split(split: PopulationSplit, m: MarkerMatrix | np.ndarray, target_n_ta: int) -> PopulationSplit:
    """Shrink the target set to ``target_n_ta`` while keeping F_ST as large as possible.

    One individual moves to the training set per step: the one whose transfer
    gives the largest F_ST. Ties go to the lowest index.
    """
    if target_n_ta < 3:
        raise ValidationError("target_n_ta must be >= 3")
    if target_n_ta > split.target.size:
        raise ValidationError(f"target_n_ta={target_n_ta} exceeds current target size {split.target.size}")
    training = list(split.training)
    target = list(split.target)
    if target_n_ta == len(target):
        fst0 = split.fst0 if np.isfinite(split.fst0) else estimate_fst(m, training, target).value
        return PopulationSplit(training, target, fst0)
    fst0 = split.fst0
    while len(target) > target_n_ta:
        best_val, best_i = -np.inf, None
        for i in target:
            val = estimate_fst(m, training + [i], [t for t in target if t != i]).value
            if val > best_val:
                best_val, best_i = val, i
        target.remove(best_i)
        training.append(best_i)
        fst0 = best_val
    return PopulationSplit(training, target, fst0)
