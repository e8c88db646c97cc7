"""Hold-out cross-validation with random splits of fixed size."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._pool import pmap
from .decay import _hyper, score_split
from .errors import ValidationError
from .fst import estimate_fst
from .geno import MarkerMatrix, PhenotypeVector
from .rng import stream


@dataclass(frozen=True)
class HoldoutResult:
    replicate: int
    fst: float
    rho_cv: float
    n_tr: int
    n_ta: int


def holdout_cv(data: MarkerMatrix, pheno: PhenotypeVector, n_tr: int, n_ta: int, tuned,
               n_reps: int = 40, seed: int = 0, threads: int | None = None) -> list[HoldoutResult]:
    """Score ``n_reps`` random disjoint (training, target) splits of the given sizes.

    Every split refits the elastic net at the tuned (alpha, lambda) and
    records the target correlation together with the split's F_ST.
    """
    n = data.n_individuals
    if n_tr < 2 or n_ta < 3 or n_tr + n_ta > n:
        raise ValidationError(f"invalid split sizes n_tr={n_tr}, n_ta={n_ta} for n={n}")
    alpha, lam = _hyper(tuned)

    def run(rep):
        perm = stream(seed, "holdout", rep).permutation(n)
        tr, ta = np.sort(perm[:n_tr]), np.sort(perm[n_tr:n_tr + n_ta])
        rho = score_split(data, pheno, tr, ta, alpha, lam)
        return HoldoutResult(rep, estimate_fst(data, tr, ta).value, rho, n_tr, n_ta)

    return pmap(run, range(n_reps), threads)


def write_holdout_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "fst", "rho_cv"])
        for r in results:
            w.writerow([r.replicate, repr(float(r.fst)), repr(float(r.rho_cv))])
