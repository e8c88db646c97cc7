"""Synthetic genotype panels drawn under the Balding-Nichols model.

These stand in for real training populations in tests, examples and the
default CLI configuration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geno import MarkerMatrix
from .rng import stream


def balding_nichols(p_ancestral, fst: float, rng: np.random.Generator) -> np.ndarray:
    """Population allele frequencies ``~ Beta(p (1-F)/F, (1-p)(1-F)/F)``."""
    p = np.asarray(p_ancestral, dtype=float)
    if fst <= 0:
        return p.copy()
    s = (1.0 - fst) / fst
    return rng.beta(p * s, (1.0 - p) * s)


def sample_genotypes(freq, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.binomial(2, np.broadcast_to(freq, (n, len(freq)))).astype(float)


def multi_population(sizes, fsts, n_markers: int = 2000, seed: int = 0, p_range=(0.05, 0.95),
                     prefix: str = "ind") -> tuple[MarkerMatrix, np.ndarray]:
    """Populations diverged from one ancestor by the given F values (0 = the ancestor itself).

    Returns the stacked genotypes and an integer population label per row.
    Markers left monomorphic in the whole sample are dropped.
    """
    rng = stream(seed, "synthetic-panel")
    p = rng.uniform(*p_range, size=n_markers)
    blocks, labels = [], []
    for k, (n, f) in enumerate(zip(sizes, fsts)):
        blocks.append(sample_genotypes(balding_nichols(p, f, rng), n, rng))
        labels.append(np.full(n, k))
    x = np.vstack(blocks)
    keep = x.std(axis=0) > 0
    x = x[:, keep]
    marker_ids = [f"snp{j}" for j in np.flatnonzero(keep)]
    ids = [f"{prefix}{i}" for i in range(x.shape[0])]
    return MarkerMatrix(x, marker_ids, ids), np.concatenate(labels)


def two_population(n_training: int = 180, n_target: int = 120, fst: float = 0.05, n_markers: int = 2000,
                   seed: int = 0) -> tuple[MarkerMatrix, np.ndarray]:
    """Ancestral training population plus a target population diverged by ``fst``."""
    return multi_population([n_training, n_target], [0.0, fst], n_markers, seed)


def panmictic(n: int = 300, n_markers: int = 2000, seed: int = 0) -> MarkerMatrix:
    return multi_population([n], [0.0], n_markers, seed)[0]


@dataclass
class FamilyPanel:
    """Genotyped markers plus ungenotyped loci for full-sib families from several populations."""

    markers: MarkerMatrix
    hidden: np.ndarray
    population: np.ndarray
    family: np.ndarray


def family_populations(n_families=(30, 20), family_size: int = 6, fsts=(0.0, 0.05),
                       n_markers: int = 2000, n_hidden: int = 200, n_chromosomes: int = 21,
                       seed: int = 0) -> FamilyPanel:
    """Full-sib families in populations diverged from one ancestor.

    Each population's allele frequencies are drawn Balding-Nichols around
    the ancestral ones; every family has two unrelated parents sampled in
    linkage equilibrium from those frequencies, and ``family_size``
    offspring produced by meiosis on a uniform map. ``n_hidden`` extra loci,
    interleaved with the markers, are returned separately as ungenotyped
    causal candidates.
    """
    from .breeding import GeneticMap, make_gametes

    rng = stream(seed, "family-panel")
    n_loci = n_markers + n_hidden
    p = rng.uniform(0.05, 0.95, size=n_loci)
    hidden_pos = np.sort(rng.choice(n_loci, size=n_hidden, replace=False))
    is_hidden = np.zeros(n_loci, dtype=bool)
    is_hidden[hidden_pos] = True
    gmap = GeneticMap.uniform(n_loci, n_chromosomes)
    geno, pops, fams = [], [], []
    fam_id = 0
    for k, (nf, f) in enumerate(zip(n_families, fsts)):
        q = balding_nichols(p, f, rng)
        parents = (rng.random((nf, 2, 2, n_loci)) < q).astype(np.uint8)
        for fam in range(nf):
            pair = parents[fam]
            g1 = make_gametes(np.repeat(pair[0][None], family_size, axis=0), gmap, rng)
            g2 = make_gametes(np.repeat(pair[1][None], family_size, axis=0), gmap, rng)
            geno.append(g1.astype(float) + g2)
            pops.append(np.full(family_size, k))
            fams.append(np.full(family_size, fam_id))
            fam_id += 1
    g = np.vstack(geno)
    x = g[:, ~is_hidden]
    keep = x.std(axis=0) > 0
    marker_ids = [f"snp{j}" for j in np.flatnonzero(keep)]
    ids = [f"ind{i}" for i in range(g.shape[0])]
    return FamilyPanel(MarkerMatrix(x[:, keep], marker_ids, ids), g[:, is_hidden],
                       np.concatenate(pops), np.concatenate(fams))
