"""Forward simulation of a genomic-selection programme and of cross-population traits.

Founders are phased at random, gametes are produced with Poisson crossovers
on a uniform genetic map, offspring come from random mating without selfing
and selection is by truncation on phenotype. Prediction always uses the
model fitted on the founders.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import elastic_net as en
from ._pool import pmap
from .errors import ValidationError
from .fst import fst_between
from .geno import MarkerMatrix, PhenotypeVector, minor_allele_frequency
from .rng import stream


@dataclass(frozen=True, eq=False)
class GeneticMap:
    """Marker positions (Morgans) on chromosomes of equal length.

    ``chromosome`` gives each marker's chromosome; markers of one chromosome
    are contiguous in column order and their positions strictly increase.
    """

    chromosome: np.ndarray
    position: np.ndarray
    length: float = 1.0

    def __post_init__(self):
        chrom = np.asarray(self.chromosome, dtype=int)
        pos = np.asarray(self.position, dtype=float)
        if chrom.shape != pos.shape or chrom.ndim != 1:
            raise ValidationError("chromosome and position must be 1-D of equal length")
        if np.any(np.diff(chrom) < 0):
            raise ValidationError("markers must be grouped by chromosome in column order")
        same = np.diff(chrom) == 0
        if np.any(np.diff(pos)[same] <= 0):
            raise ValidationError("positions must strictly increase within a chromosome")
        if self.length < 0 or np.any(pos < 0) or np.any(pos > max(self.length, pos.max(initial=0))):
            raise ValidationError("positions must lie in [0, length]")
        object.__setattr__(self, "chromosome", chrom)
        object.__setattr__(self, "position", pos)

    @classmethod
    def uniform(cls, n_markers: int, n_chromosomes: int = 21, length: float = 1.0) -> "GeneticMap":
        """Spread markers evenly over ``n_chromosomes`` chromosomes in column order."""
        if n_markers < 1 or n_chromosomes < 1:
            raise ValidationError("need at least one marker and one chromosome")
        chrom = np.empty(n_markers, dtype=int)
        pos = np.empty(n_markers)
        for c, block in enumerate(np.array_split(np.arange(n_markers), n_chromosomes)):
            chrom[block] = c
            pos[block] = (np.arange(block.size) + 0.5) / max(block.size, 1) * length
        return cls(chrom, pos, length)

    @property
    def n_markers(self) -> int:
        return self.position.size

    @property
    def n_chromosomes(self) -> int:
        return int(self.chromosome.max()) + 1 if self.chromosome.size else 0


@dataclass(frozen=True, eq=False)
class HaplotypePopulation:
    haplotypes: np.ndarray
    map: GeneticMap
    individual_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        h = np.asarray(self.haplotypes, dtype=np.uint8)
        if h.ndim != 3 or h.shape[1] != 2:
            raise ValidationError("haplotypes must have shape (n, 2, m)")
        if h.shape[2] != self.map.n_markers:
            raise ValidationError("haplotype length differs from the genetic map")
        if h.max(initial=0) > 1:
            raise ValidationError("haplotype alleles must be 0 or 1")
        object.__setattr__(self, "haplotypes", h)

    @property
    def size(self) -> int:
        return self.haplotypes.shape[0]

    def genotypes(self) -> np.ndarray:
        return self.haplotypes.sum(axis=1, dtype=np.int64).astype(float)

    def subset(self, index) -> "HaplotypePopulation":
        index = np.asarray(index, dtype=int)
        ids = None if self.individual_ids is None else tuple(self.individual_ids[i] for i in index)
        return HaplotypePopulation(self.haplotypes[index], self.map, ids)

    def to_marker_matrix(self, marker_ids, prefix: str = "ind") -> MarkerMatrix:
        ids = self.individual_ids or [f"{prefix}{i}" for i in range(self.size)]
        return MarkerMatrix(self.genotypes(), marker_ids, ids)


@dataclass(frozen=True, eq=False)
class TraitArchitecture:
    causal_indices: np.ndarray
    effects: np.ndarray
    sigma_e: float = 1.0
    h2_target: float = 0.55

    def __post_init__(self):
        if len(self.causal_indices) != len(self.effects):
            raise ValidationError("one effect per causal marker required")


@dataclass(frozen=True)
class SelectionRound:
    generation: int
    mean_fst: float
    mean_rho: float
    mean_genetic_value: float


@dataclass(frozen=True)
class GenerationRecord:
    sim: int
    generation: int
    fst: float
    rho: float
    mean_g: float


@dataclass
class SelectionResult:
    rounds: list[SelectionRound]
    records: list[GenerationRecord]
    kept: list[tuple[MarkerMatrix, PhenotypeVector]] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sim", "generation", "fst", "rho", "mean_g"])
            for r in self.records:
                w.writerow([r.sim, r.generation, repr(r.fst), repr(r.rho), repr(r.mean_g)])


def _rng(seed, *labels):
    return seed if isinstance(seed, np.random.Generator) else stream(seed, *labels)


# --------------------------------------------------------------- genetics

def phase_founders(m: MarkerMatrix | np.ndarray, gmap: GeneticMap, seed=0) -> HaplotypePopulation:
    """Random phase for heterozygotes; homozygotes are phased trivially."""
    counts = m.counts if isinstance(m, MarkerMatrix) else np.asarray(m, dtype=float)
    if np.isnan(counts).any():
        raise ValidationError("founder genotypes must not contain missing cells")
    g = counts.astype(np.uint8)
    rng = _rng(seed, "phase-founders")
    first = rng.integers(0, 2, size=g.shape, dtype=np.uint8)
    h1 = np.where(g == 1, first, g // 2)
    h2 = g - h1
    ids = m.individual_ids if isinstance(m, MarkerMatrix) else None
    return HaplotypePopulation(np.stack([h1, h2], axis=1), gmap, ids)


def make_gametes(parents: np.ndarray, gmap: GeneticMap, rng: np.random.Generator) -> np.ndarray:
    """One recombinant gamete per parent in ``parents`` (shape (k, 2, m))."""
    k, _, m = parents.shape
    chrom = gmap.chromosome
    n_chrom = gmap.n_chromosomes
    starts = np.searchsorted(chrom, np.arange(n_chrom))
    ends = np.append(starts[1:], m)
    # global coordinate: chromosome c occupies [c * span, c * span + length]
    span = gmap.length + 1.0
    gpos = chrom * span + gmap.position

    n_co = rng.poisson(gmap.length, size=(k, n_chrom))
    g_idx = np.repeat(np.repeat(np.arange(k), n_chrom), n_co.ravel())
    c_idx = np.repeat(np.tile(np.arange(n_chrom), k), n_co.ravel())
    co_pos = c_idx * span + rng.random(g_idx.size) * gmap.length
    j = np.searchsorted(gpos, co_pos, side="right")
    inside = j < ends[c_idx]
    toggles = np.zeros((k, m), dtype=np.int64)
    np.add.at(toggles, (g_idx[inside], j[inside]), 1)
    cs = np.cumsum(toggles, axis=1)
    before = np.where(starts > 0, cs[:, np.maximum(starts - 1, 0)], 0)
    parity = (cs - before[:, chrom]) % 2

    start_strand = rng.integers(0, 2, size=(k, n_chrom))
    strand = (start_strand[:, chrom] + parity) % 2
    return np.take_along_axis(parents, strand[:, None, :].astype(np.intp), axis=1)[:, 0, :]


def make_gamete(parent: np.ndarray, gmap: GeneticMap, seed=0) -> np.ndarray:
    parent = np.asarray(parent, dtype=np.uint8)
    if parent.shape != (2, gmap.n_markers):
        raise ValidationError("parent must have shape (2, n_markers)")
    return make_gametes(parent[None], gmap, _rng(seed, "gamete"))[0]


def random_mate(pop: HaplotypePopulation, n_offspring: int, seed=0, prefix: str | None = None) -> HaplotypePopulation:
    """Offspring of uniformly drawn pairs of distinct parents."""
    if pop.size < 2:
        raise ValidationError("random mating needs at least two parents")
    rng = _rng(seed, "random-mate")
    p1 = rng.integers(pop.size, size=n_offspring)
    p2 = rng.integers(pop.size, size=n_offspring)
    selfed = p1 == p2
    while selfed.any():
        p2[selfed] = rng.integers(pop.size, size=int(selfed.sum()))
        selfed = p1 == p2
    g1 = make_gametes(pop.haplotypes[p1], pop.map, rng)
    g2 = make_gametes(pop.haplotypes[p2], pop.map, rng)
    ids = None if prefix is None else tuple(f"{prefix}{i}" for i in range(n_offspring))
    return HaplotypePopulation(np.stack([g1, g2], axis=1), pop.map, ids)


# ------------------------------------------------------------------- traits

def _genotype_array(pop) -> np.ndarray:
    if isinstance(pop, HaplotypePopulation):
        return pop.genotypes()
    if isinstance(pop, MarkerMatrix):
        return pop.counts
    return np.asarray(pop, dtype=float)


def make_architecture(founders, n_causal: int, h2: float = 0.55, sigma_e: float = 1.0,
                      seed=0, maf_min: float = 0.05) -> TraitArchitecture:
    """Draw causal markers (MAF > ``maf_min``) and N(0, 1) effects, rescaled to heritability ``h2``.

    Effects are scaled so the founders' genetic values have sample variance
    ``h2 / (1 - h2) * sigma_e**2``.
    """
    if not 0.0 < h2 < 1.0:
        raise ValidationError("h2 must lie in (0, 1); approximate h2 = 1 with a small sigma_e")
    x = _genotype_array(founders)
    cand = np.flatnonzero(minor_allele_frequency(x) > maf_min)
    if cand.size == 0:
        raise ValidationError(f"no marker has MAF > {maf_min}")
    if not 1 <= n_causal <= cand.size:
        raise ValidationError(f"n_causal={n_causal} but only {cand.size} eligible markers")
    rng = _rng(seed, "architecture")
    causal = np.sort(rng.choice(cand, size=n_causal, replace=False))
    effects = rng.normal(size=n_causal)
    var_g = np.var(x[:, causal] @ effects, ddof=1)
    if var_g <= 0:
        raise ValidationError("causal markers give no genetic variance in the founders")
    effects *= np.sqrt(h2 / (1.0 - h2) * sigma_e ** 2 / var_g)
    return TraitArchitecture(causal, effects, sigma_e, h2)


def genetic_values(pop, arch: TraitArchitecture) -> np.ndarray:
    return _genotype_array(pop)[:, arch.causal_indices] @ arch.effects


def simulate_phenotypes(pop, arch: TraitArchitecture, seed=0, trait_name: str = "trait") -> PhenotypeVector:
    """Additive genetic value plus N(0, sigma_e^2) noise."""
    g = genetic_values(pop, arch)
    rng = _rng(seed, "phenotype-noise")
    ids = getattr(pop, "individual_ids", None)
    return PhenotypeVector(g + rng.normal(scale=arch.sigma_e, size=g.size), trait_name, ids)


# ---------------------------------------------------------------- programme

def _one_program(founders, founder_g, arch, model, n_rounds, n_progeny, n_selected, rng,
                 random_selection, keep, sim):
    parents = founders
    records, kept = [], []
    for gen in range(1, n_rounds + 1):
        progeny = random_mate(parents, n_progeny, rng)
        G = progeny.genotypes()
        g = G[:, arch.causal_indices] @ arch.effects
        y = g + rng.normal(scale=arch.sigma_e, size=g.size)
        fst = fst_between(founder_g, G).value
        try:
            rho = en.predictive_correlation(y, en.predict(model, G))
        except en.UndefinedCorrelation:
            rho = float("nan")
        records.append(GenerationRecord(sim, gen, fst, rho, float(g.mean())))
        if gen <= keep:
            ids = [f"s{sim}g{gen}i{i}" for i in range(n_progeny)]
            kept.append((G, y, ids))
        if random_selection:
            chosen = rng.choice(n_progeny, size=n_selected, replace=False)
        else:
            chosen = np.argsort(-y, kind="stable")[:n_selected]
        parents = progeny.subset(chosen)
    return records, kept


def run_selection_program(founders: HaplotypePopulation, arch: TraitArchitecture, model: en.ElasticNetModel,
                          n_rounds: int = 10, n_progeny: int = 200, n_selected: int = 20, n_sims: int = 100,
                          seed: int = 0, threads: int | None = None, keep_generations: int = 0,
                          random_selection: bool = False, marker_ids=None,
                          fst_reference: np.ndarray | None = None) -> SelectionResult:
    """Repeat ``n_sims`` independent selection programmes of ``n_rounds`` rounds.

    Each round mates the current parents, simulates phenotypes, measures
    F_ST against the founders and the founder model's predictive
    correlation, then keeps the ``n_selected`` highest phenotypes (or a
    random ``n_selected`` with ``random_selection``). ``rounds`` holds the
    per-generation means over simulations. The progeny of the first
    ``keep_generations`` rounds of simulation 0 are returned in ``kept``.
    F_ST is measured against ``fst_reference`` genotypes when given (e.g.
    an augmented training population), otherwise against the founders.
    """
    if not 2 <= n_selected < n_progeny:
        raise ValidationError("need 2 <= n_selected < n_progeny")
    if model.beta.size != founders.map.n_markers:
        raise ValidationError("model and founders disagree on the number of markers")
    founder_g = founders.genotypes() if fst_reference is None else np.asarray(fst_reference, dtype=float)

    def sim(s):
        return _one_program(founders, founder_g, arch, model, n_rounds, n_progeny, n_selected,
                            stream(seed, "selection-sim", s), random_selection,
                            keep_generations if s == 0 else 0, s)

    outputs = pmap(sim, range(n_sims), threads)
    records = [r for recs, _ in outputs for r in recs]
    rounds = []
    for gen in range(1, n_rounds + 1):
        rows = [r for r in records if r.generation == gen]
        rhos = np.array([r.rho for r in rows])
        rounds.append(SelectionRound(
            gen,
            float(np.mean([r.fst for r in rows])),
            float(np.nanmean(rhos)) if np.isfinite(rhos).any() else float("nan"),
            float(np.mean([r.mean_g for r in rows]))))
    ids = marker_ids if marker_ids is not None else [f"m{j}" for j in range(founders.map.n_markers)]
    kept = [(MarkerMatrix(G, ids, iids), PhenotypeVector(y, "trait", iids)) for G, y, iids in outputs[0][1]]
    return SelectionResult(rounds, records, kept)


def augment_training(founders: MarkerMatrix, founder_pheno: PhenotypeVector, generations) -> tuple[MarkerMatrix, PhenotypeVector]:
    """Stack founders and later generations into one training population."""
    mats, ys = [founders], [founder_pheno.values]
    for m, y in generations:
        if tuple(m.marker_ids) != tuple(founders.marker_ids):
            raise ValidationError("generation markers differ from the founders'")
        mats.append(m)
        ys.append(y.values)
    ids = [i for mm in mats for i in mm.individual_ids]
    counts = np.vstack([mm.counts for mm in mats])
    return (MarkerMatrix(counts, founders.marker_ids, ids),
            PhenotypeVector(np.concatenate(ys), founder_pheno.trait_name, ids))


def crosspop_simulate(populations, n_causal: int, h2: float = 0.55, seed: int = 0,
                      sigma_e: float = 1.0) -> list[PhenotypeVector]:
    """Phenotypes for several populations from one shared architecture.

    Causal markers and effects are drawn once, with heritability scaled on
    the first (training) population; every population then gets its own noise.
    """
    pops = list(populations)
    if not pops:
        raise ValidationError("no populations given")
    ref = pops[0].marker_ids
    for p in pops[1:]:
        if tuple(p.marker_ids) != tuple(ref):
            raise ValidationError("populations must share the same marker set")
    arch = make_architecture(pops[0], n_causal, h2, sigma_e, stream(seed, "crosspop-architecture"))
    return [simulate_phenotypes(p, arch, stream(seed, "crosspop-noise", k)) for k, p in enumerate(pops)]
