"""End-to-end procedures shared by the CLI and the acceptance checks."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import breeding as bs
from . import elastic_net as en
from .clustering import PopulationSplit, kmeans_split, rebalance_split
from .decay import DecayCurve, DecaySamples, evaluate_rho_d, fit_decay_curve, generate_decay_points
from .errors import InsufficientDataError, ValidationError
from .fst import estimate_fst, fst_between
from .geno import MarkerMatrix, PhenotypeVector, load_dataset, qc_pipeline, standardize
from .holdout import HoldoutResult, holdout_cv
from .kinship import allelic_kinship
from .rng import child_seed
from .stats import fisher_z_ci
from .synthetic import family_populations, multi_population

log = logging.getLogger(__name__)


def cv_kwargs(cv: dict) -> dict:
    return {"alpha_grid": cv["alphas"], "n_lambda": cv["n_lambda"],
            "lambda_min_ratio": cv["lambda_min_ratio"], "n_runs": cv["n_runs"], "n_folds": cv["n_folds"]}


# -------------------------------------------------------------------- data

def synthetic_dataset(syn: dict, seed: int) -> tuple[MarkerMatrix, PhenotypeVector]:
    """Family panel with a trait controlled by ungenotyped causal loci."""
    panel = family_populations(tuple(syn["n_families"]), syn["family_size"], tuple(syn["fsts"]),
                               syn["n_markers"], syn["n_hidden"], syn["n_chromosomes"],
                               seed=child_seed(seed, "synthetic-panel"))
    arch = bs.make_architecture(panel.hidden, syn["n_causal"], syn["h2"],
                                seed=child_seed(seed, "synthetic-trait"))
    y = bs.simulate_phenotypes(panel.hidden, arch, seed=child_seed(seed, "synthetic-noise"))
    return panel.markers, PhenotypeVector(y.values, "trait", panel.markers.individual_ids)


def load_inputs(cfg) -> tuple[MarkerMatrix, PhenotypeVector | None]:
    if cfg.input.get("genotypes"):
        data, pheno = load_dataset(cfg.input["genotypes"], cfg.input.get("phenotypes"))
    else:
        data, pheno = synthetic_dataset(cfg.synthetic, cfg.seed)
    if cfg.qc["enabled"]:
        data, report = qc_pipeline(data, cfg.qc["maf_min"], cfg.qc["missing_max"],
                                   cfg.qc["ld_r_max"], cfg.qc["knn_k"], cfg.seed)
        log.info("QC kept %d markers (%d MAF, %d missing, %d LD removed; %d cells imputed)",
                 data.n_markers, len(report.removed_maf), len(report.removed_missing),
                 len(report.removed_ld), report.imputed_cells)
    return data, pheno


# ------------------------------------------------------------------- decay

@dataclass
class DecayRun:
    split: PopulationSplit
    tuned: en.CVResult
    samples: DecaySamples
    curve: DecayCurve | None
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "n_tr": int(self.split.training.size), "n_ta": int(self.split.target.size),
            "fst0": float(self.split.fst0),
            "alpha": self.tuned.best[0], "lambda": self.tuned.best[1], "rho_cv_tuning": self.tuned.best_rho,
            "m_step": self.samples.m_step, "n_points": len(self.samples),
            "n_missing_rho": self.samples.n_missing_rho, "stop_reason": self.samples.stop_reason,
            "notes": list(self.notes),
        }


def make_split(data: MarkerMatrix, seed: int, n_starts: int = 25, target_n_ta: int | None = None) -> PopulationSplit:
    split = kmeans_split(standardize(data), data, n_starts=n_starts, seed=child_seed(seed, "kmeans"))
    if target_n_ta is not None and target_n_ta < split.target.size:
        split = rebalance_split(split, data, target_n_ta)
    return split


def tune_on(data: MarkerMatrix, pheno: PhenotypeVector, rows, cv: dict, seed: int, threads=None) -> en.CVResult:
    return en.tune_cv(data.counts[rows], pheno.values[rows], seed=child_seed(seed, "cv"),
                      threads=threads, **cv_kwargs(cv))


def run_decay(data: MarkerMatrix, pheno: PhenotypeVector, decay_cfg: dict, cv: dict, seed: int,
              threads=None, with_kinship: bool = False) -> DecayRun:
    """k-means split, tuning on the training side, swap resampling and curve fitting."""
    split = make_split(data, seed, decay_cfg["kmeans_starts"], decay_cfg.get("target_n_ta"))
    tuned = tune_on(data, pheno, split.training, cv, seed, threads)
    kin = allelic_kinship(standardize(data)) if with_kinship else None
    samples = generate_decay_points(
        data, pheno, split, tuned, m_step=decay_cfg["m_step"], n_reps=decay_cfg["n_reps"],
        fst_stop=decay_cfg["fst_stop"], seed=child_seed(seed, "decay"),
        auto_step=decay_cfg["auto_step"], kinship=kin,
        retune=cv_kwargs(cv) if decay_cfg.get("retune") else None, threads=threads)
    notes = []
    curve = None
    if samples.stop_reason == "fst0 below fst_stop":
        notes.append(f"fst_stop {decay_cfg['fst_stop']} >= F_ST at m=0 ({split.fst0:.6g}); only m=0 emitted")
    try:
        curve = fit_decay_curve(samples.points, decay_cfg["span"], decay_cfg["degree"], decay_cfg["grid_size"])
    except (InsufficientDataError, ValidationError) as exc:
        notes.append(f"no curve fitted: {exc}")
        log.warning("no curve fitted: %s", exc)
    return DecayRun(split, tuned, samples, curve, notes)


def compare_reference(curve: DecayCurve | None, points, fst: float, rho: float, window: float) -> dict:
    """Decay-curve predictions at a reference F_ST and their distance from the observed rho."""
    out = {"fst": _num(fst), "rho": _num(rho)}
    rho_w = evaluate_rho_d(points, fst, window) if points else None
    out["rho_d_window"] = _num(rho_w)
    if curve is not None:
        out["rho_d_loess"] = _num(float(curve.rho_d(fst)[0]))
        out["rho_l"] = _num(float(curve.rho_l(fst)))
    else:
        out["rho_d_loess"] = out["rho_l"] = None
    out["abs_diff_rho_d"] = _absdiff(rho, rho_w)
    out["abs_diff_rho_d_loess"] = _absdiff(rho, out["rho_d_loess"])
    out["abs_diff_rho_l"] = _absdiff(rho, out["rho_l"])
    return out


def _num(v):
    if v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else v


def _absdiff(a, b):
    if a is None or b is None or (isinstance(b, float) and math.isnan(b)) or math.isnan(a):
        return None
    return abs(float(a) - float(b))


def run_holdout(data, pheno, cfg_holdout: dict, decay_cfg: dict, cv: dict, seed: int,
                threads=None) -> tuple[list[HoldoutResult], PopulationSplit]:
    """Hold-out CV with split sizes taken from the k-means split unless configured."""
    split = make_split(data, seed, decay_cfg["kmeans_starts"], decay_cfg.get("target_n_ta"))
    n_tr = cfg_holdout.get("n_tr") or int(split.training.size)
    n_ta = cfg_holdout.get("n_ta") or int(split.target.size)
    tuned = tune_on(data, pheno, split.training, cv, seed, threads)
    res = holdout_cv(data, pheno, n_tr, n_ta, tuned, n_reps=cfg_holdout["n_reps"],
                     seed=child_seed(seed, "holdout"), threads=threads)
    return res, split


def holdout_summary(results) -> dict:
    rho = np.array([r.rho_cv for r in results])
    return {"n_reps": len(results), "mean_fst": float(np.mean([r.fst for r in results])),
            "mean_rho_cv": float(np.nanmean(rho)) if np.isfinite(rho).any() else None,
            "n_missing_rho": int(np.isnan(rho).sum())}


# ---------------------------------------------------------------- breeding

@dataclass
class BreedingRun:
    founders: MarkerMatrix
    founder_pheno: PhenotypeVector
    selection: bs.SelectionResult
    decay: DecayRun | None
    comparison: list[dict]
    arch: bs.TraitArchitecture | None = None
    augmented: "BreedingRun | None" = None


def make_founders(sim: dict, seed: int, data: MarkerMatrix | None = None) -> tuple[bs.HaplotypePopulation, MarkerMatrix]:
    """Base panel (given or synthetic) topped up to ``n_founders`` by random mating."""
    if data is None:
        data, _ = multi_population([sim["n_base"]], [0.0], sim["n_markers"],
                                   seed=child_seed(seed, "founder-panel"), prefix="base")
    gmap = bs.GeneticMap.uniform(data.n_markers, sim["n_chromosomes"])
    base = bs.phase_founders(data, gmap, seed=child_seed(seed, "phase"))
    extra = sim["n_founders"] - base.size
    if extra > 0:
        kids = bs.random_mate(base, extra, seed=child_seed(seed, "founder-mating"), prefix="founder")
        haps = np.concatenate([base.haplotypes, kids.haplotypes])
        ids = tuple(base.individual_ids) + tuple(kids.individual_ids)
        base = bs.HaplotypePopulation(haps, gmap, ids)
    return base, base.to_marker_matrix(data.marker_ids)


def run_breeding(founders: bs.HaplotypePopulation, founder_m: MarkerMatrix, sim: dict, decay_cfg: dict,
                 cv: dict, seed: int, threads=None, arch: bs.TraitArchitecture | None = None,
                 training: tuple[MarkerMatrix, PhenotypeVector] | None = None,
                 with_decay: bool = True, label: str = "original") -> BreedingRun:
    """Genomic-selection simulation and the training population's decay curve, compared per generation.

    The programme always starts from ``founders``. The model is tuned and
    fitted on ``training`` (default: the founders with freshly simulated
    phenotypes), F_ST is measured against the training genotypes, and the
    decay curve is built from the training population.
    """
    if arch is None:
        arch = bs.make_architecture(founder_m, sim["n_causal"], sim["h2"], seed=child_seed(seed, "architecture"))
    if training is None:
        training = (founder_m, bs.simulate_phenotypes(founder_m, arch, seed=child_seed(seed, "founder-pheno")))
    train_m, y = training
    tuned = en.tune_cv(train_m.counts, y.values, seed=child_seed(seed, label, "cv"),
                       threads=threads, **cv_kwargs(cv))
    model = en.fit(train_m, y, *tuned.best)
    sel = bs.run_selection_program(founders, arch, model, sim["n_rounds"], sim["n_progeny"],
                                   sim["n_selected"], sim["n_sims"], seed=child_seed(seed, label, "selection"),
                                   threads=threads, keep_generations=sim["augment_generations"],
                                   marker_ids=founder_m.marker_ids, fst_reference=train_m.counts)
    drun = run_decay(train_m, y, decay_cfg, cv, child_seed(seed, label, "decay"), threads) if with_decay else None
    comparison = []
    for rnd in sel.rounds:
        row = {"generation": rnd.generation, "mean_genetic_value": rnd.mean_genetic_value}
        row.update(compare_reference(drun.curve if drun else None, drun.samples.points if drun else [],
                                     rnd.mean_fst, rnd.mean_rho, decay_cfg["window"]))
        comparison.append(row)
    return BreedingRun(train_m, y, sel, drun, comparison, arch)


def run_augmented(base: BreedingRun, founders: bs.HaplotypePopulation, sim: dict, decay_cfg: dict,
                  cv: dict, seed: int, threads=None) -> BreedingRun:
    """Repeat the programme with the model refitted on founders plus the kept generations."""
    training = bs.augment_training(base.founders, base.founder_pheno, base.selection.kept)
    return run_breeding(founders, base.founders, sim, decay_cfg, cv, seed, threads, arch=base.arch,
                        training=training, label="augmented")


# ---------------------------------------------------------------- crosspop

def read_population_labels(path) -> dict[str, str]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"id", "population"}:
        raise ValidationError(f"{path}: header must be 'id,population'")
    return {r["id"]: r["population"] for r in rows}


def crosspop_populations(cfg) -> tuple[list[str], list[MarkerMatrix]]:
    """Training population first, then the targets in order of appearance."""
    if cfg.input.get("genotypes"):
        data, _ = load_dataset(cfg.input["genotypes"])
        if cfg.qc["enabled"]:
            data, _ = qc_pipeline(data, cfg.qc["maf_min"], cfg.qc["missing_max"], cfg.qc["ld_r_max"],
                                  cfg.qc["knn_k"], cfg.seed)
        if not cfg.input.get("populations"):
            raise ValidationError("simulate-crosspop with a genotype file needs input.populations")
        labels = read_population_labels(cfg.input["populations"])
        try:
            lab = np.array([labels[i] for i in data.individual_ids])
        except KeyError as exc:
            raise ValidationError(f"no population label for individual {exc.args[0]!r}") from None
        names = list(dict.fromkeys(lab))
        train = cfg.input.get("training_population") or names[0]
        if train not in names:
            raise ValidationError(f"training population {train!r} not found")
        names = [train] + [n for n in names if n != train]
        return names, [data.rows(np.flatnonzero(lab == n)) for n in names]
    sim = cfg.simulation
    sizes, fsts = sim["crosspop_sizes"], sim["crosspop_fsts"]
    if len(sizes) != len(fsts):
        raise ValidationError("crosspop_sizes and crosspop_fsts differ in length")
    fam = sim["crosspop_family_size"]
    panel = family_populations(tuple(max(1, s // fam) for s in sizes), fam, tuple(fsts), sim["n_markers"],
                               1, sim["n_chromosomes"], seed=child_seed(cfg.seed, "crosspop-panel"))
    names = ["training"] + [f"target{k}" for k in range(1, len(sizes))]
    return names, [panel.markers.rows(np.flatnonzero(panel.population == k)) for k in range(len(sizes))]


def run_crosspop(names, pops, sim: dict, decay_cfg: dict, cv: dict, seed: int, threads=None):
    """Shared-architecture phenotypes, a model fitted on the training population, and target accuracies."""
    phenos = bs.crosspop_simulate(pops, sim["n_causal"], sim["h2"], seed=child_seed(seed, "crosspop-trait"))
    train, ytrain = pops[0], phenos[0]
    tuned = en.tune_cv(train, ytrain, seed=child_seed(seed, "crosspop-cv"), threads=threads, **cv_kwargs(cv))
    model = en.fit(train, ytrain, *tuned.best)
    drun = run_decay(train, ytrain, decay_cfg, cv, child_seed(seed, "crosspop-decay"), threads)
    rows = []
    for name, pop, y in zip(names[1:], pops[1:], phenos[1:]):
        fst = fst_between(train.counts, pop.counts).value
        try:
            rho = en.predictive_correlation(y.values, en.predict(model, pop))
            lo, hi = fisher_z_ci(rho, pop.n_individuals)
        except (en.UndefinedCorrelation, InsufficientDataError):
            rho, lo, hi = float("nan"), float("nan"), float("nan")
        row = {"population": name, "n": pop.n_individuals, "ci_lower": _num(lo), "ci_upper": _num(hi)}
        row.update(compare_reference(drun.curve, drun.samples.points, fst, rho, decay_cfg["window"]))
        row["rho_p"] = row.pop("rho")
        rows.append(row)
    return rows, drun, tuned
