"""Command-line interface.

Every subcommand reads a JSON config, writes CSV/JSON artifacts (and
figures where relevant) into the output directory, and exits nonzero with
a one-line diagnostic on error. Outputs depend only on the config and the
input files, never on ``--threads``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .config import RunConfig
from .decay import (curve_json, fit_decay_curve, read_points_csv, write_points_csv)
from .errors import DecayKitError, InsufficientDataError
from .geno import qc_pipeline, write_genotype_csv, write_phenotype_csv
from .holdout import write_holdout_csv
from .stats import fst_kinship_diagnostics

log = logging.getLogger("decaykit")


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(obj, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(_clean(obj), indent=2) + "\n")


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plot(curve, points, path, reference=None, title=None):
    from .plotting import plot_decay

    plot_decay(curve, points, path, reference, title)


# ----------------------------------------------------------------- commands

def cmd_preprocess(cfg: RunConfig) -> dict:
    """Quality control of the configured genotypes (or the synthetic panel)."""
    cfg.check_inputs()
    out = _outdir(cfg)
    if cfg.input.get("genotypes"):
        from .geno import load_dataset
        data, pheno = load_dataset(cfg.input["genotypes"], cfg.input.get("phenotypes"))
    else:
        data, pheno = pl.synthetic_dataset(cfg.synthetic, cfg.seed)
    qc = cfg.qc
    clean, report = qc_pipeline(data, qc["maf_min"], qc["missing_max"], qc["ld_r_max"], qc["knn_k"], cfg.seed)
    paths = {"genotypes": out / "genotypes.csv", "qc_report": out / "qc_report.json"}
    write_genotype_csv(clean, paths["genotypes"])
    with open(paths["qc_report"], "w", newline="\n") as fh:
        fh.write(report.to_json())
    if pheno is not None:
        paths["phenotypes"] = out / "phenotypes.csv"
        write_phenotype_csv(pheno, paths["phenotypes"])
    return paths


def cmd_decay(cfg: RunConfig, threads: int | None = None) -> dict:
    """Split, tune, resample and fit; writes decay_points.csv, curve.json, split.json and a figure."""
    cfg.check_inputs()
    out = _outdir(cfg)
    data, pheno = pl.load_inputs(cfg)
    if pheno is None:
        raise DecayKitError("decay needs phenotypes: set input.phenotypes")
    run = pl.run_decay(data, pheno, cfg.decay, cfg.cv, cfg.seed, threads, with_kinship=cfg.decay["kinship"])
    paths = {"points": out / "decay_points.csv", "curve": out / "curve.json", "split": out / "split.json"}
    write_points_csv(run.samples.points, paths["points"])
    extra = {"run": run.summary(), "tuning": run.tuned.to_dict()["best"]}
    if cfg.decay["kinship"]:
        pairs = [(p.fst, p.kbar) for p in run.samples.points]
        try:
            t = fst_kinship_diagnostics(pairs)
            extra["fst_kinship"] = {"r": t.r, "t": t.t, "p_value": t.p_value, "n": t.n, "degenerate": t.degenerate}
        except (DecayKitError, ValueError) as exc:
            extra["fst_kinship"] = {"error": str(exc)}
    with open(paths["curve"], "w", newline="\n") as fh:
        fh.write(json.dumps(_clean(json.loads(curve_json(run.curve, extra))), indent=2) + "\n")
    write_json(run.split.to_dict(list(data.individual_ids)), paths["split"])
    if cfg.decay["plot"]:
        paths["plot"] = out / "decay.svg"
        _plot(run.curve, run.samples.points, paths["plot"])
    return paths


def cmd_holdout(cfg: RunConfig, threads: int | None = None) -> dict:
    """Hold-out CV at the k-means split sizes; writes holdout.csv and holdout.json."""
    cfg.check_inputs()
    out = _outdir(cfg)
    data, pheno = pl.load_inputs(cfg)
    if pheno is None:
        raise DecayKitError("holdout-cv needs phenotypes: set input.phenotypes")
    results, split = pl.run_holdout(data, pheno, cfg.holdout, cfg.decay, cfg.cv, cfg.seed, threads)
    paths = {"holdout": out / "holdout.csv", "summary": out / "holdout.json"}
    write_holdout_csv(results, paths["holdout"])
    summary = pl.holdout_summary(results)
    summary.update({"n_tr": results[0].n_tr, "n_ta": results[0].n_ta})
    write_json(summary, paths["summary"])
    return paths


def cmd_simulate(cfg: RunConfig, mode: str, threads: int | None = None) -> dict:
    """Breeding-programme or cross-population simulation plus the comparison against the decay curve."""
    if mode == "breeding":
        return _simulate_breeding(cfg, threads)
    if mode == "crosspop":
        return _simulate_crosspop(cfg, threads)
    raise DecayKitError(f"unknown simulation mode {mode!r}; use 'breeding' or 'crosspop'")


def _simulate_breeding(cfg: RunConfig, threads) -> dict:
    cfg.check_inputs()
    out = _outdir(cfg)
    sim = cfg.simulation
    data = None
    if cfg.input.get("genotypes"):
        data, _ = pl.load_inputs(cfg)
    founders, founder_m = pl.make_founders(sim, cfg.seed, data)
    run = pl.run_breeding(founders, founder_m, sim, cfg.decay, cfg.cv, cfg.seed, threads)
    paths = {"generations": out / "generations.csv", "comparison": out / "comparison.json",
             "points": out / "decay_points.csv", "curve": out / "curve.json"}
    run.selection.write_csv(paths["generations"])
    write_points_csv(run.decay.samples.points, paths["points"])
    with open(paths["curve"], "w", newline="\n") as fh:
        fh.write(json.dumps(_clean(json.loads(curve_json(run.decay.curve, {"run": run.decay.summary()}))),
                            indent=2) + "\n")
    comparison = {"mode": "breeding", "reference": "generation means over simulations",
                  "window": cfg.decay["window"], "generations": run.comparison}
    if sim["augment_generations"] > 0:
        aug = pl.run_augmented(run, founders, sim, cfg.decay, cfg.cv, cfg.seed, threads)
        paths["generations_augmented"] = out / "generations_augmented.csv"
        aug.selection.write_csv(paths["generations_augmented"])
        comparison["augmented"] = {"n_training": aug.founders.n_individuals, "generations": aug.comparison}
    write_json(comparison, paths["comparison"])
    if cfg.decay["plot"]:
        paths["plot"] = out / "breeding.svg"
        ref = [(f"g{r['generation']}", r["fst"], r["rho"]) for r in run.comparison]
        _plot(run.decay.curve, run.decay.samples.points, paths["plot"], ref, "breeding simulation")
    return paths


def _simulate_crosspop(cfg: RunConfig, threads) -> dict:
    cfg.check_inputs()
    out = _outdir(cfg)
    names, pops = pl.crosspop_populations(cfg)
    rows, drun, tuned = pl.run_crosspop(names, pops, cfg.simulation, cfg.decay, cfg.cv, cfg.seed, threads)
    paths = {"populations": out / "populations.csv", "comparison": out / "comparison.json",
             "points": out / "decay_points.csv", "curve": out / "curve.json"}
    with open(paths["populations"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["population", "n", "fst", "rho_p", "ci_lower", "ci_upper"])
        for r in rows:
            w.writerow([r["population"], r["n"]] + [_fmt(r[k]) for k in ("fst", "rho_p", "ci_lower", "ci_upper")])
    write_points_csv(drun.samples.points, paths["points"])
    with open(paths["curve"], "w", newline="\n") as fh:
        fh.write(json.dumps(_clean(json.loads(curve_json(drun.curve, {"run": drun.summary()}))), indent=2) + "\n")
    write_json({"mode": "crosspop", "training_population": names[0], "n_training": pops[0].n_individuals,
                "tuning": tuned.to_dict()["best"], "window": cfg.decay["window"], "populations": rows},
               paths["comparison"])
    if cfg.decay["plot"]:
        paths["plot"] = out / "crosspop.svg"
        _plot(drun.curve, drun.samples.points, paths["plot"],
              [(r["population"], r["fst"], r["rho_p"]) for r in rows], "cross-population prediction")
    return paths


def _fmt(v) -> str:
    return "NA" if v is None else repr(float(v))


def cmd_report(out_dir, fmt: str = "svg", span: float | None = None, degree: int | None = None) -> dict:
    """Re-render the figure of a finished run from its decay_points.csv (and comparison.json, if any)."""
    out = Path(out_dir)
    pts_path = out / "decay_points.csv"
    if not pts_path.is_file():
        raise FileNotFoundError(f"decay points not found: {pts_path}")
    points = read_points_csv(pts_path)
    curve_path = out / "curve.json"
    if curve_path.is_file():
        lo = json.loads(curve_path.read_text()).get("loess") or {}
        span = span if span is not None else lo.get("span")
        degree = degree if degree is not None else lo.get("degree")
    try:
        curve = fit_decay_curve(points, span or 0.75, degree or 2)
    except (InsufficientDataError, ValueError) as exc:
        log.warning("no curve fitted: %s", exc)
        curve = None
    reference, title = [], None
    comp_path = out / "comparison.json"
    if comp_path.is_file():
        comp = json.loads(comp_path.read_text())
        if comp.get("mode") == "breeding":
            reference = [(f"g{r['generation']}", r["fst"], r["rho"]) for r in comp["generations"]]
            title = "breeding simulation"
        elif comp.get("mode") == "crosspop":
            reference = [(r["population"], r["fst"], r["rho_p"]) for r in comp["populations"]]
            title = "cross-population prediction"
    hold_path = out / "holdout.json"
    if hold_path.is_file():
        h = json.loads(hold_path.read_text())
        if h.get("mean_rho_cv") is not None:
            reference.append(("hold-out CV", h["mean_fst"], h["mean_rho_cv"]))
    path = out / f"report.{fmt}"
    _plot(curve, points, path, [r for r in reference if r[2] is not None], title)
    return {"plot": path}


# -------------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decaykit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inputs=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker threads (default: DECAYKIT_THREADS or all cores)")
        if inputs:
            p.add_argument("--genotypes", help="genotype CSV (overrides input.genotypes)")
            p.add_argument("--phenotypes", help="phenotype CSV (overrides input.phenotypes)")

    common(sub.add_parser("preprocess", help="quality control: MAF, missingness, imputation, LD pruning"))
    common(sub.add_parser("decay", help="build the accuracy decay curve"))
    common(sub.add_parser("holdout-cv", help="random-split hold-out cross-validation"))
    common(sub.add_parser("simulate-breeding", help="genomic-selection programme simulation"))
    p = sub.add_parser("simulate-crosspop", help="prediction across simulated or labelled populations")
    common(p)
    p.add_argument("--populations", help="CSV 'id,population' (overrides input.populations)")
    p = sub.add_parser("report", help="render the figure for a finished run directory")
    p.add_argument("run_dir", help="directory holding decay_points.csv")
    p.add_argument("--format", default="svg", choices=("svg", "png", "pdf"))
    p.add_argument("--span", type=float)
    p.add_argument("--degree", type=int, choices=(1, 2))
    return parser


def _config(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        raw = json.loads(path.read_text())
        base = path.parent
    elif args.seed is not None:
        raw, base = {"seed": args.seed}, Path(".")
    else:
        raise DecayKitError("a --config file (or at least --seed) is required")
    if args.seed is not None:
        raw["seed"] = args.seed
    inp = raw.setdefault("input", {})
    for key in ("genotypes", "phenotypes", "populations"):
        v = getattr(args, key, None)
        if v:
            inp[key] = str(Path(v).resolve())
    cfg = RunConfig.from_dict(raw, base)
    if args.out:
        cfg.output_dir = Path(args.out)
    if args.threads is not None and args.threads < 1:
        raise DecayKitError("--threads must be >= 1")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="decaykit: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "report":
            paths = cmd_report(args.run_dir, args.format, args.span, args.degree)
        else:
            cfg = _config(args)
            threads = args.threads if args.threads is not None else cfg.threads
            if args.command == "preprocess":
                paths = cmd_preprocess(cfg)
            elif args.command == "decay":
                paths = cmd_decay(cfg, threads)
            elif args.command == "holdout-cv":
                paths = cmd_holdout(cfg, threads)
            else:
                paths = cmd_simulate(cfg, args.command.split("-", 1)[1], threads)
    except (DecayKitError, ValueError, OSError) as exc:
        print(f"decaykit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
