"""Decay of predictive correlation with genetic distance.

Starting from a maximally separated training/target split (m = 0), ``m``
individuals are swapped at random between the two sides, the model is refit
on the new training side and scored on the new target side. Each replicate
gives one (F_ST, rho) point; the cloud of points is smoothed by LOESS and
summarised by a straight line.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import elastic_net as en
from ._pool import pmap
from .clustering import PopulationSplit
from .errors import InsufficientDataError, ValidationError
from .fst import estimate_fst
from .geno import MarkerMatrix, PhenotypeVector
from .kinship import KinshipMatrix, mean_cross_kinship
from .loess import Z95, Loess
from .rng import stream
from .stats import LineFit, ols_line

log = logging.getLogger(__name__)

MAX_LEVELS = 30
MIN_STEP, MAX_STEP = 2, 20


@dataclass(frozen=True)
class DecayPoint:
    m_swapped: int
    replicate: int
    fst: float
    rho: float
    kbar: float | None = None


@dataclass
class DecaySamples:
    points: list[DecayPoint]
    m_step: int
    n_missing_rho: int = 0
    stop_reason: str = ""

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def swap_resample(split: PopulationSplit, m: int, seed: int | np.random.Generator = 0) -> PopulationSplit:
    """Exchange ``m`` randomly chosen members of each side of ``split``."""
    tr, ta = split.training, split.target
    if m < 0 or m > min(tr.size, ta.size):
        raise ValidationError(f"cannot swap {m} individuals between sets of size {tr.size} and {ta.size}")
    if m == 0:
        return PopulationSplit(tr, ta, split.fst0)
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "swap", m)
    out_tr = rng.choice(tr.size, size=m, replace=False)
    out_ta = rng.choice(ta.size, size=m, replace=False)
    keep_tr = np.delete(tr, out_tr)
    keep_ta = np.delete(ta, out_ta)
    return PopulationSplit(np.concatenate([keep_tr, ta[out_ta]]),
                           np.concatenate([keep_ta, tr[out_tr]]), float("nan"))


def choose_step(min_size: int, m_step: int = MIN_STEP, auto: bool = True) -> int:
    """Swap increment: at least ``m_step``, raised so <= 30 levels span the smaller side, capped at 20."""
    if not MIN_STEP <= m_step <= MAX_STEP:
        raise ValidationError(f"m_step must lie in [{MIN_STEP}, {MAX_STEP}], got {m_step}")
    if not auto:
        return m_step
    return int(min(MAX_STEP, max(m_step, math.ceil(min_size / MAX_LEVELS))))


def _hyper(tuned):
    if isinstance(tuned, en.CVResult):
        return tuned.best
    alpha, lam = tuned
    return float(alpha), float(lam)


def score_split(data: MarkerMatrix, pheno: PhenotypeVector, training, target, alpha, lam):
    """Refit on ``training`` and return the predictive correlation on ``target`` (NaN if undefined)."""
    x = data.counts
    model = en.fit(x[training], pheno.values[training], alpha, lam)
    pred = en.predict(model, x[target])
    try:
        return en.predictive_correlation(pheno.values[target], pred)
    except en.UndefinedCorrelation:
        return float("nan")


def generate_decay_points(data: MarkerMatrix, pheno: PhenotypeVector, split: PopulationSplit, tuned,
                          m_step: int = MIN_STEP, n_reps: int = 40, fst_stop: float = 0.005,
                          seed: int = 0, auto_step: bool = True, kinship: KinshipMatrix | None = None,
                          retune: dict | None = None, threads: int | None = None) -> DecaySamples:
    """Swap-resample ``split`` at increasing m and record (F_ST, rho) per replicate.

    ``tuned`` is a :class:`CVResult` or an ``(alpha, lambda)`` pair used for
    every refit. Passing ``retune`` (a dict of :func:`tune_cv` keyword
    arguments) re-tunes on each resampled training set instead. m = 0 is
    scored once; after that each level runs ``n_reps`` replicates and the loop
    ends after the first level whose mean F_ST is at most ``fst_stop``, or when
    the next level would exceed the smaller side. Replicates with constant
    predictions are dropped and counted in ``n_missing_rho``.
    """
    if n_reps < 1:
        raise ValidationError("n_reps must be >= 1")
    alpha, lam = _hyper(tuned)
    min_size = min(split.training.size, split.target.size)
    step = choose_step(min_size, m_step, auto_step)

    def run(task):
        m, rep = task
        s = split if m == 0 else swap_resample(split, m, stream(seed, "swap", m, rep))
        a, l = alpha, lam
        if retune is not None and m > 0:
            cv = en.tune_cv(data.counts[s.training], pheno.values[s.training],
                            seed=int(stream(seed, "retune", m, rep).integers(2**31)),
                            threads=1, **retune)
            a, l = cv.best
        fst = split.fst0 if (m == 0 and np.isfinite(split.fst0)) else \
            estimate_fst(data, s.training, s.target).value
        rho = score_split(data, pheno, s.training, s.target, a, l)
        kbar = mean_cross_kinship(kinship, s.training, s.target) if kinship is not None else None
        return DecayPoint(m, rep, max(0.0, fst), rho, kbar)

    points, missing = [], 0

    def absorb(results):
        nonlocal missing
        for p in results:
            if math.isnan(p.rho):
                missing += 1
            else:
                points.append(p)

    first = run((0, 0))
    absorb([first])
    if first.fst <= fst_stop:
        log.warning("F_ST at m=0 (%.4g) is already <= fst_stop (%.4g); only m=0 emitted",
                    first.fst, fst_stop)
        return DecaySamples(points, step, missing, "fst0 below fst_stop")
    reason = "m exceeded smaller subset"
    m = step
    while m <= min_size:
        level = pmap(run, [(m, rep) for rep in range(n_reps)], threads)
        absorb(level)
        mean_fst = float(np.mean([p.fst for p in level]))
        log.info("m=%d mean F_ST=%.4f", m, mean_fst)
        if mean_fst <= fst_stop:
            reason = "mean F_ST reached fst_stop"
            break
        m += step
    if missing:
        log.warning("%d replicates had constant predictions and were dropped", missing)
    return DecaySamples(points, step, missing, reason)


# ------------------------------------------------------------------ curves

def _xy(points):
    pts = list(points)
    return (np.array([p.fst for p in pts], dtype=float),
            np.array([p.rho for p in pts], dtype=float))


def loess_fit(points, span: float = 0.75, degree: int = 2) -> Loess:
    fst, rho = _xy(points)
    if fst.size < 10:
        raise InsufficientDataError(f"LOESS needs at least 10 points, got {fst.size}")
    if np.ptp(fst) == 0:
        raise InsufficientDataError("F_ST values do not span a range")
    return Loess(fst, rho, span, degree)


def linear_fit(points) -> LineFit:
    """OLS of rho on F_ST."""
    fst, rho = _xy(points)
    return ols_line(fst, rho)


def quadratic_fit(points) -> LineFit:
    """OLS of rho^2 on F_ST^2."""
    fst, rho = _xy(points)
    return ols_line(fst ** 2, rho ** 2)


@dataclass
class DecayCurve:
    points: list[DecayPoint]
    linear: LineFit
    quadratic: LineFit
    loess: Loess | None = None
    grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upper: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def r2_linear(self) -> float:
        return self.linear.r2

    @property
    def r2_quadratic(self) -> float:
        return self.quadratic.r2

    def rho_d(self, fst) -> np.ndarray:
        """LOESS estimate at ``fst`` (NaN outside the observed F_ST range)."""
        fst = np.atleast_1d(np.asarray(fst, dtype=float))
        out = np.full(fst.shape, np.nan)
        if self.loess is None:
            return out
        inside = (fst >= self.grid[0]) & (fst <= self.grid[-1])
        if inside.any():
            out[inside] = self.loess.predict(fst[inside])
        return out

    def rho_l(self, fst):
        return self.linear(fst)

    def to_dict(self) -> dict:
        d = {
            "n_points": len(self.points),
            "linear": asdict(self.linear),
            "quadratic": asdict(self.quadratic),
            "r2_linear": self.r2_linear,
            "r2_quadratic": self.r2_quadratic,
            "loess": None,
        }
        if self.loess is not None:
            d["loess"] = {
                "span": self.loess.span, "degree": self.loess.degree,
                "band": f"pointwise {Z95}-sigma (95%)",
                "sigma": self.loess.sigma,
                "grid": [{"fst": float(f), "rho": float(m), "lower": float(lo), "upper": float(hi)}
                         for f, m, lo, hi in zip(self.grid, self.mean, self.lower, self.upper)],
            }
        return d


def fit_decay_curve(points, span: float = 0.75, degree: int = 2, grid_size: int = 101) -> DecayCurve:
    """LOESS curve with 95% band over [min F_ST, max F_ST], plus linear and squared-scale fits."""
    pts = list(points)
    curve = DecayCurve(pts, linear_fit(pts), quadratic_fit(pts))
    lo = loess_fit(pts, span, degree)
    curve.loess = lo
    curve.grid = np.linspace(lo.x.min(), lo.x.max(), grid_size)
    curve.mean, curve.lower, curve.upper = lo.band(curve.grid)
    return curve


def evaluate_rho_d(curve, fst_query: float, window: float = 0.01) -> float | None:
    """Mean rho over points with ``|fst - fst_query| <= window``; None if there are none."""
    pts = curve.points if isinstance(curve, DecayCurve) else list(curve)
    if not pts:
        raise ValidationError("no decay points")
    fst, rho = _xy(pts)
    near = np.abs(fst - fst_query) <= window + 1e-12
    if not near.any():
        return None
    return float(rho[near].mean())


# --------------------------------------------------------------------- I/O

def write_points_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "replicate", "fst", "rho"])
        for p in points:
            w.writerow([p.m_swapped, p.replicate, repr(float(p.fst)), repr(float(p.rho))])


def read_points_csv(path) -> list[DecayPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [DecayPoint(int(r["m"]), int(r["replicate"]), float(r["fst"]), float(r["rho"])) for r in rows]


def curve_json(curve: DecayCurve | None, extra: dict | None = None) -> str:
    d = curve.to_dict() if curve is not None else {"loess": None, "linear": None, "quadratic": None}
    if extra:
        d.update(extra)
    return json.dumps(d, indent=2) + "\n"
