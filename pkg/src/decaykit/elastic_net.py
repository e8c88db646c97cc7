"""Elastic-net genomic prediction by cyclic coordinate descent.

The fitted objective, over internally standardised predictors (population
sd, so that ``x_j . x_j / n = 1``), is

    1/(2n) ||y - mu - X b||^2 + lam * (alpha * |b|_1 + (1 - alpha)/2 * |b|_2^2)

Coefficients are kept on the standardised scale; the model stores the
training means and sds and applies them at prediction time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ._pool import pmap
from .errors import ValidationError
from .geno import MarkerMatrix, PhenotypeVector
from .rng import stream

TOL = 1e-7
MAX_SWEEPS = 100_000
DEV_MAX = 0.999
DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(1, 11))


# ------------------------------------------------------------------ kernel

@numba.njit(cache=True, nogil=True)
def _objective(r, beta, l1, l2):
    n = r.shape[0]
    pen = 0.0
    for j in range(beta.shape[0]):
        pen += l1 * abs(beta[j]) + 0.5 * l2 * beta[j] * beta[j]
    return 0.5 * np.dot(r, r) / n + pen


@numba.njit(cache=True, nogil=True)
def _sweep(X, r, beta, xsq, l1, l2, cols, active):
    n = X.shape[0]
    dmax = 0.0
    for j in cols:
        if xsq[j] == 0.0:
            continue
        bj = beta[j]
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        g = g / n + xsq[j] * bj
        if g > l1:
            nb = (g - l1) / (xsq[j] + l2)
        elif g < -l1:
            nb = (g + l1) / (xsq[j] + l2)
        else:
            nb = 0.0
        d = nb - bj
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = nb
            if abs(d) > dmax:
                dmax = abs(d)
        if nb != 0.0:
            active[j] = True
    return dmax


@numba.njit(cache=True, nogil=True)
def _coordinate_descent(X, r, beta, xsq, l1, l2, tol, max_sweeps, history):
    """Run sweeps in place on (r, beta). Returns (n_sweeps, n_history_recorded).

    A full sweep over all coordinates alternates with sweeps restricted to the
    current nonzero set until the latter converge; the fit stops when a full
    sweep moves no coefficient by ``tol`` or more.
    """
    p = X.shape[1]
    allcols = np.arange(p)
    active = np.zeros(p, dtype=np.bool_)
    for j in range(p):
        active[j] = beta[j] != 0.0
    sweeps = 0
    nh = 0
    while sweeps < max_sweeps:
        dmax = _sweep(X, r, beta, xsq, l1, l2, allcols, active)
        sweeps += 1
        if nh < history.shape[0]:
            history[nh] = _objective(r, beta, l1, l2)
            nh += 1
        if dmax < tol:
            break
        act = np.flatnonzero(active)
        while sweeps < max_sweeps:
            dmax = _sweep(X, r, beta, xsq, l1, l2, act, active)
            sweeps += 1
            if nh < history.shape[0]:
                history[nh] = _objective(r, beta, l1, l2)
                nh += 1
            if dmax < tol:
                break
    return sweeps, nh


@numba.njit(cache=True, nogil=True)
def _path(X, yc, xsq, alpha, lambdas, tol, max_sweeps, dev_max):
    """Warm-started solutions along ``lambdas``.

    Once the training fit explains more than ``dev_max`` of the deviance the
    remaining (smaller) lambdas reuse the last solution.
    """
    n, p = X.shape
    out = np.zeros((lambdas.shape[0], p))
    beta = np.zeros(p)
    r = yc.copy()
    tss = np.dot(yc, yc)
    hist = np.zeros(0)
    saturated = False
    for k in range(lambdas.shape[0]):
        if not saturated:
            lam = lambdas[k]
            _coordinate_descent(X, r, beta, xsq, lam * alpha, lam * (1.0 - alpha), tol, max_sweeps, hist)
            saturated = tss > 0 and 1.0 - np.dot(r, r) / tss > dev_max
        out[k] = beta
    return out


# ------------------------------------------------------------------- model

@dataclass
class ElasticNetModel:
    intercept: float
    beta: np.ndarray
    alpha: float
    lam: float
    marker_ids: tuple[str, ...]
    x_mean: np.ndarray
    x_scale: np.ndarray
    n_sweeps: int = 0
    history: np.ndarray | None = field(default=None, repr=False)

    def predict(self, x_new) -> np.ndarray:
        return predict(self, x_new)

    def to_dict(self) -> dict:
        nz = np.flatnonzero(self.beta)
        return {
            "intercept": float(self.intercept),
            "alpha": float(self.alpha),
            "lambda": float(self.lam),
            "marker_ids": list(self.marker_ids),
            "coefficients": [[self.marker_ids[j], float(self.beta[j])] for j in nz],
            "standardization": {"mean": [float(v) for v in self.x_mean],
                                "sd": [float(v) for v in self.x_scale]},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ElasticNetModel":
        ids = tuple(d["marker_ids"])
        pos = {m: j for j, m in enumerate(ids)}
        beta = np.zeros(len(ids))
        for name, v in d["coefficients"]:
            beta[pos[name]] = v
        return cls(d["intercept"], beta, d["alpha"], d["lambda"], ids,
                   np.asarray(d["standardization"]["mean"], dtype=float),
                   np.asarray(d["standardization"]["sd"], dtype=float))


def _as_arrays(x, y):
    if isinstance(x, MarkerMatrix):
        ids = x.marker_ids
        x = x.counts
    else:
        x = np.asarray(x, dtype=float)
        ids = tuple(f"m{j}" for j in range(x.shape[1]))
    if np.isnan(x).any():
        raise ValidationError("genotypes must not contain missing cells")
    yv = y.values if isinstance(y, PhenotypeVector) else np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(yv)):
        raise ValidationError("phenotypes must be finite")
    if yv.shape[0] != x.shape[0]:
        raise ValidationError(f"{yv.shape[0]} phenotypes for {x.shape[0]} individuals")
    return x, yv, ids


def _standardize(x):
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)
    xs = np.asfortranarray((x - mean) / scale)
    xsq = np.where(sd > 0, (xs * xs).mean(axis=0), 0.0)
    return xs, xsq, mean, scale


def _check_penalty(alpha, lam):
    if not (0.0 <= alpha <= 1.0) or math.isnan(alpha):
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    if not lam >= 0.0 or not math.isfinite(lam):
        raise ValidationError(f"lambda must be finite and >= 0, got {lam}")


def lambda_max(x, y, alpha: float) -> float:
    """Smallest lambda at which every coefficient is zero, ``max|x_j . yc| / (n alpha)``."""
    x, yv, _ = _as_arrays(x, y)
    xs, _, _, _ = _standardize(x)
    return _lambda_max(xs, yv - yv.mean(), alpha)


def _lambda_max(xs, yc, alpha):
    return float(np.abs(xs.T @ yc).max() / (xs.shape[0] * max(alpha, 1e-3)))


def _warm_lambdas(lmax, lam, n_steps=20):
    """Log-spaced warm-start sequence ending exactly at ``lam``."""
    if lam >= lmax or lmax <= 0:
        return np.array([lam])
    lo = max(lam, lmax * 1e-3)
    seq = np.geomspace(lmax, lo, n_steps)
    return np.append(seq[seq > lam], lam)


def fit(x, y, alpha: float, lam: float, tol: float = TOL, max_sweeps: int = MAX_SWEEPS,
        record_history: int = 0) -> ElasticNetModel:
    """Fit the elastic net at a single (alpha, lambda).

    The solution is reached by warm starts along a short geometric lambda
    sequence from lambda_max, which only affects speed. With
    ``record_history > 0`` the fit runs cold from zero and the objective after
    each of the first ``record_history`` sweeps is kept on the model.
    """
    _check_penalty(alpha, lam)
    x, yv, ids = _as_arrays(x, y)
    if x.shape[0] < 2:
        raise ValidationError("need at least two individuals")
    xs, xsq, mean, scale = _standardize(x)
    ybar = float(yv.mean())
    yc = yv - ybar
    beta = np.zeros(x.shape[1])
    r = yc.copy()
    history = None
    if record_history:
        hist = np.zeros(record_history)
        sweeps, nh = _coordinate_descent(xs, r, beta, xsq, lam * alpha, lam * (1 - alpha),
                                         tol, max_sweeps, hist)
        history = hist[:nh]
    else:
        sweeps = 0
        lmax = _lambda_max(xs, yc, alpha) if alpha > 0 else np.inf
        seq = _warm_lambdas(lmax, lam) if np.isfinite(lmax) else np.array([lam])
        if alpha >= 1e-3 and lam >= lmax:
            seq = seq[:0]  # zero is optimal; skip descent so rounding cannot leave 1e-16 residues
        empty = np.zeros(0)
        for lk in seq:
            s, _ = _coordinate_descent(xs, r, beta, xsq, lk * alpha, lk * (1 - alpha),
                                       tol, max_sweeps, empty)
            sweeps += s
    return ElasticNetModel(ybar, beta, float(alpha), float(lam), tuple(ids), mean, scale,
                           n_sweeps=int(sweeps), history=history)


def predict(model: ElasticNetModel, x_new) -> np.ndarray:
    """Predicted phenotypes, standardising ``x_new`` with the model's training constants."""
    if isinstance(x_new, MarkerMatrix):
        pos = {m: j for j, m in enumerate(x_new.marker_ids)}
        absent = [m for m in model.marker_ids if m not in pos]
        if absent:
            shown = ", ".join(absent[:10]) + (" ..." if len(absent) > 10 else "")
            raise ValidationError(f"{len(absent)} model markers absent from input: {shown}")
        x = x_new.counts[:, [pos[m] for m in model.marker_ids]]
    else:
        x = np.asarray(x_new, dtype=float)
        if x.ndim != 2 or x.shape[1] != model.beta.size:
            raise ValidationError(f"expected {model.beta.size} marker columns")
    if np.isnan(x).any():
        raise ValidationError("genotypes must not contain missing cells")
    nz = np.flatnonzero(model.beta)
    if nz.size == 0:
        return np.full(x.shape[0], model.intercept)
    xs = (x[:, nz] - model.x_mean[nz]) / model.x_scale[nz]
    return model.intercept + xs @ model.beta[nz]


def objective(model: ElasticNetModel, x, y) -> float:
    x, yv, _ = _as_arrays(x, y)
    r = yv - predict(model, x)
    b = model.beta
    return float(0.5 * r @ r / len(yv)
                 + model.lam * (model.alpha * np.abs(b).sum() + 0.5 * (1 - model.alpha) * b @ b))


# --------------------------------------------------------------- accuracy

class UndefinedCorrelation(ValidationError):
    """Correlation with a constant (or too short) vector."""


def predictive_correlation(y_true, y_pred) -> float:
    """Pearson correlation between observed and predicted phenotypes."""
    a = np.asarray(y_true, dtype=float).ravel()
    b = np.asarray(y_pred, dtype=float).ravel()
    if a.size != b.size:
        raise ValidationError("inputs differ in length")
    if a.size < 3:
        raise UndefinedCorrelation("need at least 3 pairs")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    if math.sqrt(saa) <= 1e-12 * max(1.0, np.abs(a).max()) or math.sqrt(sbb) <= 1e-12 * max(1.0, np.abs(b).max()):
        raise UndefinedCorrelation("correlation undefined for a constant vector")
    # one square root of the product keeps r = +-1 exact for proportional inputs
    return float(np.clip(da @ db / math.sqrt(saa * sbb), -1.0, 1.0))


def pev(rho: float, var_y: float) -> float:
    """Prediction error variance implied by a predictive correlation."""
    if abs(rho) > 1:
        raise ValidationError(f"|rho| must be <= 1, got {rho}")
    if var_y < 0:
        raise ValidationError("var_y must be >= 0")
    return (1.0 - rho * rho) * var_y


# ------------------------------------------------------------------ tuning

@dataclass
class CVResult:
    grid: list[tuple[float, float, float]]
    best: tuple[float, float]
    n_runs: int
    n_folds: int

    @property
    def best_rho(self) -> float:
        a, l = self.best
        return next(r for aa, ll, r in self.grid if aa == a and ll == l)

    def to_dict(self) -> dict:
        return {"best": {"alpha": self.best[0], "lambda": self.best[1], "rho_cv": self.best_rho},
                "n_runs": self.n_runs, "n_folds": self.n_folds,
                "grid": [{"alpha": a, "lambda": l, "rho_cv": r} for a, l, r in self.grid]}


def _fold_rho(y_true, preds):
    out = np.zeros(preds.shape[0])
    for k, yp in enumerate(preds):
        try:
            out[k] = predictive_correlation(y_true, yp)
        except UndefinedCorrelation:
            out[k] = 0.0
    return out


def tune_cv(x, y, alpha_grid=DEFAULT_ALPHAS, n_lambda: int = 100, lambda_min_ratio: float = 1e-3,
            n_runs: int = 5, n_folds: int = 10, seed: int = 0, threads: int | None = None,
            tol: float = 1e-5) -> CVResult:
    """Choose (alpha, lambda) by repeated k-fold cross-validation.

    For each alpha the lambda path runs from lambda_max (computed on all of
    ``x``) down to ``lambda_min_ratio * lambda_max`` on a log scale. The score
    of a grid cell is the Pearson correlation between held-out predictions and
    observations, averaged over all ``n_runs * n_folds`` folds; a fold whose
    predictions are constant scores 0. Ties go to the smaller lambda, then the
    smaller alpha.
    """
    x, yv, _ = _as_arrays(x, y)
    n = x.shape[0]
    if n < n_folds or n_folds < 2:
        raise ValidationError(f"need 2 <= n_folds <= n (n={n}, n_folds={n_folds})")
    if np.ptp(yv) == 0:
        raise UndefinedCorrelation("phenotype is constant; correlation undefined")
    alphas = [float(a) for a in alpha_grid]
    for a in alphas:
        _check_penalty(a, 0.0)
    xs_all, _, _, _ = _standardize(x)
    yc_all = yv - yv.mean()
    paths = [_lambda_max(xs_all, yc_all, max(a, 0.1)) * np.geomspace(1.0, lambda_min_ratio, n_lambda)
             for a in alphas]

    tasks = []
    for run in range(n_runs):
        perm = stream(seed, "cv-folds", run).permutation(n)
        for fold in np.array_split(perm, n_folds):
            tasks.append(np.sort(fold))

    def one_fold(test):
        train = np.setdiff1d(np.arange(n), test)
        xs, xsq, mean, scale = _standardize(x[train])
        ytr = yv[train]
        xte = (x[test] - mean) / scale
        scores = np.empty((len(alphas), n_lambda))
        for ia, a in enumerate(alphas):
            betas = _path(xs, ytr - ytr.mean(), xsq, a, paths[ia], tol, MAX_SWEEPS, DEV_MAX)
            scores[ia] = _fold_rho(yv[test], ytr.mean() + betas @ xte.T)
        return scores

    total = np.zeros((len(alphas), n_lambda))
    for s in pmap(one_fold, tasks, threads):
        total += s
    mean_rho = total / len(tasks)

    grid = [(alphas[ia], float(paths[ia][k]), float(mean_rho[ia, k]))
            for ia in range(len(alphas)) for k in range(n_lambda)]
    best = max(grid, key=lambda g: (g[2], -g[1], -g[0]))
    return CVResult(grid, (best[0], best[1]), n_runs, n_folds)
