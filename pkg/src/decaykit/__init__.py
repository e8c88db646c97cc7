"""Decay of genomic-prediction accuracy with genetic distance."""
from .clustering import PopulationSplit, kmeans_split, rebalance_split
from .decay import (DecayCurve, DecayPoint, evaluate_rho_d, fit_decay_curve, generate_decay_points,
                    linear_fit, loess_fit, quadratic_fit, swap_resample)
from .elastic_net import ElasticNetModel, fit, lambda_max, pev, predict, predictive_correlation, tune_cv
from .errors import DecayKitError, InsufficientDataError, ParseError, ValidationError
from .fst import FstEstimate, estimate_fst
from .geno import MarkerMatrix, PhenotypeVector, QCReport, load_dataset, qc_pipeline, standardize
from .holdout import holdout_cv
from .kinship import KinshipMatrix, allelic_kinship, mean_cross_kinship

__version__ = "0.1.0"

__all__ = [
    "DecayCurve", "DecayKitError", "DecayPoint", "ElasticNetModel", "FstEstimate", "InsufficientDataError",
    "KinshipMatrix", "MarkerMatrix", "ParseError", "PhenotypeVector", "PopulationSplit", "QCReport",
    "ValidationError", "allelic_kinship", "estimate_fst", "evaluate_rho_d", "fit", "fit_decay_curve",
    "generate_decay_points", "holdout_cv", "kmeans_split", "lambda_max", "linear_fit", "load_dataset",
    "loess_fit", "mean_cross_kinship", "pev", "predict", "predictive_correlation", "qc_pipeline",
    "quadratic_fit", "rebalance_split", "standardize", "swap_resample", "tune_cv",
]
