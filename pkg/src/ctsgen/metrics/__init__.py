"""Fidelity, coherence and controllability measures."""

from .distances import acd, autocorrelation, cfid, dtw, ed, frechet_gaussian
from .ecod import EcodModel, ecod_fit, ecod_flag, ecod_score
from .report import EXTRAPOLATION, INTERPOLATION, REPORT_SCHEMA, EvalReport, validate_report
from .rocket import RocketModel, rocket_fit, rocket_predict
from .scores import accuracy, auc, weighted_f1

__all__ = [
    "acd", "autocorrelation", "cfid", "dtw", "ed", "frechet_gaussian",
    "EcodModel", "ecod_fit", "ecod_flag", "ecod_score",
    "EXTRAPOLATION", "INTERPOLATION", "REPORT_SCHEMA", "EvalReport", "validate_report",
    "RocketModel", "rocket_fit", "rocket_predict",
    "accuracy", "auc", "weighted_f1",
]
