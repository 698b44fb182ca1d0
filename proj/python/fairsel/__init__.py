"""Fairness metrics, cross-validated experiments and metric clustering."""

from ._fairsel import (
    ConfigError,
    DataError,
    agglomerate,
    analyze,
    classification_metrics,
    dataset_metrics,
    fit_predict_logistic,
    generalized_entropy_index,
    metric_catalog,
    reweigh,
    run_experiment,
    smoothed_edf,
    spearman,
    theil_index,
)

__all__ = [
    "ConfigError",
    "DataError",
    "agglomerate",
    "analyze",
    "classification_metrics",
    "dataset_metrics",
    "fit_predict_logistic",
    "generalized_entropy_index",
    "metric_catalog",
    "reweigh",
    "run_experiment",
    "smoothed_edf",
    "spearman",
    "theil_index",
]
