"""Bayesian adaptive monitoring of longitudinal steroid profiles."""

from ._core import (
    ConfigError,
    Error,
    NormalGamma,
    classify,
    evaluate,
    fit,
    hpd_interval,
    metrics,
    pr_auc,
    random_oversample,
    resolve_config,
    roc_auc,
    run,
    simulate,
)

__all__ = [
    "ConfigError",
    "Error",
    "NormalGamma",
    "classify",
    "evaluate",
    "fit",
    "hpd_interval",
    "metrics",
    "pr_auc",
    "random_oversample",
    "resolve_config",
    "roc_auc",
    "run",
    "simulate",
]
