"""Configuration, experiment runners and the command line interface."""

from ricci_smoothing.harness.config import ConfigError, ExperimentConfig, load_config, validate
from ricci_smoothing.harness.experiments import (
    InvariantViolation,
    RegressionBaseline,
    RuntimeStop,
    calibrate,
    check_hypotheses,
    run_experiment,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "InvariantViolation",
    "RegressionBaseline",
    "RuntimeStop",
    "calibrate",
    "check_hypotheses",
    "load_config",
    "run_experiment",
    "validate",
]
