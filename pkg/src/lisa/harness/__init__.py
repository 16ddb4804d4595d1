"""Experiment harness: configuration, data preparation, sweeps and outputs."""

from .config import ExperimentConfig, apply_overrides, dump_config, from_dict, load_config, resolve
from .data import (Dataset, Standardizer, fit_standardizer, ingest_csv, prepare_data, select_starts,
                   standardize, synthetic_load)
from .experiment import (SweepResult, run_context_sweep, run_temperature_sweep, train_models,
                         write_sweep)

__all__ = [
    "Dataset", "ExperimentConfig", "Standardizer", "SweepResult", "apply_overrides", "dump_config",
    "fit_standardizer", "from_dict", "ingest_csv", "load_config", "prepare_data", "resolve",
    "run_context_sweep", "run_temperature_sweep", "select_starts", "standardize",
    "synthetic_load", "train_models", "write_sweep",
]
