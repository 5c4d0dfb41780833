"""Configuration, experiment runners and result tables."""

from .config import ExperimentConfig, config_from_dict, load_config, save_config
from .experiments import (
    HARVEST_COLUMNS, HARVEST_PATTERN_COLUMNS, LOS_COLUMNS, PROTOCOL_COLUMNS, SE_COLUMNS,
    SECRECY_COLUMNS, exp_harvest, exp_harvest_tables, exp_los, exp_protocol,
    exp_protocol_outputs, exp_se, exp_secrecy, run_experiment,
)
from .results import ExperimentResult

__all__ = [
    "ExperimentConfig", "config_from_dict", "load_config", "save_config",
    "HARVEST_COLUMNS", "HARVEST_PATTERN_COLUMNS", "LOS_COLUMNS", "PROTOCOL_COLUMNS",
    "SE_COLUMNS", "SECRECY_COLUMNS", "exp_harvest", "exp_harvest_tables", "exp_los",
    "exp_protocol", "exp_protocol_outputs", "exp_se", "exp_secrecy", "run_experiment",
    "ExperimentResult",
]
