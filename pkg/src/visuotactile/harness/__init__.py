"""Experiment harness: configs, runs over seeds, reports, comparison tables and the CLI."""

from .config import MODES, MULTI_MODES, SINGLE_MODES, TARGETS, ExperimentConfig, UsageError
from .config import build_config, config_from_dict, parse_config_text
from .experiment import (check_compatible, evaluate_checkpoints, evaluate_models, load_data, load_model,
                         run_experiment, select_only)
from .tables import LAYOUTS, comparison_table, load_metrics, table_csv_rows
