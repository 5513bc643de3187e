"""Configuration, stage orchestration, reports and the ``dnsptl`` CLI."""

from ..recnn import load_model, save_model
from .config import ExperimentConfig, defaults, load_config, parse_config
from .experiment import STAGES, run_experiment
from .report import COLUMNS, ResultRow, emit_report

__all__ = [
    "COLUMNS", "STAGES", "ExperimentConfig", "ResultRow", "defaults", "emit_report", "load_config",
    "load_model", "parse_config", "run_experiment", "save_model",
]
