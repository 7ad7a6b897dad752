"""Experiment configuration, replicated execution and result persistence."""

from .config import ExperimentConfig, TruthConfig, load_config, parse_seed_list, validate
from .experiment import ResultSet, SlopeFit, run_experiment, run_seed, summarize_regret
from .results import emit_results, read_trace_csv, summarize_dir, summary_schema

__all__ = [
    "ExperimentConfig", "TruthConfig", "load_config", "parse_seed_list", "validate",
    "ResultSet", "SlopeFit", "run_experiment", "run_seed", "summarize_regret",
    "emit_results", "read_trace_csv", "summarize_dir", "summary_schema",
]
