"""Orchestration, configuration, synthetic data and evaluation."""

from .config import PipelineConfig, load_config, parse_config
from .evaluation import EvalReport, evaluate
from .runner import EmptyInput, StageError, run_pipeline
from .synthetic import SyntheticHomeSpec, generate_synthetic_log, ground_truth, three_room_home, two_cluster_corpus
