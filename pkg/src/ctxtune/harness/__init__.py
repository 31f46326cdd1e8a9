"""Run orchestration: training, schedule replay, evaluation, plotting."""

from .config import RunConfig
from .evaluation import EvalReport, EvalResult, evaluate, replay_schedule
from .plotting import emit_plot, read_metrics
from .training import build_instance_set, run_training, train

__all__ = [
    "EvalReport", "EvalResult", "RunConfig", "build_instance_set", "emit_plot", "evaluate",
    "read_metrics", "replay_schedule", "run_training", "train",
]
