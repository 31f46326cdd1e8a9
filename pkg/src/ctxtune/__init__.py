"""Contextual RL training with population-based bandit hyperparameter schedules."""

__version__ = "0.1.0"
