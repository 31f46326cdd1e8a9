"""Contextual classic-control environments."""

from .acrobot import AcrobotEnv, AcrobotState, acrobot_step
from .base import ActionKind, ContextualEnv, EnvSpec, StepResult, record_trajectory, write_trajectory_csv
from .lander import LanderEnv, LanderState, lander_step
from .pendulum import PendulumEnv, PendulumState, pendulum_step
from .runner import EpisodeRunner
from ..errors import InvalidArgument

ENVIRONMENTS = {
    "pendulum": PendulumEnv,
    "acrobot": AcrobotEnv,
    "lander": LanderEnv,
}

# varied feature, mean, standard deviation of the training distribution
TRAINING_DISTRIBUTIONS = {
    "pendulum": ("g", 10.0, 0.1 * 10.0),
    "acrobot": ("link_length_1", 1.0, 0.1 * 1.0),
    "lander": ("gravity_y", -10.0, 0.1 * 10.0),
}


def make_env(name: str) -> ContextualEnv:
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise InvalidArgument(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


__all__ = [
    "ActionKind", "AcrobotEnv", "AcrobotState", "ContextualEnv", "ENVIRONMENTS", "EnvSpec",
    "EpisodeRunner", "LanderEnv", "LanderState", "PendulumEnv", "PendulumState", "StepResult",
    "TRAINING_DISTRIBUTIONS", "acrobot_step", "lander_step", "make_env", "pendulum_step",
    "record_trajectory", "write_trajectory_csv",
]
