from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..context import Context, ContextFeature
from ..errors import InvalidArgument


class ActionKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class EnvSpec:
    name: str
    base_obs_dim: int
    action_kind: ActionKind
    action_dim_or_count: int
    horizon: int
    feature_list: tuple[ContextFeature, ...]

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidArgument("horizon must be >= 1")
        names = [f.name for f in self.feature_list]
        if len(set(names)) != len(names):
            raise InvalidArgument(f"duplicate context features in {self.name}")

    def feature(self, name: str) -> ContextFeature:
        for f in self.feature_list:
            if f.name == name:
                return f
        raise InvalidArgument(f"{self.name} has no context feature {name!r}")

    def default_params(self) -> dict[str, float]:
        return {f.name: f.default_value for f in self.feature_list}


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


@dataclass(frozen=True)
class EnvState:
    """Base for the per-environment immutable physical state."""

    steps: int

    def as_vector(self) -> list[float]:
        return [float(getattr(self, f.name)) for f in fields(self) if f.name != "steps"]

    @classmethod
    def component_names(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "steps"]


class ContextualEnv:
    """An environment whose physics constants come from a :class:`Context`.

    Subclasses provide ``spec``, ``_initial_state``, ``_transition`` and
    ``_observe``. ``reset`` returns the base observation; appending context
    features is left to the caller.
    """

    spec: EnvSpec
    solved_return: float | None = None

    def __init__(self):
        self.params: dict[str, float] = self.spec.default_params()
        self.state: Any = None

    def configure(self, instance: Context) -> None:
        instance.validate(self.spec.feature_list)
        params = self.spec.default_params()
        for name, value in instance.assignments.items():
            if not self.spec.feature(name).admits(value):
                raise InvalidArgument(f"{name}={value} is outside the physical range")
            params[name] = value
        self.params = params

    def reset(self, instance: Context, seed: int | None = None) -> np.ndarray:
        self.configure(instance)
        rng = np.random.default_rng(seed)
        self.state = self._initial_state(rng)
        return self._observe(self.state)

    def step(self, action) -> StepResult:
        if self.state is None:
            raise InvalidArgument("step() called before reset()")
        self.state, result = self._transition(self.state, action, self.params)
        return result

    def observe(self) -> np.ndarray:
        return self._observe(self.state)

    def set_state(self, state) -> np.ndarray:
        self.state = state
        return self._observe(state)

    # subclass hooks
    def _initial_state(self, rng: np.random.Generator):
        raise NotImplementedError

    def _transition(self, state, action, params):
        raise NotImplementedError

    def _observe(self, state) -> np.ndarray:
        raise NotImplementedError


def check_discrete_action(action, count: int) -> int:
    try:
        a = int(action)
    except (TypeError, ValueError):
        raise InvalidArgument(f"action {action!r} is not an integer") from None
    if a != action or not 0 <= a < count:
        raise InvalidArgument(f"action {action!r} outside {{0..{count - 1}}}")
    return a


def check_finite(value: float, what: str) -> float:
    value = float(np.asarray(value).reshape(-1)[0])
    if not math.isfinite(value):
        raise InvalidArgument(f"{what} must be finite, got {value}")
    return value


def record_trajectory(
    env: ContextualEnv, instance: Context, seed: int, actions: Sequence
) -> list[dict]:
    """Run ``actions`` from a fresh reset and log every step.

    Stops early if the episode ends before the action list does.
    """
    env.reset(instance, seed)
    names = type(env.state).component_names()
    rows = []
    for i, action in enumerate(actions):
        res = env.step(action)
        row = {"step": i}
        row.update(zip(names, env.state.as_vector()))
        row.update(
            action=action,
            reward=res.reward,
            terminated=int(res.terminated),
            truncated=int(res.truncated),
        )
        rows.append(row)
        if res.terminated or res.truncated:
            break
    return rows


def write_trajectory_csv(rows: list[dict], path: str | Path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
