from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping

from ..agents import HYPER_TYPES
from ..context import VisibilityMode
from ..envs import ENVIRONMENTS
from ..envs.base import ActionKind
from ..errors import InvalidConfiguration

DEFAULT_ALGORITHM = {"pendulum": "ddpg", "acrobot": "ppo", "lander": "ppo"}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a training run.

    ``steps`` is the budget for the whole population; each member trains
    ``steps // workers`` environment steps.
    """

    env: str = "pendulum"
    algorithm: str | None = None
    visibility: VisibilityMode = VisibilityMode.HIDDEN
    workers: int = 8
    interval: int = 4096
    steps: int = 8 * 4096 * 10
    seed: int = 0
    hidden_width: int = 64
    outdir: str = "runs/default"
    n_instances: int = 100
    quantile: float = 0.25
    initial: Mapping[str, float] = field(default_factory=dict)
    synchronous: bool = True
    n_jobs: int = 1
    record_wallclock: bool = False
    presentation: str = "round_robin"
    time_budget_s: float | None = None

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise InvalidConfiguration(f"unknown environment {self.env!r}")
        algo = self.algorithm or DEFAULT_ALGORITHM[self.env]
        object.__setattr__(self, "algorithm", algo)
        if algo not in HYPER_TYPES:
            raise InvalidConfiguration(f"unknown algorithm {algo!r}")
        continuous = ENVIRONMENTS[self.env].spec.action_kind is ActionKind.CONTINUOUS
        if continuous != (algo == "ddpg"):
            raise InvalidConfiguration(f"{algo} cannot drive {self.env}: ddpg pairs with continuous actions only")
        try:
            object.__setattr__(self, "visibility", VisibilityMode.parse(self.visibility))
        except ValueError as exc:
            raise InvalidConfiguration(str(exc)) from None
        object.__setattr__(self, "initial", dict(self.initial))
        if self.workers < 2:
            raise InvalidConfiguration("need at least 2 workers")
        if self.hidden_width < 1 or self.interval < 1 or self.steps < 0 or self.n_instances < 1:
            raise InvalidConfiguration("width, interval and instance count must be positive; steps >= 0")
        if self.presentation not in ("round_robin", "random"):
            raise InvalidConfiguration(f"unknown presentation {self.presentation!r}")

    @property
    def steps_per_member(self) -> int:
        return self.steps // self.workers

    @property
    def hidden(self) -> tuple[int, int]:
        return (self.hidden_width, self.hidden_width)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_json(self) -> dict:
        d = asdict(self)
        d["visibility"] = self.visibility.value
        return d

    @classmethod
    def from_json(cls, data: Mapping) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})
