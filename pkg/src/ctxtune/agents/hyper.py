"""Tunable hyperparameters of the two agents and their allowed ranges."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Mapping

from ..errors import InvalidArgument

LR_BOUNDS = (1e-5, 0.02)
GAMMA_BOUNDS = (0.8, 0.999)


class _Hyper:
    BOUNDS: ClassVar[dict[str, tuple[float, float]]]

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            object.__setattr__(self, f.name, value)
            lo, hi = self.BOUNDS[f.name]
            if not (math.isfinite(value) and lo <= value <= hi):
                raise InvalidArgument(f"{f.name}={value} outside [{lo}, {hi}]")

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, float]):
        names = [f.name for f in fields(cls)]
        extra = set(values) - set(names)
        if extra:
            raise InvalidArgument(f"unknown hyperparameters {sorted(extra)} for {cls.__name__}")
        return cls(**{k: values[k] for k in names if k in values})

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class HyperDDPG(_Hyper):
    learning_rate: float = 3e-5
    gamma: float = 0.99
    tau: float = 0.005

    BOUNDS: ClassVar = {
        "learning_rate": LR_BOUNDS,
        "gamma": GAMMA_BOUNDS,
        "tau": (0.0, 0.99),
    }


@dataclass(frozen=True)
class HyperPPO(_Hyper):
    learning_rate: float = 3e-5
    gamma: float = 0.99
    ent_coef: float = 0.0
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    gae_lambda: float = 0.95

    BOUNDS: ClassVar = {
        "learning_rate": LR_BOUNDS,
        "gamma": GAMMA_BOUNDS,
        "ent_coef": (0.0, 0.5),
        "vf_coef": (0.0, 1.0),
        "max_grad_norm": (0.0, 1.0),
        "gae_lambda": (0.8, 0.999),
    }
