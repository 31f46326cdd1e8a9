"""Contexts: physics-parameter assignments that select one MDP instance.

An environment declares a list of :class:`ContextFeature` objects. A
:class:`Context` assigns values to some of them (in practice a single
varied feature), and an :class:`InstanceSet` is a seeded collection of
contexts drawn from a Gaussian around the feature's default.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument, ParseError

DEFAULT_INSTANCE_COUNT = 100
# Hard cap on rejection-resampling rounds before giving up.
_MAX_RESAMPLE_ROUNDS = 10_000


class VisibilityMode(str, enum.Enum):
    HIDDEN = "hidden"
    VISIBLE = "visible"

    @classmethod
    def parse(cls, value: "str | VisibilityMode") -> "VisibilityMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgument(f"unknown visibility mode {value!r}") from None


@dataclass(frozen=True)
class ContextFeature:
    """A named physical parameter of an environment.

    ``lower``/``upper`` are exclusive physical bounds (None = unbounded);
    Gaussian draws outside them are rejected and redrawn.
    """

    name: str
    default_value: float
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.default_value):
            raise InvalidArgument(f"default of {self.name!r} must be finite")
        if not self.admits(self.default_value):
            raise InvalidArgument(f"default of {self.name!r} violates its own bounds")

    def admits(self, value: float) -> bool:
        if not math.isfinite(value):
            return False
        if self.lower is not None and value <= self.lower:
            return False
        if self.upper is not None and value >= self.upper:
            return False
        return True


@dataclass(frozen=True)
class Context:
    """Mapping from feature name to value. Immutable."""

    assignments: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        values = {str(k): float(v) for k, v in dict(self.assignments).items()}
        for name, value in values.items():
            if not math.isfinite(value):
                raise InvalidArgument(f"context value for {name!r} is not finite")
        object.__setattr__(self, "assignments", MappingProxyType(values))

    def __getitem__(self, name: str) -> float:
        return self.assignments[name]

    def __contains__(self, name: object) -> bool:
        return name in self.assignments

    def __len__(self) -> int:
        return len(self.assignments)

    def names(self) -> tuple[str, ...]:
        return tuple(self.assignments)

    def validate(self, features: Sequence[ContextFeature]) -> None:
        """Raise InvalidArgument if any assigned feature is unknown."""
        known = {f.name for f in features}
        unknown = [n for n in self.assignments if n not in known]
        if unknown:
            raise InvalidArgument(
                f"unknown context feature(s) {unknown}; expected a subset of {sorted(known)}"
            )

    def to_dict(self) -> dict[str, float]:
        return dict(self.assignments)


@dataclass(frozen=True)
class InstanceSet:
    contexts: tuple[Context, ...]
    seed: int
    feature: ContextFeature
    mu: float
    sigma: float

    def __len__(self) -> int:
        return len(self.contexts)

    def __getitem__(self, index: int) -> Context:
        return self.contexts[index]

    def __iter__(self):
        return iter(self.contexts)

    @property
    def values(self) -> np.ndarray:
        return np.array([c[self.feature.name] for c in self.contexts])

    def round_robin(self, episode: int) -> Context:
        """Context for the given episode index, cycling in fixed order."""
        return self.contexts[episode % len(self.contexts)]

    def sample(self, rng: np.random.Generator) -> Context:
        """Context drawn uniformly at random from the set."""
        return self.contexts[int(rng.integers(len(self.contexts)))]

    def to_json(self) -> dict:
        f = self.feature
        return {
            "feature": f.name,
            "default_value": f.default_value,
            "lower": f.lower,
            "upper": f.upper,
            "mu": self.mu,
            "sigma": self.sigma,
            "seed": self.seed,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "InstanceSet":
        try:
            feature = ContextFeature(
                data["feature"],
                float(data.get("default_value", data["mu"])),
                data.get("lower"),
                data.get("upper"),
            )
            contexts = tuple(Context({feature.name: float(v)}) for v in data["values"])
            return cls(contexts, int(data["seed"]), feature, float(data["mu"]), float(data["sigma"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed instance set: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "InstanceSet":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), exc.lineno) from exc
        return cls.from_json(data)


def sample_instance_set(
    feature: ContextFeature,
    mu: float,
    sigma: float,
    n: int = DEFAULT_INSTANCE_COUNT,
    seed: int = 0,
) -> InstanceSet:
    """Draw ``n`` contexts with ``feature ~ Normal(mu, sigma)``.

    Non-physical draws are redrawn in place, in index order, from the same
    generator, so the result is a pure function of the arguments.
    """
    if not (sigma >= 0) or not math.isfinite(sigma):
        raise InvalidArgument(f"sigma must be a finite value >= 0, got {sigma}")
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if not math.isfinite(mu):
        raise InvalidArgument("mu must be finite")
    rng = np.random.default_rng(seed)
    values = rng.normal(mu, sigma, size=n)
    for i in range(n):
        rounds = 0
        while not feature.admits(float(values[i])):
            rounds += 1
            if rounds > _MAX_RESAMPLE_ROUNDS:
                raise InvalidArgument(
                    f"Normal({mu}, {sigma}) almost never satisfies the bounds of {feature.name!r}"
                )
            values[i] = rng.normal(mu, sigma)
    contexts = tuple(Context({feature.name: float(v)}) for v in values)
    return InstanceSet(contexts, int(seed), feature, float(mu), float(sigma))


def varied_feature_order(ctx: Context, features: Iterable[ContextFeature] | None) -> list[str]:
    if features is None:
        return list(ctx.names())
    return [f.name for f in features if f.name in ctx]


def augment_observation(
    obs: np.ndarray,
    ctx: Context,
    mode: VisibilityMode | str,
    features: Sequence[ContextFeature] | None = None,
    normalize: bool = False,
) -> np.ndarray:
    """Append the context's varied feature values to ``obs`` when visible.

    Values are appended in the environment's feature-list order when
    ``features`` is given (otherwise in the context's own order). With
    ``normalize`` each value is divided by the magnitude of its default.
    """
    mode = VisibilityMode.parse(mode)
    obs = np.asarray(obs, dtype=np.float64)
    if mode is VisibilityMode.HIDDEN:
        return obs
    names = varied_feature_order(ctx, features)
    extra = np.array([ctx[n] for n in names], dtype=np.float64)
    if normalize:
        if features is None:
            raise InvalidArgument("normalization needs the environment's feature list")
        defaults = {f.name: f.default_value for f in features}
        scale = np.array([abs(defaults[n]) or 1.0 for n in names])
        extra = extra / scale
    return np.concatenate([obs, extra])
