from __future__ import annotations

import numpy as np

from ..context import InstanceSet, VisibilityMode, augment_observation
from .base import ContextualEnv


class EpisodeRunner:
    """Drives one environment across episodes of an instance set.

    Contexts are presented round-robin (one per episode) unless
    ``presentation="random"``. Observations handed out are already
    augmented according to ``visibility``. Episode returns are
    accumulated so callers can ask for per-interval scores.
    """

    def __init__(
        self,
        env: ContextualEnv,
        instances: InstanceSet,
        visibility: VisibilityMode | str = VisibilityMode.HIDDEN,
        seed: int = 0,
        presentation: str = "round_robin",
        normalize_context: bool = False,
    ):
        if presentation not in ("round_robin", "random"):
            raise ValueError(f"unknown presentation {presentation!r}")
        self.env = env
        self.instances = instances
        self.visibility = VisibilityMode.parse(visibility)
        self.presentation = presentation
        self.normalize_context = normalize_context
        self.rng = np.random.default_rng(seed)
        self.episode = 0
        self.episode_return = 0.0
        self.episode_length = 0
        self.completed: list[float] = []
        self.total_steps = 0
        self.obs = self._reset()

    @property
    def obs_dim(self) -> int:
        return int(self.obs.shape[0])

    def _augment(self, obs):
        return augment_observation(
            obs, self.context, self.visibility, self.env.spec.feature_list, self.normalize_context
        )

    def _reset(self) -> np.ndarray:
        if self.presentation == "round_robin":
            self.context = self.instances.round_robin(self.episode)
        else:
            self.context = self.instances.sample(self.rng)
        seed = int(self.rng.integers(2**31))
        self.episode_return = 0.0
        self.episode_length = 0
        return self._augment(self.env.reset(self.context, seed))

    def step(self, action):
        """Advance one step.

        Returns ``(next_obs, reward, terminated, truncated)`` where
        ``next_obs`` is the observation reached by this step (before any
        automatic reset). ``self.obs`` then holds the observation to act
        on next.
        """
        res = self.env.step(action)
        next_obs = self._augment(res.obs)
        self.total_steps += 1
        self.episode_return += res.reward
        self.episode_length += 1
        if res.terminated or res.truncated:
            self.completed.append(self.episode_return)
            self.episode += 1
            self.obs = self._reset()
        else:
            self.obs = next_obs
        return next_obs, res.reward, res.terminated, res.truncated

    def pop_interval_score(self) -> float:
        """Mean return of episodes finished since the last call.

        Falls back to the running episode's partial return when no episode
        finished in the interval.
        """
        if self.completed:
            score = float(np.mean(self.completed))
        else:
            score = float(self.episode_return)
        self.completed = []
        return score
