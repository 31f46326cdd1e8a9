"""DDPG and PPO agents with live-settable hyperparameters."""

from ..envs.base import ActionKind, EnvSpec
from ..errors import InvalidConfiguration
from ..nn import DEFAULT_HIDDEN
from .base import Agent, Checkpoint, soft_update
from .buffers import ReplayBuffer, RolloutBuffer
from .ddpg import DDPGAgent
from .gae import compute_gae
from .hyper import HyperDDPG, HyperPPO
from .ppo import PPOAgent

HYPER_TYPES = {"ddpg": HyperDDPG, "ppo": HyperPPO}


def make_agent(algo: str, spec: EnvSpec, obs_dim: int, hp=None, hidden=DEFAULT_HIDDEN, seed: int = 0, **kwargs) -> Agent:
    """Build an agent for ``spec``; the algorithm must fit its action space."""
    if algo == "ddpg":
        if spec.action_kind is not ActionKind.CONTINUOUS:
            raise InvalidConfiguration(f"ddpg needs a continuous action space; {spec.name} is discrete")
        from ..envs import ENVIRONMENTS

        high = ENVIRONMENTS[spec.name].action_high
        return DDPGAgent(obs_dim, spec.action_dim_or_count, high, hp, hidden=hidden, seed=seed, **kwargs)
    if algo == "ppo":
        if spec.action_kind is not ActionKind.DISCRETE:
            raise InvalidConfiguration(f"ppo here supports discrete actions only; {spec.name} is continuous")
        return PPOAgent(obs_dim, spec.action_dim_or_count, hp, hidden=hidden, seed=seed, **kwargs)
    raise InvalidConfiguration(f"unknown algorithm {algo!r}")


__all__ = [
    "Agent", "Checkpoint", "DDPGAgent", "HYPER_TYPES", "HyperDDPG", "HyperPPO", "PPOAgent",
    "ReplayBuffer", "RolloutBuffer", "compute_gae", "make_agent", "soft_update",
]
