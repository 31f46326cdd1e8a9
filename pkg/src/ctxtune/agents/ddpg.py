"""Deep deterministic policy gradient for continuous-action environments."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from ..nn import DEFAULT_HIDDEN, AdamState, Mlp, adam_step
from .base import Agent, soft_update
from .buffers import ReplayBuffer
from .hyper import HyperDDPG

BATCH_SIZE = 128
NOISE_SCALE = 0.1


class DDPGAgent(Agent):
    algo = "ddpg"
    hyper_cls = HyperDDPG

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        action_high: float,
        hp: HyperDDPG | None = None,
        hidden=DEFAULT_HIDDEN,
        activation: str = "tanh",
        seed: int = 0,
        buffer_size: int = 100_000,
        batch_size: int = BATCH_SIZE,
        learning_starts: int = 100,
        noise_scale: float = NOISE_SCALE,
    ):
        super().__init__(hp if hp is not None else HyperDDPG())
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.action_high = float(action_high)
        self.batch_size = batch_size
        self.learning_starts = learning_starts
        self.noise_scale = noise_scale
        seeds = np.random.SeedSequence(seed).spawn(4)
        self.actor = Mlp([obs_dim, *hidden, action_dim], activation, "tanh", np.random.default_rng(seeds[0]))
        self.critic = Mlp([obs_dim + action_dim, *hidden, 1], activation, "identity", np.random.default_rng(seeds[1]))
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = AdamState.create(self.actor.params)
        self.critic_opt = AdamState.create(self.critic.params)
        self.buffer = ReplayBuffer(buffer_size, obs_dim, action_dim, seed=int(seeds[2].generate_state(1)[0]))
        self.rng = np.random.default_rng(seeds[3])
        self.num_timesteps = 0

    def _networks(self):
        return [self.actor, self.critic, self.actor_target, self.critic_target]

    def _optimizers(self):
        return [self.actor_opt, self.critic_opt]

    def act(self, obs, noise_scale: float | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
        """Actor action in environment units plus clipped Gaussian exploration noise."""
        noise_scale = self.noise_scale if noise_scale is None else noise_scale
        rng = self.rng if rng is None else rng
        action = self.action_high * self.actor.forward(obs)
        if noise_scale > 0:
            action = action + noise_scale * self.action_high * rng.standard_normal(action.shape)
        return np.clip(action, -self.action_high, self.action_high)

    def predict(self, obs):
        return self.act(obs, noise_scale=0.0)

    def critic_targets(self, batch, gamma: float) -> np.ndarray:
        next_actions = self.actor_target.forward(batch["next_obs"])
        q_next = self.critic_target.forward(np.hstack([batch["next_obs"], next_actions]))[:, 0]
        return batch["rewards"] + gamma * (1.0 - batch["dones"]) * q_next

    def update(self, batch, hp: HyperDDPG | None = None) -> dict:
        """One critic step, one actor step, then Polyak-average both targets.

        Actions in ``batch`` are in the actor's normalized [-1, 1] units.
        """
        hp = self._hp if hp is None else hp
        n = len(batch["rewards"])
        if n == 0:
            raise InvalidArgument("empty batch")
        obs = batch["obs"]
        y = self.critic_targets(batch, hp.gamma)

        q, cache = self.critic.forward_cached(np.hstack([obs, batch["actions"]]))
        err = q[:, 0] - y
        critic_loss = float(np.mean(err**2))
        g = self.critic.backward(cache, (2.0 / n) * err[:, None])
        adam_step(self.critic_opt, self.critic.params, g, hp.learning_rate)

        pi, acache = self.actor.forward_cached(obs)
        q_pi, ccache = self.critic.forward_cached(np.hstack([obs, pi]))
        actor_loss = -float(np.mean(q_pi))
        dq = self.critic.backward(ccache, np.full((n, 1), -1.0 / n), input_grad=True, param_grads=False)
        ga = self.actor.backward(acache, dq.input_grad[:, self.obs_dim:])
        adam_step(self.actor_opt, self.actor.params, ga, hp.learning_rate)

        soft_update(self.critic.params, self.critic_target.params, hp.tau)
        soft_update(self.actor.params, self.actor_target.params, hp.tau)
        return {"critic_loss": critic_loss, "actor_loss": actor_loss, "target_mean": float(np.mean(y))}

    def learn(self, runner, n_steps: int) -> dict:
        diag: dict = {}
        for _ in range(n_steps):
            obs = runner.obs
            if self.num_timesteps < self.learning_starts:
                action = self.rng.uniform(-self.action_high, self.action_high, size=self.action_dim)
            else:
                action = self.act(obs)
            next_obs, reward, terminated, _ = runner.step(action)
            self.buffer.add(obs, action / self.action_high, reward, next_obs, float(terminated))
            self.num_timesteps += 1
            if self.num_timesteps > self.learning_starts and len(self.buffer) >= self.batch_size:
                diag = self.update(self.buffer.sample(self.batch_size))
        return diag
