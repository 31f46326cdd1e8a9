"""Proximal policy optimization with a categorical policy.

Policy and value functions are separate networks sharing one Adam state;
the gradient-norm clip acts on the concatenation of both gradient sets.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from ..nn import DEFAULT_HIDDEN, AdamState, GradBundle, Mlp, adam_step, clip_global_norm
from .base import Agent
from .buffers import RolloutBuffer
from .gae import compute_gae
from .hyper import HyperPPO

CLIP_RANGE = 0.2
N_STEPS = 2048
MINIBATCH = 64
N_EPOCHS = 10
ADV_EPS = 1e-8


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class PPOAgent(Agent):
    algo = "ppo"
    hyper_cls = HyperPPO

    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        hp: HyperPPO | None = None,
        hidden=DEFAULT_HIDDEN,
        activation: str = "tanh",
        seed: int = 0,
        n_steps: int = N_STEPS,
        batch_size: int = MINIBATCH,
        n_epochs: int = N_EPOCHS,
        clip_range: float = CLIP_RANGE,
        normalize_advantage: bool = True,
    ):
        super().__init__(hp if hp is not None else HyperPPO())
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.clip_range = clip_range
        self.normalize_advantage = normalize_advantage
        seeds = np.random.SeedSequence(seed).spawn(3)
        self.policy = Mlp([obs_dim, *hidden, n_actions], activation, "identity", np.random.default_rng(seeds[0]), out_scale=0.01)
        self.value = Mlp([obs_dim, *hidden, 1], activation, "identity", np.random.default_rng(seeds[1]))
        self.opt = AdamState.create(self.policy.params + self.value.params, eps=1e-5)
        self.rng = np.random.default_rng(seeds[2])
        self.rollout = RolloutBuffer(n_steps, obs_dim)
        self.num_timesteps = 0
        self.last_diagnostics: dict = {}

    def _networks(self):
        return [self.policy, self.value]

    def _optimizers(self):
        return [self.opt]

    def _after_load(self):
        # data collected under the replaced weights no longer matches them
        self.rollout.clear()

    def act(self, obs, deterministic: bool = False):
        """Return ``(action, log_prob, value)`` for a single observation."""
        logp = log_softmax(self.policy.forward(obs))
        if deterministic:
            action = int(np.argmax(logp))
        else:
            p = np.exp(logp)
            action = int(np.searchsorted(np.cumsum(p), self.rng.random() * p.sum()))
            action = min(action, self.n_actions - 1)
        value = float(self.value.forward(obs)[0])
        return action, float(logp[action]), value

    def predict(self, obs):
        return self.act(obs, deterministic=True)[0]

    def minibatch_loss(self, obs, actions, old_log_probs, advantages, returns, hp: HyperPPO | None = None):
        """Clipped-surrogate objective plus weighted value loss minus weighted entropy.

        Returns ``(loss, parts, grads)`` where ``grads`` covers policy then
        value parameters.
        """
        hp = self._hp if hp is None else hp
        n = len(actions)
        actions = np.asarray(actions, dtype=np.int64)
        logits, pcache = self.policy.forward_cached(obs)
        logp_all = log_softmax(logits)
        probs = np.exp(logp_all)
        logp = logp_all[np.arange(n), actions]
        ratio = np.exp(logp - old_log_probs)
        clipped = np.clip(ratio, 1.0 - self.clip_range, 1.0 + self.clip_range)
        surr1 = ratio * advantages
        surr2 = clipped * advantages
        policy_loss = -float(np.mean(np.minimum(surr1, surr2)))
        entropy = -(probs * logp_all).sum(axis=1)

        values, vcache = self.value.forward_cached(obs)
        values = values[:, 0]
        value_loss = float(np.mean((returns - values) ** 2))
        loss = policy_loss + hp.vf_coef * value_loss - hp.ent_coef * float(np.mean(entropy))

        # d loss / d log pi(a|s); zero where the clipped branch is the active minimum
        unclipped_active = surr1 <= surr2
        d_logp = np.where(unclipped_active, -surr1 / n, 0.0)
        onehot = np.zeros_like(probs)
        onehot[np.arange(n), actions] = 1.0
        d_logits = d_logp[:, None] * (onehot - probs)
        d_entropy = -probs * (logp_all + entropy[:, None])
        d_logits -= (hp.ent_coef / n) * d_entropy
        gp = self.policy.backward(pcache, d_logits)
        gv = self.value.backward(vcache, (hp.vf_coef * -2.0 / n * (returns - values))[:, None])

        parts = {
            "policy_loss": policy_loss,
            "value_loss": value_loss,
            "entropy": float(np.mean(entropy)),
            "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > self.clip_range)),
            "approx_kl": float(np.mean((ratio - 1.0) - np.log(ratio))),
        }
        return loss, parts, GradBundle.concat(gp, gv)

    def update(self, rollout: RolloutBuffer | None = None, hp: HyperPPO | None = None) -> dict:
        """Several epochs of shuffled minibatch steps over a full rollout."""
        rollout = self.rollout if rollout is None else rollout
        hp = self._hp if hp is None else hp
        if len(rollout) == 0:
            raise InvalidArgument("empty rollout")
        n = len(rollout)
        params = self.policy.params + self.value.params
        pre_norms, post_norms, stats = [], [], []
        for _ in range(self.n_epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                adv = rollout.advantages[idx]
                if self.normalize_advantage and len(idx) > 1:
                    adv = (adv - adv.mean()) / (adv.std() + ADV_EPS)
                loss, parts, grads = self.minibatch_loss(
                    rollout.obs[idx], rollout.actions[idx], rollout.log_probs[idx], adv, rollout.returns[idx], hp
                )
                pre_norms.append(grads.norm)
                grads = clip_global_norm(grads, hp.max_grad_norm)
                post_norms.append(grads.norm)
                adam_step(self.opt, params, grads, hp.learning_rate)
                stats.append((loss, parts["policy_loss"], parts["value_loss"], parts["entropy"], parts["clip_fraction"]))
        s = np.mean(np.array(stats), axis=0)
        return {
            "loss": float(s[0]),
            "policy_loss": float(s[1]),
            "value_loss": float(s[2]),
            "entropy": float(s[3]),
            "clip_fraction": float(s[4]),
            "grad_norm_max": float(max(pre_norms)),
            "clipped_grad_norm_max": float(max(post_norms)),
        }

    def finish_rollout(self, last_obs) -> None:
        hp = self._hp
        last_value = float(self.value.forward(last_obs)[0])
        r = self.rollout
        r.advantages[:], r.returns[:] = compute_gae(
            r.rewards, r.values, r.dones, last_value, hp.gamma, hp.gae_lambda
        )

    def learn(self, runner, n_steps: int) -> dict:
        for _ in range(n_steps):
            obs = runner.obs
            action, logp, value = self.act(obs)
            next_obs, reward, terminated, truncated = runner.step(action)
            if truncated and not terminated:
                # time limit: bootstrap the cut-off tail
                reward += self._hp.gamma * float(self.value.forward(next_obs)[0])
            self.rollout.add(obs, action, logp, value, reward, float(terminated or truncated))
            self.num_timesteps += 1
            if self.rollout.full:
                self.finish_rollout(runner.obs)
                self.last_diagnostics = self.update()
                self.rollout.clear()
        return self.last_diagnostics
