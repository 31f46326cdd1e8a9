from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument


def compute_gae(rewards, values, dones, last_value: float, gamma: float, lam: float):
    """Generalized advantage estimates and value targets.

    ``dones[t]`` marks that the episode ended with transition ``t``, so no
    value is bootstrapped across it. ``last_value`` is the value of the
    state following the final transition.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if not (rewards.shape == values.shape == dones.shape) or rewards.ndim != 1:
        raise InvalidArgument("rewards, values and dones must be 1-D arrays of equal length")
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise InvalidArgument("gamma and lambda must lie in [0, 1]")
    n = rewards.shape[0]
    advantages = np.zeros(n)
    next_value = float(last_value)
    running = 0.0
    for t in reversed(range(n)):
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * not_done * next_value - values[t]
        running = delta + gamma * lam * not_done * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values
