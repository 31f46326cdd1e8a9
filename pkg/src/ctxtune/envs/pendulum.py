"""Inverted pendulum swing-up with continuous torque."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..context import ContextFeature
from .base import ActionKind, ContextualEnv, EnvSpec, EnvState, StepResult, check_finite

DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0
HORIZON = 200

FEATURES = (
    ContextFeature("g", 10.0, lower=0.0),
    ContextFeature("m", 1.0, lower=0.0),
    ContextFeature("l", 1.0, lower=0.0),
)

SPEC = EnvSpec(
    name="pendulum",
    base_obs_dim=3,
    action_kind=ActionKind.CONTINUOUS,
    action_dim_or_count=1,
    horizon=HORIZON,
    feature_list=FEATURES,
)


@dataclass(frozen=True)
class PendulumState(EnvState):
    theta: float
    theta_dot: float


def wrap_angle(x: float) -> float:
    """Map an angle into [-pi, pi); +pi maps to -pi."""
    return (x + math.pi) % (2.0 * math.pi) - math.pi


def pendulum_step(state: PendulumState, torque: float, params: dict) -> tuple[PendulumState, StepResult]:
    u = check_finite(torque, "torque")
    u = min(max(u, -MAX_TORQUE), MAX_TORQUE)
    g, m, l = params["g"], params["m"], params["l"]
    th, thdot = state.theta, state.theta_dot

    new_thdot = thdot + (3.0 * g / (2.0 * l) * math.sin(th) + 3.0 / (m * l * l) * u) * DT
    new_thdot = min(max(new_thdot, -MAX_SPEED), MAX_SPEED)
    new_th = th + new_thdot * DT
    reward = -(wrap_angle(th) ** 2 + 0.1 * new_thdot**2 + 0.001 * u**2)

    new_state = PendulumState(steps=state.steps + 1, theta=new_th, theta_dot=new_thdot)
    obs = _observe(new_state)
    return new_state, StepResult(obs, reward, False, new_state.steps >= HORIZON)


def _observe(state: PendulumState) -> np.ndarray:
    return np.array([math.cos(state.theta), math.sin(state.theta), state.theta_dot])


class PendulumEnv(ContextualEnv):
    spec = SPEC
    action_high = MAX_TORQUE

    def _initial_state(self, rng):
        th, thdot = rng.uniform(low=[-math.pi, -1.0], high=[math.pi, 1.0])
        return PendulumState(steps=0, theta=float(th), theta_dot=float(thdot))

    def _transition(self, state, action, params):
        return pendulum_step(state, action, params)

    def _observe(self, state):
        return _observe(state)
