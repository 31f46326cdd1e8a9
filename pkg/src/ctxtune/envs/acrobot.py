"""Two-link acrobot with discrete torque on the second joint.

Book formulation of the dynamics, integrated with one classical RK4 step
per control interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..context import ContextFeature
from .base import ActionKind, ContextualEnv, EnvSpec, EnvState, StepResult, check_discrete_action

DT = 0.2
HORIZON = 500
MAX_VEL_1 = 4.0 * math.pi
MAX_VEL_2 = 9.0 * math.pi
TORQUES = (-1.0, 0.0, 1.0)

FEATURES = (
    ContextFeature("link_length_1", 1.0, lower=0.0),
    ContextFeature("link_length_2", 1.0, lower=0.0),
    ContextFeature("link_mass_1", 1.0, lower=0.0),
    ContextFeature("link_mass_2", 1.0, lower=0.0),
    ContextFeature("link_com_1", 0.5, lower=0.0),
    ContextFeature("link_com_2", 0.5, lower=0.0),
    ContextFeature("link_moi", 1.0, lower=0.0),
    ContextFeature("gravity", 9.8, lower=0.0),
)

SPEC = EnvSpec(
    name="acrobot",
    base_obs_dim=6,
    action_kind=ActionKind.DISCRETE,
    action_dim_or_count=3,
    horizon=HORIZON,
    feature_list=FEATURES,
)


@dataclass(frozen=True)
class AcrobotState(EnvState):
    theta1: float
    theta2: float
    dtheta1: float
    dtheta2: float


def acrobot_derivatives(s, torque: float, p: dict) -> tuple[float, float, float, float]:
    """Time derivative of (theta1, theta2, dtheta1, dtheta2)."""
    m1, m2 = p["link_mass_1"], p["link_mass_2"]
    l1 = p["link_length_1"]
    lc1, lc2 = p["link_com_1"], p["link_com_2"]
    i1 = i2 = p["link_moi"]
    g = p["gravity"]
    th1, th2, dth1, dth2 = s

    cos2, sin2 = math.cos(th2), math.sin(th2)
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2.0 * l1 * lc2 * cos2) + i1 + i2
    d2 = m2 * (lc2**2 + l1 * lc2 * cos2) + i2
    phi2 = m2 * lc2 * g * math.cos(th1 + th2 - math.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * dth2**2 * sin2
        - 2.0 * m2 * l1 * lc2 * dth2 * dth1 * sin2
        + (m1 * lc1 + m2 * l1) * g * math.cos(th1 - math.pi / 2.0)
        + phi2
    )
    ddth2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dth1**2 * sin2 - phi2) / (
        m2 * lc2**2 + i2 - d2**2 / d1
    )
    ddth1 = -(d2 * ddth2 + phi1) / d1
    return dth1, dth2, ddth1, ddth2


def rk4(s: tuple, torque: float, p: dict, dt: float = DT) -> tuple:
    def add(a, k, h):
        return tuple(x + h * y for x, y in zip(a, k))

    k1 = acrobot_derivatives(s, torque, p)
    k2 = acrobot_derivatives(add(s, k1, dt / 2.0), torque, p)
    k3 = acrobot_derivatives(add(s, k2, dt / 2.0), torque, p)
    k4 = acrobot_derivatives(add(s, k3, dt), torque, p)
    return tuple(x + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d) for x, a, b, c, d in zip(s, k1, k2, k3, k4))


def _wrap(x: float) -> float:
    return (x + math.pi) % (2.0 * math.pi) - math.pi


def _clamp(x: float, bound: float) -> float:
    return min(max(x, -bound), bound)


def is_terminal(theta1: float, theta2: float) -> bool:
    return -math.cos(theta1) - math.cos(theta1 + theta2) > 1.0


def acrobot_step(state: AcrobotState, action: int, params: dict) -> tuple[AcrobotState, StepResult]:
    a = check_discrete_action(action, 3)
    s = (state.theta1, state.theta2, state.dtheta1, state.dtheta2)
    th1, th2, dth1, dth2 = rk4(s, TORQUES[a], params)
    new_state = AcrobotState(
        steps=state.steps + 1,
        theta1=_wrap(th1),
        theta2=_wrap(th2),
        dtheta1=_clamp(dth1, MAX_VEL_1),
        dtheta2=_clamp(dth2, MAX_VEL_2),
    )
    terminated = is_terminal(new_state.theta1, new_state.theta2)
    reward = 0.0 if terminated else -1.0
    truncated = not terminated and new_state.steps >= HORIZON
    return new_state, StepResult(_observe(new_state), reward, terminated, truncated)


def _observe(s: AcrobotState) -> np.ndarray:
    return np.array(
        [math.cos(s.theta1), math.sin(s.theta1), math.cos(s.theta2), math.sin(s.theta2), s.dtheta1, s.dtheta2]
    )


class AcrobotEnv(ContextualEnv):
    spec = SPEC

    def _initial_state(self, rng):
        th1, th2, d1, d2 = rng.uniform(-0.1, 0.1, size=4)
        return AcrobotState(steps=0, theta1=float(th1), theta2=float(th2), dtheta1=float(d1), dtheta2=float(d2))

    def _transition(self, state, action, params):
        return acrobot_step(state, action, params)

    def _observe(self, state):
        return _observe(state)
