"""Simplified planar lander with four discrete actions.

A point mass with an orientation, integrated with semi-implicit Euler.
Leg contact is a height test against flat terrain at altitude 0 and the
landing pad spans ``|x| <= PAD_HALF_WIDTH``. Rewards are a potential-based
shaping term, fuel costs, and a terminal bonus (+100 at rest on the pad,
-100 on crash or leaving the field).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..context import ContextFeature
from .base import ActionKind, ContextualEnv, EnvSpec, EnvState, StepResult, check_discrete_action

DT = 0.05
HORIZON = 1000
# a global threshold on mean return across instances, not a per-instance test
SOLVED_RETURN = 200.0

NOOP, LEFT, MAIN, RIGHT = range(4)

SPAWN_HEIGHT = 10.0
PAD_HALF_WIDTH = 2.0
X_LIMIT = 10.0
Y_LIMIT = 30.0
LEG_HALF_SPAN = 1.0
SIDE_ANGULAR_ACCEL = 2.0

# touchdown tolerances; beyond any of these the lander crashes
MAX_LAND_VY = 3.0
MAX_LAND_VX = 2.0
MAX_LAND_ANGLE = 0.4
GROUND_FRICTION = 0.5
CONTACT_TOL = 0.05
REST_SPEED = 0.05

MAIN_FUEL = 0.3
SIDE_FUEL = 0.03
POS_SCALE = 10.0
VEL_SCALE = 5.0

FEATURES = (
    ContextFeature("gravity_y", -10.0, upper=0.0),
    ContextFeature("main_engine_accel", 15.0, lower=0.0),
    ContextFeature("side_engine_accel", 1.0, lower=0.0),
)

SPEC = EnvSpec(
    name="lander",
    base_obs_dim=8,
    action_kind=ActionKind.DISCRETE,
    action_dim_or_count=4,
    horizon=HORIZON,
    feature_list=FEATURES,
)


@dataclass(frozen=True)
class LanderState(EnvState):
    x: float
    y: float
    vx: float
    vy: float
    angle: float
    omega: float
    leg_left: float
    leg_right: float
    shaping: float


def leg_contacts(y: float, angle: float) -> tuple[float, float]:
    dy = LEG_HALF_SPAN * math.sin(angle)
    return float(y - dy <= CONTACT_TOL), float(y + dy <= CONTACT_TOL)


def shaping_potential(x, y, vx, vy, angle, leg_left, leg_right) -> float:
    return (
        -100.0 * math.hypot(x / POS_SCALE, y / POS_SCALE)
        - 100.0 * math.hypot(vx / VEL_SCALE, vy / VEL_SCALE)
        - 100.0 * abs(angle)
        + 10.0 * leg_left
        + 10.0 * leg_right
    )


def lander_step(state: LanderState, action: int, params: dict) -> tuple[LanderState, StepResult]:
    a = check_discrete_action(action, 4)
    ang = state.angle
    ax, ay, alpha = 0.0, params["gravity_y"], 0.0
    fuel = 0.0
    if a == MAIN:
        main = params["main_engine_accel"]
        ax -= math.sin(ang) * main
        ay += math.cos(ang) * main
        fuel = MAIN_FUEL
    elif a in (LEFT, RIGHT):
        # left engine pushes toward +x and spins clockwise; right mirrors it
        sign = 1.0 if a == LEFT else -1.0
        side = params["side_engine_accel"]
        ax += sign * side * math.cos(ang)
        ay += sign * side * math.sin(ang)
        alpha -= sign * SIDE_ANGULAR_ACCEL
        fuel = SIDE_FUEL

    vx = state.vx + ax * DT
    vy = state.vy + ay * DT
    omega = state.omega + alpha * DT
    x = state.x + vx * DT
    y = state.y + vy * DT
    angle = state.angle + omega * DT

    bonus = 0.0
    terminated = False
    if y <= 0.0:
        if vy < -MAX_LAND_VY or abs(vx) > MAX_LAND_VX or abs(angle) > MAX_LAND_ANGLE:
            terminated, bonus = True, -100.0
        y = 0.0
        vy = max(vy, 0.0)
        vx *= GROUND_FRICTION
        angle *= 0.5
        omega = 0.0
    leg_left, leg_right = leg_contacts(y, angle)

    if not terminated and (abs(x) > X_LIMIT or y > Y_LIMIT):
        terminated, bonus = True, -100.0
    if (
        not terminated
        and y == 0.0
        and a != MAIN
        and leg_left
        and leg_right
        and abs(vx) < REST_SPEED
        and abs(omega) < REST_SPEED
    ):
        terminated = True
        bonus = 100.0 if abs(x) <= PAD_HALF_WIDTH else 0.0

    shaping = shaping_potential(x, y, vx, vy, angle, leg_left, leg_right)
    reward = shaping - state.shaping - fuel + bonus
    new_state = LanderState(
        steps=state.steps + 1,
        x=x, y=y, vx=vx, vy=vy, angle=angle, omega=omega,
        leg_left=leg_left, leg_right=leg_right, shaping=shaping,
    )
    truncated = not terminated and new_state.steps >= HORIZON
    return new_state, StepResult(_observe(new_state), reward, terminated, truncated)


def _observe(s: LanderState) -> np.ndarray:
    return np.array(
        [
            s.x / POS_SCALE,
            s.y / POS_SCALE,
            s.vx / VEL_SCALE,
            s.vy / VEL_SCALE,
            s.angle,
            s.omega,
            s.leg_left,
            s.leg_right,
        ]
    )


def initial_lander_state(x, vx, vy, angle) -> LanderState:
    legs = leg_contacts(SPAWN_HEIGHT, angle)
    return LanderState(
        steps=0, x=x, y=SPAWN_HEIGHT, vx=vx, vy=vy, angle=angle, omega=0.0,
        leg_left=legs[0], leg_right=legs[1],
        shaping=shaping_potential(x, SPAWN_HEIGHT, vx, vy, angle, *legs),
    )


class LanderEnv(ContextualEnv):
    spec = SPEC
    solved_return = SOLVED_RETURN

    def _initial_state(self, rng):
        x, vx, vy, angle = rng.uniform([-1.0, -1.0, -1.0, -0.05], [1.0, 1.0, 0.0, 0.05])
        return initial_lander_state(float(x), float(vx), float(vy), float(angle))

    def _transition(self, state, action, params):
        return lander_step(state, action, params)

    def _observe(self, state):
        return _observe(state)
