"""Deterministic fixed-timestep 2D air-hockey simulation.

Pure functions over value-semantic state: `step` never mutates its input.
The hot per-tick update lives in :mod:`hockeydda.kernels`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericStateError

SIDE_A = "A"
SIDE_B = "B"

OBS_DIM = 8
ACTION_DIM = 2


class Vec2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class RinkConfig:
    width: float = 1.0
    length: float = 2.0
    goal_width: float = 0.4
    puck_radius: float = 0.03
    striker_radius: float = 0.05
    dt: float = 1.0 / 60.0
    wall_restitution: float = 0.95
    friction_damping: float = 0.3
    v_max_puck: float = 4.0
    v_max_striker: float = 2.0
    striker_accel_gain: float = 12.0

    def validate(self) -> "RinkConfig":
        for f in fields(self):
            v = getattr(self, f.name)
            # friction may be zero (a frictionless table is well-defined)
            floor_ok = v >= 0 if f.name == "friction_damping" else v > 0
            if not math.isfinite(v) or not floor_ok:
                raise ConfigurationError(f"{f.name} must be positive and finite, got {v}")
        if self.goal_width >= self.width:
            raise ConfigurationError("goal_width must be smaller than width")
        return self

    def to_vector(self) -> np.ndarray:
        return kernels.make_config_vector(
            self.width, self.length, self.goal_width, self.puck_radius,
            self.striker_radius, self.dt, self.wall_restitution,
            self.friction_damping, self.v_max_puck, self.v_max_striker,
            self.striker_accel_gain)

    def to_json(self) -> str:
        return json.dumps({f.name: getattr(self, f.name) for f in fields(self)})

    @classmethod
    def from_dict(cls, d: dict) -> "RinkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown RinkConfig fields: {sorted(unknown)}")
        return cls(**d).validate()

    @classmethod
    def from_json(cls, s: str) -> "RinkConfig":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class GameState:
    puck_pos: Vec2
    puck_vel: Vec2
    striker_a_pos: Vec2
    striker_a_vel: Vec2
    striker_b_pos: Vec2
    striker_b_vel: Vec2
    score_a: int = 0
    score_b: int = 0
    step_index: int = 0

    def to_vector(self) -> np.ndarray:
        return np.array([
            self.puck_pos.x, self.puck_pos.y, self.puck_vel.x, self.puck_vel.y,
            self.striker_a_pos.x, self.striker_a_pos.y,
            self.striker_a_vel.x, self.striker_a_vel.y,
            self.striker_b_pos.x, self.striker_b_pos.y,
            self.striker_b_vel.x, self.striker_b_vel.y,
        ], dtype=np.float64)

    @classmethod
    def from_vector(cls, v: np.ndarray, score_a: int, score_b: int,
                    step_index: int) -> "GameState":
        return cls(
            puck_pos=Vec2(float(v[0]), float(v[1])),
            puck_vel=Vec2(float(v[2]), float(v[3])),
            striker_a_pos=Vec2(float(v[4]), float(v[5])),
            striker_a_vel=Vec2(float(v[6]), float(v[7])),
            striker_b_pos=Vec2(float(v[8]), float(v[9])),
            striker_b_vel=Vec2(float(v[10]), float(v[11])),
            score_a=score_a, score_b=score_b, step_index=step_index)


@dataclass(frozen=True)
class StepEvents:
    goal_scored: Optional[str] = None  # SIDE_A / SIDE_B / None
    wall_bounces: int = 0
    striker_hits: int = 0


def clamp_action(action) -> np.ndarray:
    """Ingest an action as a length-2 float array with components in [-1, 1]."""
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (ACTION_DIM,):
        raise NumericStateError(f"action must have 2 components, got shape {a.shape}")
    return np.clip(np.nan_to_num(a, nan=0.0), -1.0, 1.0)


def reset(config: RinkConfig, seed: int = 0) -> GameState:
    """Initial state: puck centered at rest, strikers at their home spots.

    The seed is accepted for interface symmetry with stochastic callers;
    the initial placement itself is fixed.
    """
    config.validate()
    w, length = config.width, config.length
    return GameState(
        puck_pos=Vec2(0.5 * w, 0.5 * length),
        puck_vel=Vec2(0.0, 0.0),
        striker_a_pos=Vec2(0.5 * w, 0.125 * length),
        striker_a_vel=Vec2(0.0, 0.0),
        striker_b_pos=Vec2(0.5 * w, 0.875 * length),
        striker_b_vel=Vec2(0.0, 0.0))


def step(state: GameState, action_a, action_b,
         config: RinkConfig) -> tuple[GameState, StepEvents]:
    """Advance the simulation by one fixed timestep.

    Integration order: strikers move toward their target velocities, the
    puck is damped and integrated, striker/puck collisions are resolved
    with infinite-mass strikers, walls reflect with restitution unless the
    puck crosses a goal mouth, and a goal re-centers the puck at rest.
    """
    sv = state.to_vector()
    if not np.all(np.isfinite(sv)):
        raise NumericStateError("non-finite component in game state")
    aa = clamp_action(action_a)
    ab = clamp_action(action_b)
    out, goal, bounces, hits = kernels.step_kernel(
        sv, aa[0], aa[1], ab[0], ab[1], config.to_vector())

    score_a, score_b = state.score_a, state.score_b
    goal_side = None
    if goal == kernels.GOAL_FOR_A:
        score_a += 1
        goal_side = SIDE_A
    elif goal == kernels.GOAL_FOR_B:
        score_b += 1
        goal_side = SIDE_B

    new_state = GameState.from_vector(out, score_a, score_b, state.step_index + 1)
    return new_state, StepEvents(goal_scored=goal_side,
                                 wall_bounces=int(bounces),
                                 striker_hits=int(hits))


def mirror(state: GameState, config: Optional[RinkConfig] = None) -> GameState:
    """Rotate the whole state 180 degrees about table center and swap sides."""
    cfg = config if config is not None else RinkConfig()
    return _mirror_with(state, width=cfg.width, length=cfg.length)


def _mirror_with(state: GameState, width: float, length: float) -> GameState:
    def rp(p: Vec2) -> Vec2:
        return Vec2(width - p.x, length - p.y)

    def rv(v: Vec2) -> Vec2:
        return Vec2(-v.x, -v.y)

    return GameState(
        puck_pos=rp(state.puck_pos), puck_vel=rv(state.puck_vel),
        striker_a_pos=rp(state.striker_b_pos), striker_a_vel=rv(state.striker_b_vel),
        striker_b_pos=rp(state.striker_a_pos), striker_b_vel=rv(state.striker_a_vel),
        score_a=state.score_b, score_b=state.score_a,
        step_index=state.step_index)


def observe_vector(sv: np.ndarray, side: str, config: RinkConfig) -> np.ndarray:
    """`observe` over the raw 12-float kernel state vector (hot-loop path)."""
    hw = 0.5 * config.width
    hl = 0.5 * config.length
    if side == SIDE_A:
        sgn = 1.0
        own, opp = 4, 8
    elif side == SIDE_B:
        sgn = -1.0
        own, opp = 8, 4
    else:
        raise ValueError(f"side must be '{SIDE_A}' or '{SIDE_B}', got {side!r}")
    obs = np.empty(OBS_DIM, dtype=np.float64)
    obs[0] = sgn * (sv[0] - hw) / hw
    obs[1] = sgn * (sv[1] - hl) / hl
    obs[2] = sgn * sv[2] / config.v_max_puck
    obs[3] = sgn * sv[3] / config.v_max_puck
    obs[4] = sgn * (sv[own] - hw) / hw
    obs[5] = sgn * (sv[own + 1] - hl) / hl
    obs[6] = sgn * (sv[opp] - hw) / hw
    obs[7] = sgn * (sv[opp + 1] - hl) / hl
    np.clip(obs, -1.0, 1.0, out=obs)
    return obs


def observe(state: GameState, side: str, config: RinkConfig) -> np.ndarray:
    """Egocentric 8-float observation with the observer's goal at y = -1.

    Layout: puck x, y, vx, vy, own striker x, y, opponent striker x, y.
    Positions map linearly to [-1, 1]; velocities are scaled by the puck
    speed cap and clipped.  Side B sees the 180-degree rotated state so a
    single policy can play either side.
    """
    return observe_vector(state.to_vector(), side, config)


def puck_on_side_a(state: GameState, config: RinkConfig) -> bool:
    """Possession partition: y strictly below midline is side A's half."""
    return state.puck_pos.y < 0.5 * config.length
