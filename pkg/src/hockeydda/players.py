"""Scripted synthetic players: the stand-ins for humans at desk scale.

An archetype bundles skill knobs (speed, reaction delay, aim noise,
aggression, home depth); a controller acts on a delayed observation,
chasing a predicted intercept point when attacking and retreating to its
home spot otherwise.  All controllers work in the egocentric normalized
observation frame, so one controller plays either side.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np

from . import kernels, rink
from .errors import ConfigurationError, EmptyInputError
from .meta import DemoSplit, Trajectory
from .rink import RinkConfig, SIDE_A, SIDE_B

# drive gain from (target - position) to action, in normalized units
DRIVE_GAIN = 5.0
# linear puck-velocity extrapolation factor for the predicted intercept,
# in normalized units (velocity component is already v_max-scaled)
INTERCEPT_LOOKAHEAD = 0.5
# aim this far beyond the predicted puck point so the striker plows through
# it toward the opponent goal instead of stopping at contact distance
STRIKE_OVERSHOOT = 0.15
# reposition goal-side of the puck before striking when not behind it
BEHIND_MARGIN = 0.05
# contest the puck slightly past the midline so a centered face-off resolves
ATTACK_REACH = 0.1
# steps between aggression re-draws; keeps decisions sticky enough to commit
DECISION_INTERVAL = 15

FIELD_RANGES = {
    "max_speed_frac": (0.0, 1.0),
    "reaction_delay_steps": (0.0, 20.0),
    "aim_noise_std": (0.0, 0.5),
    "aggression": (0.0, 1.0),
    "defense_depth": (0.1, 0.45),
}

DEFAULT_SAMPLE_RANGES = {
    "max_speed_frac": (0.3, 1.0),
    "reaction_delay_steps": (0.0, 12.0),
    "aim_noise_std": (0.0, 0.25),
    "aggression": (0.3, 1.0),
    "defense_depth": (0.15, 0.35),
}


@dataclass(frozen=True)
class Archetype:
    max_speed_frac: float
    reaction_delay_steps: float
    aim_noise_std: float
    aggression: float
    defense_depth: float = 0.25
    id: str = ""
    seed: int = 0

    def __post_init__(self):
        for name, (lo, hi) in FIELD_RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ConfigurationError(
                    f"archetype field {name}={v} outside [{lo}, {hi}]")


class ControllerState:
    """Delayed-observation ring buffer plus the controller's noise stream."""

    def __init__(self, arch: Archetype, seed: int):
        self.delay = int(round(arch.reaction_delay_steps))
        self.buffer: deque = deque(maxlen=self.delay + 1)
        self.rng = np.random.default_rng(seed)
        self.ticks = 0
        self.committed = False  # sticky outcome of the last aggression draw


def make_controller(arch: Archetype, seed: int) -> ControllerState:
    return ControllerState(arch, seed)


def scripted_act(arch: Archetype, obs: np.ndarray,
                 state: ControllerState) -> tuple[np.ndarray, ControllerState]:
    """One control decision in the egocentric normalized frame.

    Acts on the observation from `reaction_delay_steps` ago.  When the puck
    is on its own half and an aggression draw succeeds, drives toward a
    noisy predicted intercept point just behind the puck; otherwise returns
    to its home spot.
    """
    state.buffer.append(np.asarray(obs, dtype=np.float64))
    delayed = state.buffer[0]

    px, py = delayed[0], delayed[1]
    pvx, pvy = delayed[2], delayed[3]
    own_x, own_y = delayed[4], delayed[5]

    if state.ticks % DECISION_INTERVAL == 0:
        state.committed = state.rng.random() < arch.aggression
    state.ticks += 1

    # a puck resting at the face-off spot is always contested
    faceoff = (abs(px) < 0.05 and abs(py) < 0.05
               and abs(pvx) < 1e-9 and abs(pvy) < 1e-9)
    attack = faceoff or (py < ATTACK_REACH and state.committed)
    if attack:
        # linear extrapolation of the puck
        ix = px + pvx * INTERCEPT_LOOKAHEAD
        iy = py + pvy * INTERCEPT_LOOKAHEAD
        if own_y > iy - BEHIND_MARGIN:
            # not goal-side of the puck: swing around behind it first
            tx, ty = ix, iy - 3.0 * BEHIND_MARGIN
        else:
            # strike through the puck toward the opponent goal
            tx, ty = ix, iy + STRIKE_OVERSHOOT
        if arch.aim_noise_std > 0.0:
            # noise is specified in table units; x spans half a table width
            tx += state.rng.normal(0.0, arch.aim_noise_std * 2.0)
            ty += state.rng.normal(0.0, arch.aim_noise_std)
    else:
        # guard the goal mouth, shadowing the puck's lateral position
        tx = min(0.4, max(-0.4, px + pvx * INTERCEPT_LOOKAHEAD))
        ty = arch.defense_depth - 1.0  # table y -> egocentric normalized y

    ax = np.clip((tx - own_x) * DRIVE_GAIN, -1.0, 1.0) * arch.max_speed_frac
    ay = np.clip((ty - own_y) * DRIVE_GAIN, -1.0, 1.0) * arch.max_speed_frac
    return np.array([ax, ay]), state


def sample_archetype(seed: int, ranges: dict | None = None,
                     id_prefix: str = "arch") -> Archetype:
    """Uniform independent draws per field; deterministic per seed."""
    ranges = dict(DEFAULT_SAMPLE_RANGES, **(ranges or {}))
    for name, (lo, hi) in ranges.items():
        if name not in FIELD_RANGES:
            raise ConfigurationError(f"unknown archetype field {name!r}")
        if lo > hi:
            raise ConfigurationError(f"inverted range for {name}: ({lo}, {hi})")
        flo, fhi = FIELD_RANGES[name]
        if lo < flo or hi > fhi:
            raise ConfigurationError(f"range for {name} outside [{flo}, {fhi}]")
    rng = np.random.default_rng(seed)
    draws = {}
    for name in FIELD_RANGES:  # fixed field order keeps draws reproducible
        lo, hi = ranges[name]
        draws[name] = float(rng.uniform(lo, hi))
    draws["reaction_delay_steps"] = float(round(draws["reaction_delay_steps"]))
    return Archetype(**draws, id=f"{id_prefix}-{seed}", seed=seed)


def make_population(n: int, base_seed: int,
                    ranges: dict | None = None) -> list[Archetype]:
    return [sample_archetype(base_seed + i, ranges) for i in range(n)]


def generate_demo(arch: Archetype, opponent: Archetype, n_steps: int,
                  seed: int, config: RinkConfig | None = None) -> Trajectory:
    """Roll both scripted controllers from reset, recording side A's pairs."""
    if n_steps < 1:
        raise ConfigurationError("n_steps must be at least 1")
    cfg = (config or RinkConfig()).validate()
    cfg_vec = cfg.to_vector()
    sv = rink.reset(cfg, seed).to_vector()
    ctrl_a = make_controller(arch, seed * 2 + 1)
    ctrl_b = make_controller(opponent, seed * 2 + 2)
    obs_rows = np.empty((n_steps, rink.OBS_DIM))
    act_rows = np.empty((n_steps, rink.ACTION_DIM))
    for t in range(n_steps):
        obs_a = rink.observe_vector(sv, SIDE_A, cfg)
        obs_b = rink.observe_vector(sv, SIDE_B, cfg)
        act_a, _ = scripted_act(arch, obs_a, ctrl_a)
        act_b, _ = scripted_act(opponent, obs_b, ctrl_b)
        obs_rows[t] = obs_a
        act_rows[t] = act_a
        sv, _goal, _, _ = kernels.step_kernel(sv, act_a[0], act_a[1],
                                              act_b[0], act_b[1], cfg_vec)
    return Trajectory(obs_rows, act_rows, source=arch.id or "anon", seed=seed)


def split_demo(traj: Trajectory, demo_fraction: float = 0.5) -> DemoSplit:
    """Contiguous prefix split: first floor(n * fraction) transitions are demo."""
    if not (0.0 < demo_fraction < 1.0):
        raise ConfigurationError("demo_fraction must be in (0, 1)")
    n = len(traj)
    n_demo = int(n * demo_fraction)
    if n_demo < 1 or n - n_demo < 1:
        raise EmptyInputError(f"trajectory of length {n} too short to split")
    return DemoSplit(demo=traj.slice(0, n_demo), valid=traj.slice(n_demo, n))


def save_trajectory(path, traj: Trajectory, arch: Archetype | None = None) -> None:
    rows = np.hstack([traj.observations, traj.actions]).tolist()
    doc = {"archetype": asdict(arch) if arch is not None else traj.source,
           "seed": traj.seed, "transitions": rows}
    Path(path).write_text(json.dumps(doc))


def load_trajectory(path) -> Trajectory:
    doc = json.loads(Path(path).read_text())
    rows = np.asarray(doc["transitions"], dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != rink.OBS_DIM + rink.ACTION_DIM:
        raise ConfigurationError("trajectory rows must hold 8 obs + 2 action floats")
    arch = doc.get("archetype")
    source = arch["id"] if isinstance(arch, dict) else str(arch)
    return Trajectory(rows[:, :rink.OBS_DIM], rows[:, rink.OBS_DIM:],
                      source=source, seed=int(doc.get("seed", 0)))
