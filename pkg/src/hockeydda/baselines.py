"""Comparison systems: the LSTM-FC embedding network and the difficulty ladder.

The LSTM-FC net embeds a player's demo sequence (obs/action pairs packed
to 10 floats per step) into a 10-float vector, then a four-layer FC stack
maps (current observation, embedding) to an action.  The ladder is the
conventional approach: an integer level in [1, 9] raised on a player win,
lowered on a loss, realized here as scripted archetype presets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nets
from .errors import AssetError, ConfigurationError, EmptyInputError, ShapeError
from .meta import DemoSplit, Trajectory
from .nets import ParamVector
from .players import Archetype

PLAYER_WIN = "player_win"
PLAYER_LOSS = "player_loss"
DRAW = "draw"

MIN_LEVEL, MAX_LEVEL = 1, 9

# scripted-archetype presets bounding the ladder's skill axis
LEVEL1_PRESET = (0.2, 12.0, 0.20, 0.2)   # max_speed_frac, delay, noise, aggression
LEVEL9_PRESET = (1.0, 0.0, 0.02, 0.9)
LADDER_DEFENSE_DEPTH = 0.25

EMBED_DIM = 10
DEMO_INPUT_DIM = 10  # 8 obs + 2 action per demo step


@dataclass(frozen=True)
class LstmFcParams:
    lstm: ParamVector
    fc: ParamVector

    @property
    def size(self) -> int:
        return self.lstm.values.size + self.fc.values.size

    def pack(self) -> np.ndarray:
        return np.concatenate([self.lstm.values, self.fc.values])

    def unpack(self, flat: np.ndarray) -> "LstmFcParams":
        n = self.lstm.values.size
        return LstmFcParams(self.lstm.with_values(flat[:n]),
                            self.fc.with_values(flat[n:]))


def default_lstmfc_layouts(obs_dim: int = 8, action_dim: int = 2,
                           embed_dim: int = EMBED_DIM, lstm_layers: int = 2,
                           fc_hidden: int = 80, fc_layers: int = 4):
    lstm = nets.lstm_layout(obs_dim + action_dim, embed_dim, lstm_layers)
    dims = [obs_dim + embed_dim] + [fc_hidden] * (fc_layers - 1) + [action_dim]
    return lstm, nets.mlp_layout(dims)


def init_lstmfc(seed: int, obs_dim: int = 8, action_dim: int = 2,
                embed_dim: int = EMBED_DIM, lstm_layers: int = 2,
                fc_hidden: int = 80, fc_layers: int = 4) -> LstmFcParams:
    lstm_layout, fc_layout = default_lstmfc_layouts(
        obs_dim, action_dim, embed_dim, lstm_layers, fc_hidden, fc_layers)
    return LstmFcParams(nets.init_params(lstm_layout, seed),
                        nets.init_params(fc_layout, seed + 1))


def _demo_sequence(demo: Trajectory) -> np.ndarray:
    if len(demo) == 0:
        raise EmptyInputError("empty demo trajectory")
    return np.hstack([demo.observations, demo.actions])


def lstmfc_embed(params: LstmFcParams, demo: Trajectory) -> np.ndarray:
    """Final top-layer hidden state over the packed demo sequence."""
    embedding, _ = nets.lstm_forward(params.lstm, _demo_sequence(demo))
    return embedding


def lstmfc_act(params: LstmFcParams, embedding: np.ndarray,
               obs: np.ndarray) -> np.ndarray:
    embedding = np.asarray(embedding, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if embedding.shape != (params.lstm.layout[-1].output_dim,):
        raise ShapeError(f"embedding shape {embedding.shape} unexpected")
    out, _ = nets.mlp_forward(params.fc, np.concatenate([obs, embedding]))
    return out


@dataclass(frozen=True)
class LstmFcTrainConfig:
    iterations: int = 100
    lr: float = 1e-3
    tasks_per_batch: int = 4

    @property
    def epochs(self) -> int:
        return self.iterations


def lstmfc_task_loss_grad(params: LstmFcParams, split: DemoSplit
                          ) -> tuple[float, np.ndarray]:
    """End-to-end loss and packed gradient for one player's demo/valid pair."""
    seq = _demo_sequence(split.demo)
    embedding, lstm_cache = nets.lstm_forward(params.lstm, seq)
    n_v = len(split.valid)
    fc_in = np.hstack([split.valid.observations,
                       np.tile(embedding, (n_v, 1))])
    preds, fc_cache = nets.mlp_forward(params.fc, fc_in)
    diff = preds - split.valid.actions
    loss = float(np.mean(diff * diff))
    upstream = (2.0 / diff.size) * diff
    fc_grads, d_in = nets.mlp_backward(params.fc, fc_cache, upstream)
    d_embed = d_in[:, split.valid.observations.shape[1]:].sum(axis=0)
    lstm_grads, _ = nets.lstm_backward(params.lstm, lstm_cache, d_embed)
    return loss, np.concatenate([lstm_grads, fc_grads])


def lstmfc_train(data: Sequence[DemoSplit], cfg: LstmFcTrainConfig,
                 seed: int, init: LstmFcParams | None = None
                 ) -> tuple[LstmFcParams, list[dict]]:
    """Mini-batch end-to-end training of the embedding and action networks."""
    if not data:
        raise EmptyInputError("empty training set")
    params = init if init is not None else init_lstmfc(seed)
    rng = np.random.default_rng(seed)
    opt = nets.make_optimizer(nets.ADAPTIVE_MOMENTS, cfg.lr)
    theta = params.pack()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t = 0
    log: list[dict] = []
    for it in range(cfg.iterations):
        idx = rng.choice(len(data), size=min(cfg.tasks_per_batch, len(data)),
                         replace=False)
        cur = params.unpack(theta)
        grad = np.zeros_like(theta)
        loss = 0.0
        for i in sorted(idx):  # fixed order for determinism
            task_loss, task_grad = lstmfc_task_loss_grad(cur, data[i])
            loss += task_loss
            grad += task_grad
        loss /= len(idx)
        grad /= len(idx)
        t += 1
        m = opt.beta1 * m + (1 - opt.beta1) * grad
        v = opt.beta2 * v + (1 - opt.beta2) * grad * grad
        theta = theta - cfg.lr * (m / (1 - opt.beta1 ** t)) / (
            np.sqrt(v / (1 - opt.beta2 ** t)) + opt.eps)
        log.append({"iter": it, "loss": loss,
                    "grad_norm": float(np.linalg.norm(grad))})
    return params.unpack(theta), log


# ---------------------------------------------------------------------------
# Difficulty ladder
# ---------------------------------------------------------------------------

def check_level(level: int) -> int:
    if not (MIN_LEVEL <= level <= MAX_LEVEL):
        raise ConfigurationError(f"difficulty level {level} outside [1, 9]")
    return int(level)


def ladder_update(level: int, outcome: str) -> int:
    """Raise on a player win, lower on a loss, clamp to [1, 9]."""
    level = check_level(level)
    if outcome == PLAYER_WIN:
        level += 1
    elif outcome == PLAYER_LOSS:
        level -= 1
    elif outcome != DRAW:
        raise ConfigurationError(f"unknown outcome {outcome!r}")
    return min(MAX_LEVEL, max(MIN_LEVEL, level))


def level_to_archetype(level: int) -> Archetype:
    """Linear interpolation between the weakest and strongest presets."""
    level = check_level(level)
    t = (level - MIN_LEVEL) / (MAX_LEVEL - MIN_LEVEL)
    lo, hi = LEVEL1_PRESET, LEVEL9_PRESET
    # (1-t)*lo + t*hi is exact at both endpoints in floating point
    vals = [(1.0 - t) * lo[i] + t * hi[i] for i in range(4)]
    return Archetype(max_speed_frac=vals[0], reaction_delay_steps=vals[1],
                     aim_noise_std=vals[2], aggression=vals[3],
                     defense_depth=LADDER_DEFENSE_DEPTH,
                     id=f"level-{level}", seed=level)


# ---------------------------------------------------------------------------
# Checkpoints (same envelope as nets, two layout sections)
# ---------------------------------------------------------------------------

def save_lstmfc_checkpoint(path, params: LstmFcParams,
                           meta: dict | None = None) -> None:
    doc = {
        "format_version": nets.CHECKPOINT_VERSION,
        "lstm": {"layout": [s.to_dict() for s in params.lstm.layout],
                 "values": params.lstm.values.tolist()},
        "fc": {"layout": [s.to_dict() for s in params.fc.layout],
               "values": params.fc.values.tolist()},
        "meta": dict(meta or {}),
    }
    Path(path).write_text(json.dumps(doc))


def load_lstmfc_checkpoint(path) -> tuple[LstmFcParams, dict]:
    p = Path(path)
    if not p.exists():
        raise AssetError(f"checkpoint not found: {p}")
    doc = json.loads(p.read_text())
    if doc.get("format_version") != nets.CHECKPOINT_VERSION:
        raise ConfigurationError(
            f"unsupported checkpoint version {doc.get('format_version')}")

    def section(name):
        sec = doc[name]
        layout = tuple(nets.LayerSpec.from_dict(d) for d in sec["layout"])
        values = np.asarray(sec["values"], dtype=np.float64)
        if values.shape != (nets.layout_size(layout),):
            raise ConfigurationError(f"{name} section value count does not match layout")
        return ParamVector(values, layout)

    return LstmFcParams(section("lstm"), section("fc")), doc.get("meta", {})
