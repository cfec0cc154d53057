"""Batch evaluation harness: seeded sessions, possession/win-rate metrics, reports.

A session plays a synthetic player (always side A) against an opponent chosen
by one of the difficulty-adjustment methods:

- ``fast_adapt``:  meta-learned policy adapted to the player's pre-session demo
- ``lstm_fc``:     embedding-conditioned policy from the demo sequence
- ``ladder``:      scripted archetype whose level follows the win/loss ladder
- ``fixed_level``: scripted archetype pinned at one level (no adjustment)
- ``control``:     a scripted clone of the evaluated player (symmetry check)

Every session is fully deterministic given the plan seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, kernels, meta, nets, players, rink
from .errors import AssetError, ConfigurationError, EmptyInputError

FAST_ADAPT = "fast_adapt"
LSTM_FC = "lstm_fc"
LADDER = "ladder"
FIXED_LEVEL = "fixed_level"
CONTROL = "control"

METHODS = (FAST_ADAPT, LSTM_FC, LADDER, FIXED_LEVEL, CONTROL)

NEUTRAL_LEVEL = 5
LADDER_START_LEVEL = 5


@dataclass(frozen=True)
class SessionPlan:
    """Timing and method for one evaluation session (steps at 60 Hz)."""

    method: str
    seed: int = 0
    pre_session_steps: int = 3600
    session_steps: int = 14400
    readapt_at: int = 7200
    fixed_level: int = 9

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}; expected one of {METHODS}"
            )
        if self.pre_session_steps <= 0:
            raise ConfigurationError("pre_session_steps must be positive")
        if not (0 < self.readapt_at < self.session_steps):
            raise ConfigurationError(
                "readapt_at must satisfy 0 < readapt_at < session_steps"
            )
        if not (1 <= self.fixed_level <= 9):
            raise ConfigurationError("fixed_level must be in [1, 9]")


@dataclass(frozen=True)
class SessionResult:
    """Outcome of one session from the evaluated player's perspective."""

    method: str
    player_id: str
    seed: int
    goals_for: int
    goals_against: int
    possession_frac: float
    end_level: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.possession_frac <= 1.0):
            raise ConfigurationError("possession_frac must lie in [0, 1]")

    @property
    def win_rate(self) -> float | None:
        """Goal share for this session, or None when no goals were scored."""
        total = self.goals_for + self.goals_against
        if total == 0:
            return None
        return self.goals_for / total


@dataclass(frozen=True)
class MethodMetrics:
    method: str
    n_sessions: int
    win_rate_mean: float | None
    win_rate_sd: float | None
    possession_mean: float
    possession_sd: float


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[MethodMetrics, ...]

    def row(self, method: str) -> MethodMetrics:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


@dataclass
class EvalAssets:
    """Trained artifacts required by the neural methods."""

    meta_params: nets.ParamVector | None = None
    meta_cfg: meta.MetaConfig = field(default_factory=meta.MetaConfig)
    lstmfc_params: baselines.LstmFcParams | None = None


def _outcome(goals_for: int, goals_against: int) -> str:
    if goals_for > goals_against:
        return baselines.PLAYER_WIN
    if goals_for < goals_against:
        return baselines.PLAYER_LOSS
    return baselines.DRAW


def compute_possession(trace) -> float:
    """Fraction of steps with the puck on the evaluated player's half (y < 1.0)."""
    ys = np.asarray(trace, dtype=np.float64)
    if ys.size == 0:
        raise EmptyInputError("possession trace is empty")
    return float(np.mean(ys < 1.0))


def _policy_act(params: nets.ParamVector, obs: np.ndarray) -> np.ndarray:
    out, _ = nets.mlp_forward(params, obs)
    return np.clip(out, -1.0, 1.0)


class _Opponent:
    """Side-B actor for a session; swapped wholesale at adjustment boundaries."""

    def __init__(self) -> None:
        self.kind = "scripted"
        self.params: nets.ParamVector | None = None
        self.lstmfc: baselines.LstmFcParams | None = None
        self.embedding: np.ndarray | None = None
        self.archetype: players.Archetype | None = None
        self.controller: players.ControllerState | None = None

    def act(self, obs: np.ndarray) -> np.ndarray:
        if self.kind == "policy":
            return _policy_act(self.params, obs)
        if self.kind == "lstm_fc":
            a = baselines.lstmfc_act(self.lstmfc, self.embedding, obs)
            return np.clip(a, -1.0, 1.0)
        action, self.controller = players.scripted_act(
            self.archetype, obs, self.controller
        )
        return action


def _scripted_opponent(arch: players.Archetype, seed: int) -> _Opponent:
    opp = _Opponent()
    opp.kind = "scripted"
    opp.archetype = arch
    opp.controller = players.make_controller(arch, seed)
    return opp


def _demo_trajectory(obs_list, act_list, source: str, seed: int) -> meta.Trajectory:
    return meta.Trajectory(
        observations=np.asarray(obs_list, dtype=np.float64),
        actions=np.asarray(act_list, dtype=np.float64),
        source=source,
        seed=seed,
    )


def _play_block(
    sv: np.ndarray,
    n_steps: int,
    player: players.Archetype,
    player_ctrl: players.ControllerState,
    opponent: _Opponent,
    config: rink.RinkConfig,
    demo_obs: list,
    demo_act: list,
    puck_ys: list,
):
    """Advance the match n_steps; returns (state, goals_for, goals_against)."""
    cv = config.to_vector()
    goals_for = 0
    goals_against = 0
    for _ in range(n_steps):
        obs_a = rink.observe_vector(sv, rink.SIDE_A, config)
        obs_b = rink.observe_vector(sv, rink.SIDE_B, config)
        act_a, player_ctrl = players.scripted_act(player, obs_a, player_ctrl)
        act_b = opponent.act(obs_b)
        demo_obs.append(obs_a)
        demo_act.append(act_a)
        sv, goal, _, _ = kernels.step_kernel(
            sv, act_a[0], act_a[1], act_b[0], act_b[1], cv
        )
        puck_ys.append(sv[1])
        if goal == kernels.GOAL_FOR_A:
            goals_for += 1
        elif goal == kernels.GOAL_FOR_B:
            goals_against += 1
    return sv, goals_for, goals_against, player_ctrl


def run_session(
    plan: SessionPlan,
    player: players.Archetype,
    assets: EvalAssets | None = None,
    config: rink.RinkConfig | None = None,
) -> SessionResult:
    """Pre-session baseline play, method-specific adjustment, timed match.

    The evaluated player occupies side A throughout. Adjustment happens once
    after the pre-session and once more at ``readapt_at`` using data gathered
    during the session itself.
    """
    assets = assets or EvalAssets()
    config = config or rink.RinkConfig()
    if plan.method == FAST_ADAPT and assets.meta_params is None:
        raise AssetError("fast_adapt requires meta_params")
    if plan.method == LSTM_FC and assets.lstmfc_params is None:
        raise AssetError("lstm_fc requires lstmfc_params")

    base_seed = plan.seed
    player_ctrl = players.make_controller(player, base_seed * 4 + 1)

    # Phase 1: pre-session vs the fixed neutral opponent, recording the demo.
    sv = rink.reset(config, base_seed).to_vector()
    neutral = baselines.level_to_archetype(NEUTRAL_LEVEL)
    opponent = _scripted_opponent(neutral, base_seed * 4 + 2)
    pre_obs: list = []
    pre_act: list = []
    pre_ys: list = []
    sv, pre_for, pre_against, player_ctrl = _play_block(
        sv, plan.pre_session_steps, player, player_ctrl, opponent,
        config, pre_obs, pre_act, pre_ys,
    )

    level = LADDER_START_LEVEL
    if plan.method == LADDER:
        level = baselines.ladder_update(level, _outcome(pre_for, pre_against))

    opponent = _make_method_opponent(
        plan, player, assets, base_seed,
        _demo_trajectory(pre_obs, pre_act, player.id, base_seed), level,
    )

    # Phase 2: the session proper, with a mid-point re-adjustment.
    sv = rink.reset(config, base_seed + 1).to_vector()
    sess_obs: list = []
    sess_act: list = []
    sess_ys: list = []
    sv, gf1, ga1, player_ctrl = _play_block(
        sv, plan.readapt_at, player, player_ctrl, opponent,
        config, sess_obs, sess_act, sess_ys,
    )

    if plan.method == LADDER:
        level = baselines.ladder_update(level, _outcome(gf1, ga1))
    opponent = _make_method_opponent(
        plan, player, assets, base_seed + 1,
        _demo_trajectory(sess_obs, sess_act, player.id, base_seed), level,
        reuse=opponent,
    )

    sv, gf2, ga2, player_ctrl = _play_block(
        sv, plan.session_steps - plan.readapt_at, player, player_ctrl, opponent,
        config, sess_obs, sess_act, sess_ys,
    )

    return SessionResult(
        method=plan.method,
        player_id=player.id,
        seed=plan.seed,
        goals_for=gf1 + gf2,
        goals_against=ga1 + ga2,
        possession_frac=compute_possession(sess_ys),
        end_level=(
            level if plan.method == LADDER
            else plan.fixed_level if plan.method == FIXED_LEVEL
            else None
        ),
    )


def _make_method_opponent(
    plan: SessionPlan,
    player: players.Archetype,
    assets: EvalAssets,
    seed: int,
    demo: meta.Trajectory,
    level: int,
    reuse: _Opponent | None = None,
) -> _Opponent:
    if plan.method == FAST_ADAPT:
        opp = _Opponent()
        opp.kind = "policy"
        opp.params = meta.adapt_to_player(assets.meta_params, demo, assets.meta_cfg)
        return opp
    if plan.method == LSTM_FC:
        opp = _Opponent()
        opp.kind = "lstm_fc"
        opp.lstmfc = assets.lstmfc_params
        opp.embedding = baselines.lstmfc_embed(assets.lstmfc_params, demo)
        return opp
    if plan.method == LADDER:
        return _scripted_opponent(baselines.level_to_archetype(level), seed * 4 + 3)
    if plan.method == FIXED_LEVEL:
        if reuse is not None:
            return reuse  # no adjustment: keep the running controller
        return _scripted_opponent(
            baselines.level_to_archetype(plan.fixed_level), seed * 4 + 3
        )
    # control: a scripted clone of the evaluated player
    if reuse is not None:
        return reuse
    return _scripted_opponent(player, seed * 4 + 3)


def aggregate(results) -> MetricsReport:
    """Per-method mean/sd of win rate and possession.

    Sessions with zero total goals are excluded from the win-rate aggregate
    (rate undefined) but always count toward possession.
    """
    results = list(results)
    if not results:
        raise EmptyInputError("no session results to aggregate")
    methods: list[str] = []
    for r in results:
        if r.method not in methods:
            methods.append(r.method)
    rows = []
    for m in sorted(methods):
        group = [r for r in results if r.method == m]
        poss = np.array([r.possession_frac for r in group])
        rates = np.array([r.win_rate for r in group if r.win_rate is not None])
        if rates.size:
            wr_mean, wr_sd = float(rates.mean()), float(rates.std())
        else:
            wr_mean = wr_sd = None
        rows.append(
            MethodMetrics(
                method=m,
                n_sessions=len(group),
                win_rate_mean=wr_mean,
                win_rate_sd=wr_sd,
                possession_mean=float(poss.mean()),
                possession_sd=float(poss.std()),
            )
        )
    return MetricsReport(rows=tuple(rows))


_CSV_COLUMNS = (
    "method",
    "n_sessions",
    "win_rate_mean",
    "win_rate_sd",
    "possession_mean",
    "possession_sd",
)


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "rows": [
            {c: getattr(r, c) for c in _CSV_COLUMNS} for r in report.rows
        ]
    }


def report_from_dict(data: dict) -> MetricsReport:
    return MetricsReport(
        rows=tuple(MethodMetrics(**row) for row in data["rows"])
    )


def render_report(report: MetricsReport, fmt: str) -> str:
    """Serialize a report to a json or csv string (stable column order)."""
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for r in report.rows:
            writer.writerow(
                [
                    r.method,
                    r.n_sessions,
                    _fmt_rate(r.win_rate_mean),
                    _fmt_rate(r.win_rate_sd),
                    _fmt_rate(r.possession_mean),
                    _fmt_rate(r.possession_sd),
                ]
            )
        return buf.getvalue()
    raise ConfigurationError(f"unknown report format {fmt!r}")


def _fmt_rate(value: float | None) -> str:
    if value is None:
        return "undefined"
    return f"{value:.4f}"


def export_report(report: MetricsReport, path: str, fmt: str = "json") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_report(report, fmt))


def run_population(
    methods,
    population,
    assets: EvalAssets | None = None,
    plan_template: SessionPlan | None = None,
    seed0: int = 0,
) -> list[SessionResult]:
    """One session per (method, player); seeds derive from position for determinism."""
    template = plan_template or SessionPlan(method=METHODS[0])
    out: list[SessionResult] = []
    for m in methods:
        for i, player in enumerate(population):
            plan = replace(template, method=m, seed=seed0 + i)
            out.append(run_session(plan, player, assets))
    return out


def training_throughput(
    splits,
    epochs: int = 3,
    seed: int = 0,
    meta_cfg: meta.MetaConfig | None = None,
) -> dict:
    """Wall-clock per epoch for both trainers on the same task set, plus ratio.

    An epoch is one optimizer pass over every task split. The ratio is
    environment-specific and reported for information only.
    """
    splits = list(splits)
    if not splits:
        raise EmptyInputError("no task splits provided")
    cfg = meta_cfg or meta.MetaConfig()
    n = len(splits)

    cfg = replace(cfg, iterations=epochs, meta_batch_size=n)
    t0 = time.perf_counter()
    meta.meta_train(cfg, lambda it: splits, init_seed=seed)
    fast_s = (time.perf_counter() - t0) / epochs

    train_cfg = baselines.LstmFcTrainConfig(
        iterations=epochs, tasks_per_batch=n, lr=cfg.outer_lr
    )
    t0 = time.perf_counter()
    baselines.lstmfc_train(splits, train_cfg, seed=seed)
    lstm_s = (time.perf_counter() - t0) / epochs

    ratio = lstm_s / fast_s if fast_s > 0 else math.inf
    return {
        "fast_adapt_s_per_epoch": fast_s,
        "lstm_fc_s_per_epoch": lstm_s,
        "lstm_fc_over_fast_adapt": ratio,
    }
