"""Real-time authoritative game server.

A :class:`Session` is a pure, synchronously steppable state machine
(one call per 60 Hz tick) so the protocol can be tested without sockets.
``create_app`` wraps it in a FastAPI WebSocket endpoint. The session walks
the phase order::

    practice -> pre_session -> adapting -> first_half -> break
             -> second_half -> finished

Physics freezes during ``adapting`` and ``break``. The opponent policy is
recomputed from the human demo buffer at both adjustment points and installed
atomically at a tick boundary.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import baselines, evalharness, kernels, meta, rink
from .errors import ConfigurationError, UnsupportedModeError

logger = logging.getLogger(__name__)

PRACTICE = "practice"
PRE_SESSION = "pre_session"
ADAPTING = "adapting"
FIRST_HALF = "first_half"
BREAK = "break"
SECOND_HALF = "second_half"
FINISHED = "finished"

PHASE_ORDER = (PRACTICE, PRE_SESSION, ADAPTING, FIRST_HALF, BREAK,
               SECOND_HALF, FINISHED)

PROTOCOL_ERROR_CODE = 1003
SESSION_METHODS = (evalharness.FAST_ADAPT, evalharness.LSTM_FC,
                   evalharness.LADDER)


@dataclass(frozen=True)
class SessionTimings:
    """Tick budget per phase (60 ticks per second)."""

    practice_ticks: int = 600
    pre_session_ticks: int = 3600
    half_ticks: int = 7200
    break_ticks: int = 600
    adapting_ticks: int = 60

    def __post_init__(self) -> None:
        for name in ("practice_ticks", "pre_session_ticks", "half_ticks",
                     "break_ticks", "adapting_ticks"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")


class Session:
    """One authoritative session; the human plays side A."""

    def __init__(
        self,
        method: str,
        seed: int,
        assets: evalharness.EvalAssets | None = None,
        timings: SessionTimings | None = None,
        config: rink.RinkConfig | None = None,
    ) -> None:
        if method not in SESSION_METHODS:
            raise ConfigurationError(
                f"unknown method {method!r}; expected one of {SESSION_METHODS}"
            )
        self.method = method
        self.seed = seed
        self.assets = assets or evalharness.EvalAssets()
        self.timings = timings or SessionTimings()
        self.config = config or rink.RinkConfig()
        self._cv = self.config.to_vector()

        self.phase = PRACTICE
        self.tick = 0
        self.phase_ticks_left = self.timings.practice_ticks
        self.score = [0, 0]
        self.last_input = np.zeros(2)
        self.malformed_inputs = 0
        self.level = evalharness.LADDER_START_LEVEL
        self.demo_obs: list[np.ndarray] = []
        self.demo_act: list[np.ndarray] = []
        self._puck_ys: list[float] = []
        self._half_score_mark = (0, 0)
        self._lock = threading.Lock()
        self._pending_opponent: evalharness._Opponent | None = None

        self._sv = rink.reset(self.config, seed).to_vector()
        self._opponent = evalharness._scripted_opponent(
            baselines.level_to_archetype(evalharness.NEUTRAL_LEVEL),
            seed * 4 + 2,
        )

    # -- tick loop ---------------------------------------------------------

    def advance_tick(self, human_input=None) -> list[dict]:
        """Step one tick; returns outbound messages (state, phase, score, report)."""
        if self.phase == FINISHED:
            raise ConfigurationError("session already finished")
        messages: list[dict] = []

        with self._lock:
            if self._pending_opponent is not None:
                self._opponent = self._pending_opponent
                self._pending_opponent = None

        if human_input is not None:
            self.last_input = np.clip(
                np.asarray(human_input, dtype=np.float64), -1.0, 1.0
            )

        frozen = self.phase in (ADAPTING, BREAK)
        if not frozen:
            self._step_physics(messages)

        self.tick += 1
        self.phase_ticks_left -= 1
        if self.phase_ticks_left <= 0:
            self._advance_phase(messages)

        messages.insert(0, self.state_message())
        return messages

    def _step_physics(self, messages: list[dict]) -> None:
        obs_a = rink.observe_vector(self._sv, rink.SIDE_A, self.config)
        obs_b = rink.observe_vector(self._sv, rink.SIDE_B, self.config)
        act_a = self.last_input
        act_b = self._opponent.act(obs_b)
        if self.phase in (PRE_SESSION, FIRST_HALF, SECOND_HALF):
            self.demo_obs.append(obs_a)
            self.demo_act.append(act_a.copy())
        self._sv, goal, _, _ = kernels.step_kernel(
            self._sv, act_a[0], act_a[1], act_b[0], act_b[1], self._cv
        )
        if self.phase in (FIRST_HALF, SECOND_HALF):
            self._puck_ys.append(float(self._sv[1]))
        if goal == kernels.GOAL_FOR_A:
            self.score[0] += 1
        elif goal == kernels.GOAL_FOR_B:
            self.score[1] += 1
        if goal != kernels.GOAL_NONE:
            messages.append(
                {"type": "score", "tick": self.tick, "score": list(self.score)}
            )

    def _advance_phase(self, messages: list[dict]) -> None:
        nxt = PHASE_ORDER[PHASE_ORDER.index(self.phase) + 1]
        self.phase = nxt
        budgets = {
            PRE_SESSION: self.timings.pre_session_ticks,
            ADAPTING: self.timings.adapting_ticks,
            FIRST_HALF: self.timings.half_ticks,
            BREAK: self.timings.break_ticks,
            SECOND_HALF: self.timings.half_ticks,
            FINISHED: 0,
        }
        self.phase_ticks_left = budgets[nxt]
        if nxt == PRE_SESSION:
            # practice play is excluded from everything: wipe state and score
            self.score = [0, 0]
            self.demo_obs.clear()
            self.demo_act.clear()
            self._sv = rink.reset(self.config, self.seed + 1).to_vector()
        elif nxt == ADAPTING:
            self._half_score_mark = tuple(self.score)
        elif nxt == BREAK:
            self._half_score_mark = tuple(self.score)
        elif nxt == FIRST_HALF:
            self.score = [0, 0]
            self.demo_obs.clear()
            self.demo_act.clear()
            self._sv = rink.reset(self.config, self.seed + 2).to_vector()
        messages.append(
            {"type": "phase", "phase": nxt, "tick": self.tick,
             "ticks": self.phase_ticks_left}
        )
        if nxt == FINISHED:
            messages.append(self.report_message())

    # -- adjustment --------------------------------------------------------

    def trigger_adaptation(self) -> None:
        """Recompute the opponent from buffered demos; install at a tick boundary."""
        if self.phase not in (ADAPTING, BREAK):
            raise ConfigurationError(
                f"adaptation only allowed during adapting/break, not {self.phase}"
            )
        with self._lock:
            obs_snap = list(self.demo_obs)
            act_snap = list(self.demo_act)
        if self.method == evalharness.LADDER:
            gf = self.score[0]
            ga = self.score[1]
            self.level = baselines.ladder_update(
                self.level, evalharness._outcome(gf, ga)
            )
            opp = evalharness._scripted_opponent(
                baselines.level_to_archetype(self.level), self.seed * 4 + 3
            )
        elif not obs_snap:
            logger.warning("empty demo buffer; falling back to meta-parameters")
            opp = evalharness._Opponent()
            if self.method == evalharness.FAST_ADAPT:
                opp.kind = "policy"
                opp.params = self.assets.meta_params
            else:
                opp.kind = "lstm_fc"
                opp.lstmfc = self.assets.lstmfc_params
                opp.embedding = np.zeros(baselines.EMBED_DIM)
        else:
            demo = meta.Trajectory(
                observations=np.asarray(obs_snap, dtype=np.float64),
                actions=np.asarray(act_snap, dtype=np.float64),
                source="human",
                seed=self.seed,
            )
            opp = evalharness._Opponent()
            if self.method == evalharness.FAST_ADAPT:
                opp.kind = "policy"
                opp.params = meta.adapt_to_player(
                    self.assets.meta_params, demo, self.assets.meta_cfg
                )
            else:
                opp.kind = "lstm_fc"
                opp.lstmfc = self.assets.lstmfc_params
                opp.embedding = baselines.lstmfc_embed(
                    self.assets.lstmfc_params, demo
                )
        with self._lock:
            self._pending_opponent = opp

    # -- messages ----------------------------------------------------------

    def state_message(self) -> dict:
        sv = self._sv
        return {
            "type": "state",
            "tick": self.tick,
            "phase": self.phase,
            "puck": [float(sv[0]), float(sv[1]), float(sv[2]), float(sv[3])],
            "you": [float(sv[4]), float(sv[5])],
            "opp": [float(sv[8]), float(sv[9])],
            "score": list(self.score),
        }

    def report_message(self) -> dict:
        possession = (
            evalharness.compute_possession(self._puck_ys)
            if self._puck_ys else 0.0
        )
        return {
            "type": "report",
            "method": self.method,
            "score": list(self.score),
            "possession": possession,
            "ticks": self.tick,
        }


def handle_client_message(session: Session, raw: str):
    """Parse one inbound message; returns an action array, None, or 'close'."""
    try:
        msg = json.loads(raw)
        mtype = msg["type"]
    except (json.JSONDecodeError, TypeError, KeyError):
        session.malformed_inputs += 1
        return None
    if mtype != "input":
        return "close"
    try:
        target = msg["target"]
        action = np.asarray([float(target[0]), float(target[1])])
        if not np.all(np.isfinite(action)):
            raise ValueError
    except (KeyError, TypeError, ValueError, IndexError):
        session.malformed_inputs += 1
        return None
    return np.clip(action, -1.0, 1.0)


def create_app(
    assets: evalharness.EvalAssets | None = None,
    timings: SessionTimings | None = None,
    tick_interval: float = 1.0 / 60.0,
    config: rink.RinkConfig | None = None,
):
    """FastAPI app exposing the session protocol on ``/ws``.

    ``tick_interval=0`` runs in lockstep (one tick per inbound message),
    which makes protocol tests deterministic and fast.
    """
    app = FastAPI(title="hockeydda live service")

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        try:
            raw = await websocket.receive_text()
            hello = json.loads(raw)
            if hello.get("type") != "hello":
                await websocket.close(code=PROTOCOL_ERROR_CODE)
                return
            session = Session(
                method=hello.get("method", evalharness.LADDER),
                seed=int(hello.get("seed", 0)),
                assets=assets,
                timings=timings,
                config=config,
            )
        except (json.JSONDecodeError, ConfigurationError, ValueError,
                UnsupportedModeError):
            await websocket.close(code=PROTOCOL_ERROR_CODE)
            return
        await websocket.send_text(json.dumps(
            {"type": "phase", "phase": session.phase, "tick": 0,
             "ticks": session.phase_ticks_left}
        ))
        try:
            if tick_interval == 0:
                await _run_lockstep(websocket, session)
            else:
                await _run_realtime(websocket, session, tick_interval)
        except WebSocketDisconnect:
            return

    return app


async def _drive_adaptation(session: Session) -> None:
    try:
        await asyncio.to_thread(session.trigger_adaptation)
    except Exception:
        logger.exception("adaptation failed; keeping current opponent")


async def _send_all(websocket, messages) -> None:
    for msg in messages:
        await websocket.send_text(json.dumps(msg))


async def _tick_once(websocket, session, action, adapt_task):
    """Advance one tick, kick off adaptation on phase entry, send messages."""
    prev_phase = session.phase
    messages = session.advance_tick(action)
    if session.phase in (ADAPTING, BREAK) and session.phase != prev_phase:
        adapt_task = asyncio.create_task(_drive_adaptation(session))
    if adapt_task is not None and adapt_task.done():
        adapt_task = None
    await _send_all(websocket, messages)
    return adapt_task


async def _run_lockstep(websocket, session: Session) -> None:
    adapt_task = None
    await websocket.send_text(json.dumps(session.state_message()))
    while session.phase != FINISHED:
        raw = await websocket.receive_text()
        result = handle_client_message(session, raw)
        if isinstance(result, str):
            await websocket.close(code=PROTOCOL_ERROR_CODE)
            return
        if adapt_task is not None:
            await adapt_task
            adapt_task = None
        adapt_task = await _tick_once(websocket, session, result, adapt_task)
    if adapt_task is not None:
        await adapt_task
    await websocket.close()


async def _run_realtime(websocket, session: Session,
                        tick_interval: float) -> None:
    queue: asyncio.Queue = asyncio.Queue()

    async def reader() -> None:
        while True:
            queue.put_nowait(await websocket.receive_text())

    reader_task = asyncio.create_task(reader())
    adapt_task = None
    try:
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while session.phase != FINISHED:
            action = None
            close = False
            while not queue.empty():
                result = handle_client_message(session, queue.get_nowait())
                if isinstance(result, str):
                    close = True
                elif result is not None:
                    action = result
            if close:
                await websocket.close(code=PROTOCOL_ERROR_CODE)
                return
            adapt_task = await _tick_once(websocket, session, action,
                                          adapt_task)
            next_tick += tick_interval
            delay = next_tick - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
        await websocket.close()
    finally:
        reader_task.cancel()
        if adapt_task is not None:
            await adapt_task


def main_serve(port: int, assets: evalharness.EvalAssets | None = None,
               timings: SessionTimings | None = None) -> None:
    import uvicorn

    app = create_app(assets=assets, timings=timings)
    uvicorn.run(app, host="0.0.0.0", port=port)
