"""Tests for the live session service: phase machine and websocket protocol."""

from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from hockeydda import baselines, evalharness as ev, meta, nets, service
from hockeydda.errors import ConfigurationError


TINY = service.SessionTimings(
    practice_ticks=20, pre_session_ticks=40, half_ticks=60,
    break_ticks=10, adapting_ticks=5,
)


def tiny_assets() -> ev.EvalAssets:
    cfg = meta.MetaConfig(policy_dims=(8, 16, 2), adapt_steps=2)
    params = nets.init_params(nets.mlp_layout(cfg.policy_dims), seed=7)
    lstmfc = baselines.init_lstmfc(
        seed=7, embed_dim=4, lstm_layers=1, fc_hidden=16, fc_layers=2
    )
    return ev.EvalAssets(meta_params=params, meta_cfg=cfg, lstmfc_params=lstmfc)


def drive_to_phase(session: service.Session, phase: str) -> None:
    while session.phase != phase:
        session.advance_tick()


class TestSessionTimings:
    def test_positive_budgets_required(self):
        with pytest.raises(ConfigurationError):
            service.SessionTimings(break_ticks=0)


class TestPhaseMachine:
    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigurationError):
            service.Session("bogus", seed=0)

    def test_phases_visit_exact_order(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        seen = [session.phase]
        while session.phase != service.FINISHED:
            for msg in session.advance_tick():
                if msg["type"] == "phase":
                    seen.append(msg["phase"])
        assert tuple(seen) == service.PHASE_ORDER

    def test_phase_budgets_respected(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        counts: dict[str, int] = {}
        while session.phase != service.FINISHED:
            counts[session.phase] = counts.get(session.phase, 0) + 1
            session.advance_tick()
        assert counts == {
            service.PRACTICE: TINY.practice_ticks,
            service.PRE_SESSION: TINY.pre_session_ticks,
            service.ADAPTING: TINY.adapting_ticks,
            service.FIRST_HALF: TINY.half_ticks,
            service.BREAK: TINY.break_ticks,
            service.SECOND_HALF: TINY.half_ticks,
        }

    def test_physics_frozen_during_adapting_and_break(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        for phase in (service.ADAPTING, service.BREAK):
            drive_to_phase(session, phase)
            before = session.state_message()
            session.advance_tick(human_input=[1.0, 1.0])
            after = session.state_message()
            assert after["puck"] == before["puck"]
            assert after["you"] == before["you"]
            assert after["opp"] == before["opp"]

    def test_pre_session_fills_demo_buffer(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        drive_to_phase(session, service.ADAPTING)
        assert len(session.demo_obs) == TINY.pre_session_ticks
        assert len(session.demo_act) == TINY.pre_session_ticks

    def test_first_half_entry_resets_score_and_buffers(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        drive_to_phase(session, service.FIRST_HALF)
        assert session.score == [0, 0]
        assert session.demo_obs == []

    def test_finished_session_rejects_ticks(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        drive_to_phase(session, service.FINISHED)
        with pytest.raises(ConfigurationError):
            session.advance_tick()

    def test_hold_last_input(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        session.advance_tick(human_input=[0.3, -0.4])
        session.advance_tick()
        assert session.last_input.tolist() == [0.3, -0.4]

    def test_input_clipped_to_unit_box(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        session.advance_tick(human_input=[5.0, -5.0])
        assert session.last_input.tolist() == [1.0, -1.0]


class TestAdaptation:
    def test_only_allowed_in_adapting_or_break(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        with pytest.raises(ConfigurationError):
            session.trigger_adaptation()

    def test_ladder_moves_with_score(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        drive_to_phase(session, service.ADAPTING)
        session.score = [3, 1]
        session.trigger_adaptation()
        assert session.level == ev.LADDER_START_LEVEL + 1
        session.score = [3, 5]
        session.trigger_adaptation()
        assert session.level == ev.LADDER_START_LEVEL

    def test_pending_opponent_installs_at_tick_boundary(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        drive_to_phase(session, service.ADAPTING)
        old = session._opponent
        session.trigger_adaptation()
        assert session._opponent is old
        session.advance_tick()
        assert session._opponent is not old

    def test_fast_adapt_empty_buffer_falls_back_to_meta_params(self):
        assets = tiny_assets()
        session = service.Session(ev.FAST_ADAPT, seed=0, assets=assets,
                                  timings=TINY)
        drive_to_phase(session, service.ADAPTING)
        session.demo_obs.clear()
        session.demo_act.clear()
        session.trigger_adaptation()
        opp = session._pending_opponent
        assert opp.kind == "policy"
        assert np.array_equal(opp.params.values, assets.meta_params.values)

    def test_fast_adapt_produces_adapted_policy(self):
        assets = tiny_assets()
        session = service.Session(ev.FAST_ADAPT, seed=0, assets=assets,
                                  timings=TINY)
        drive_to_phase(session, service.ADAPTING)
        session.trigger_adaptation()
        opp = session._pending_opponent
        assert opp.kind == "policy"
        assert not np.array_equal(opp.params.values, assets.meta_params.values)

    def test_lstm_fc_produces_embedding(self):
        assets = tiny_assets()
        session = service.Session(ev.LSTM_FC, seed=0, assets=assets,
                                  timings=TINY)
        drive_to_phase(session, service.ADAPTING)
        session.trigger_adaptation()
        opp = session._pending_opponent
        assert opp.kind == "lstm_fc"
        assert opp.embedding.shape == (4,)


class TestClientMessages:
    def test_valid_input_parsed_and_clipped(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        out = service.handle_client_message(
            session, json.dumps({"type": "input", "target": [2.0, -0.5]})
        )
        assert out.tolist() == [1.0, -0.5]

    def test_malformed_messages_counted_not_fatal(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        for raw in ("not json", "{}", json.dumps({"type": "input"}),
                    json.dumps({"type": "input", "target": ["a", "b"]}),
                    json.dumps({"type": "input", "target": [float("nan"), 0]})):
            assert service.handle_client_message(session, raw) is None
        assert session.malformed_inputs == 5

    def test_non_input_type_requests_close(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        raw = json.dumps({"type": "surprise"})
        assert service.handle_client_message(session, raw) == "close"


class TestStateMessage:
    def test_schema(self):
        session = service.Session(ev.LADDER, seed=0, timings=TINY)
        msg = session.state_message()
        assert msg["type"] == "state"
        assert msg["phase"] == service.PRACTICE
        assert len(msg["puck"]) == 4
        assert len(msg["you"]) == 2
        assert len(msg["opp"]) == 2
        assert msg["score"] == [0, 0]
        json.dumps(msg)


class TestWebsocketProtocol:
    @staticmethod
    def client():
        app = service.create_app(assets=tiny_assets(), timings=TINY,
                                 tick_interval=0)
        return TestClient(app)

    def test_missing_hello_closes_1003(self):
        with self.client().websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "input", "target": [0, 0]}))
            assert ws.receive()["code"] == service.PROTOCOL_ERROR_CODE

    def test_bad_method_closes_1003(self):
        with self.client().websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "method": "bogus"}))
            assert ws.receive()["code"] == service.PROTOCOL_ERROR_CODE

    def test_unknown_type_after_hello_closes_1003(self):
        with self.client().websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "method": ev.LADDER}))
            assert json.loads(ws.receive_text())["type"] == "phase"
            assert json.loads(ws.receive_text())["type"] == "state"
            ws.send_text(json.dumps({"type": "surprise"}))
            assert ws.receive()["code"] == service.PROTOCOL_ERROR_CODE

    def test_full_lockstep_session(self):
        total = (TINY.practice_ticks + TINY.pre_session_ticks
                 + TINY.adapting_ticks + 2 * TINY.half_ticks
                 + TINY.break_ticks)
        with self.client().websocket_connect("/ws") as ws:
            ws.send_text(json.dumps(
                {"type": "hello", "method": ev.FAST_ADAPT, "seed": 1}
            ))
            hello_phase = json.loads(ws.receive_text())
            first_state = json.loads(ws.receive_text())
            assert hello_phase["type"] == "phase"
            assert first_state["type"] == "state"

            states, phases = [], []
            report = None

            def read_until_state():
                nonlocal report
                while True:
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "state":
                        states.append(msg)
                        return
                    if msg["type"] == "phase":
                        phases.append(msg["phase"])
                    elif msg["type"] == "report":
                        report = msg
                        return

            # One input per tick; extra score/phase messages trail each state.
            for _ in range(total):
                ws.send_text(json.dumps(
                    {"type": "input", "target": [0.1, 0.2]}
                ))
                read_until_state()
            # Final batch: phase(finished) + report follow the last state.
            while report is None:
                read_until_state()
            assert len(states) == total
            assert phases == list(service.PHASE_ORDER[1:])
            assert report["method"] == ev.FAST_ADAPT
            assert 0.0 <= report["possession"] <= 1.0
            assert report["ticks"] == total
            assert ws.receive()["type"] == "websocket.close"
