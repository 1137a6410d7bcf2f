import time

import pytest
from fastapi.testclient import TestClient

from r2assist.service import EventBus, SeqExpiredError, SessionState, create_app

from conftest import ScriptedProvider, text_response, tool_response


def wait_until(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.01)
    return False


@pytest.fixture
def state(registry, mock_session):
    provider = ScriptedProvider([
        tool_response(("r2cmd", {"command": "pdf main"})),
        text_response("main prints hello"),
    ])
    return SessionState(registry=registry, provider=provider,
                        disasm_session=mock_session)


@pytest.fixture
def client(state):
    return TestClient(create_app(state))


class TestEventBus:
    def test_seq_monotone_from_one(self):
        bus = EventBus()
        seqs = [bus.emit("status_updated", {"n": i})["seq"] for i in range(5)]
        assert seqs == [1, 2, 3, 4, 5]

    def test_replay_from_zero_returns_all(self):
        bus = EventBus()
        for i in range(4):
            bus.emit("status_updated", {"n": i})
        assert [e["payload"]["n"] for e in bus.replay(0)] == [0, 1, 2, 3]

    def test_resume_mid_stream(self):
        bus = EventBus()
        for i in range(6):
            bus.emit("status_updated", {"n": i})
        assert [e["seq"] for e in bus.replay(3)] == [4, 5, 6]

    def test_two_subscribers_identical(self):
        bus = EventBus()
        for i in range(10):
            bus.emit("status_updated", {"n": i})
        assert bus.replay(0) == bus.replay(0)

    def test_retention_expires_old_seqs(self):
        bus = EventBus(retention=5)
        for i in range(12):
            bus.emit("status_updated", {"n": i})
        with pytest.raises(SeqExpiredError):
            bus.replay(0)
        assert [e["seq"] for e in bus.replay(7)] == [8, 9, 10, 11, 12]


class TestStateEndpoint:
    def test_fresh_state(self, client):
        payload = client.get("/state").json()
        assert payload["phase"] == "idle"
        assert payload["run_count"] == 0
        assert payload["total_cost"] == 0.0
        assert "$0.0000000000" in payload["status_line"]
        assert payload["pending_approvals"] == []
        assert payload["message_count"] == 0

    def test_transcript_empty(self, client):
        log = client.get("/transcript").json()
        assert log["messages"] == []


class TestSettingsEndpoint:
    def test_set_and_read_back(self, client):
        r = client.post("/settings", json={"key": "temperature",
                                           "value": "0.7"})
        assert r.status_code == 200
        assert client.get("/settings").json()["temperature"] == 0.7

    def test_unknown_key_rejected(self, client):
        r = client.post("/settings", json={"key": "nope", "value": "1"})
        assert r.status_code == 400

    def test_no_secrets_in_settings(self, client, monkeypatch):
        monkeypatch.setenv("ANTHROPIC_API_KEY", "sk-ant-secret-123")
        body = client.get("/settings").text
        assert "sk-ant-secret-123" not in body


class TestAutoFlow:
    def test_auto_query_with_approval_roundtrip(self, state, client):
        r = client.post("/query", json={"mode": "auto", "text": "what is main?"})
        assert r.status_code == 200

        assert wait_until(lambda: state.pending_approvals())
        pending = client.get("/state").json()["pending_approvals"]
        assert pending[0]["tool"] == "r2cmd"
        assert pending[0]["payload"] == "pdf main"

        r = client.post(f"/approvals/{pending[0]['request_id']}",
                        json={"verdict": "approve"})
        assert r.status_code == 200

        state.wait()
        final = client.get("/state").json()
        assert final["phase"] == "done"
        assert final["final_answer"] == "main prints hello"
        assert final["run_count"] == 2

    def test_busy_rejected_with_409(self, registry, mock_session):
        provider = ScriptedProvider([
            tool_response(("r2cmd", {"command": "afl"})),
            text_response("ok"),
        ])
        state = SessionState(registry=registry, provider=provider,
                             disasm_session=mock_session)
        client = TestClient(create_app(state))
        client.post("/query", json={"mode": "auto", "text": "q"})
        assert wait_until(lambda: state.pending_approvals())
        r = client.post("/query", json={"mode": "auto", "text": "another"})
        assert r.status_code == 409
        pending = state.pending_approvals()
        client.post(f"/approvals/{pending[0]['request_id']}",
                    json={"verdict": "deny", "reason": "test over"})
        state.wait()

    def test_unknown_approval_404(self, client):
        r = client.post("/approvals/bogus", json={"verdict": "approve"})
        assert r.status_code == 404

    def test_bad_verdict_400(self, client):
        r = client.post("/approvals/bogus", json={"verdict": "maybe"})
        assert r.status_code == 400

    def test_bad_mode_400(self, client):
        r = client.post("/query", json={"mode": "psychic", "text": "q"})
        assert r.status_code == 400


class TestDirectFlow:
    def test_direct_query_appends_messages(self, registry):
        provider = ScriptedProvider([text_response("prctl controls processes")])
        state = SessionState(registry=registry, provider=provider)
        client = TestClient(create_app(state))
        r = client.post("/query", json={"mode": "direct",
                                        "text": "Explain prctl in 1 line"})
        assert r.status_code == 200
        state.wait()
        log = client.get("/transcript").json()
        roles = [m["role"] for m in log["messages"]]
        assert roles == ["user", "assistant"]
        assert client.get("/state").json()["phase"] == "done"


class TestEventStream:
    def test_event_order_approval_before_execution(self, state, client):
        client.post("/query", json={"mode": "auto", "text": "q"})
        assert wait_until(lambda: state.pending_approvals())
        pending = state.pending_approvals()
        client.post(f"/approvals/{pending[0]['request_id']}",
                    json={"verdict": "approve"})
        state.wait()

        events = client.get("/events").json()["events"]
        kinds = [e["kind"] for e in events]
        assert kinds.index("approval_requested") < kinds.index("tool_executed")
        assert kinds[-1] == "run_finished"
        # every append observed
        appended = [e for e in events if e["kind"] == "message_appended"]
        assert len(appended) == len(state.conv.messages)

    def test_replay_then_resume(self, state, client):
        state.bus.emit("status_updated", {"n": 1})
        state.bus.emit("status_updated", {"n": 2})
        first = client.get("/events", params={"from_seq": 0}).json()
        assert len(first["events"]) == 2
        state.bus.emit("status_updated", {"n": 3})
        second = client.get(
            "/events", params={"from_seq": first["next_seq"]}).json()
        assert [e["payload"]["n"] for e in second["events"]] == [3]

    def test_expired_seq_410(self, registry):
        state = SessionState(registry=registry, provider=ScriptedProvider([]))
        state.bus._retention = 3
        for i in range(10):
            state.bus.emit("status_updated", {"n": i})
        client = TestClient(create_app(state))
        assert client.get("/events", params={"from_seq": 0}).status_code == 410

    def test_no_secrets_in_events(self, state, client, monkeypatch):
        monkeypatch.setenv("ANTHROPIC_API_KEY", "sk-ant-secret-456")
        client.post("/query", json={"mode": "auto", "text": "q"})
        assert wait_until(lambda: state.pending_approvals())
        pending = state.pending_approvals()
        client.post(f"/approvals/{pending[0]['request_id']}",
                    json={"verdict": "approve"})
        state.wait()
        assert "sk-ant-secret-456" not in client.get("/events").text
