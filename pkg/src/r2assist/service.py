"""Local HTTP service exposing session state, queries, events and approvals."""
from __future__ import annotations

import json
import queue
import threading
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .agent import AutoAgent
from .config import SettingsRegistry
from .conversation import ChatMessage, Conversation
from .costs import CostLedger, PriceTable, render_status
from .direct import DirectKind, DirectRunner
from .errors import R2AssistError, UnknownKeyError, ParseFailureError
from .gateway import ProviderGateway
from .tools import ApprovalDecision, ApprovalRequest

EVENT_RETENTION = 10_000

EVENT_KINDS = ("message_appended", "approval_requested", "approval_resolved",
               "tool_executed", "status_updated", "run_finished", "error")


class SeqExpiredError(R2AssistError):
    pass


class EventBus:
    """Strictly ordered, replayable event log with bounded retention."""

    def __init__(self, retention: int = EVENT_RETENTION):
        self._events: list[dict] = []
        self._first_seq = 1
        self._next_seq = 1
        self._retention = retention
        self._cond = threading.Condition()

    def emit(self, kind: str, payload: dict) -> dict:
        with self._cond:
            event = {"seq": self._next_seq, "kind": kind, "payload": payload}
            self._next_seq += 1
            self._events.append(event)
            if len(self._events) > self._retention:
                dropped = len(self._events) - self._retention
                self._events = self._events[dropped:]
                self._first_seq += dropped
            self._cond.notify_all()
            return event

    def replay(self, from_seq: int = 0) -> list[dict]:
        """All retained events with seq > from_seq."""
        with self._cond:
            if from_seq + 1 < self._first_seq:
                raise SeqExpiredError(
                    f"events before seq {self._first_seq} are no longer retained")
            return [e for e in self._events if e["seq"] > from_seq]

    def wait_for(self, after_seq: int, timeout: float = 10.0) -> list[dict]:
        with self._cond:
            self._cond.wait_for(
                lambda: self._next_seq - 1 > after_seq, timeout=timeout)
        return self.replay(after_seq)


class ObservedConversation(Conversation):
    """Conversation that reports every append to the event bus."""

    def __init__(self, bus: EventBus, session_id: Optional[str] = None):
        super().__init__(session_id)
        self._bus = bus

    def append(self, msg: ChatMessage) -> "Conversation":
        super().append(msg)
        self._bus.emit("message_appended", msg.to_dict())
        return self


class SessionState:
    """Everything one analyst session owns, shared by CLI and HTTP surface."""

    def __init__(self, registry: Optional[SettingsRegistry] = None,
                 provider=None, disasm_session=None):
        self.registry = registry or SettingsRegistry()
        self.bus = EventBus()
        self.conv = ObservedConversation(self.bus)
        settings = self.registry.snapshot()
        self.ledger = CostLedger(max_runs=settings.max_runs)
        self.provider = provider or ProviderGateway()
        self.disasm = disasm_session
        self.price_table = PriceTable.load(settings.get("pricing_path") or None)
        self.phase = "idle"
        self.final_answer: Optional[str] = None
        self._pending: dict[str, ApprovalRequest] = {}
        self._decision_queues: dict[str, queue.Queue] = {}
        self._worker: Optional[threading.Thread] = None
        self._lock = threading.Lock()

    # -- approvals ---------------------------------------------------------

    def _blocking_approver(self, request: ApprovalRequest) -> ApprovalDecision:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._pending[request.id] = request
            self._decision_queues[request.id] = q
        decision = q.get()
        with self._lock:
            self._pending.pop(request.id, None)
            self._decision_queues.pop(request.id, None)
        return decision

    def deliver_decision(self, request_id: str,
                         decision: ApprovalDecision) -> None:
        with self._lock:
            q = self._decision_queues.get(request_id)
        if q is None:
            raise KeyError(request_id)
        q.put(decision)

    def pending_approvals(self) -> list[dict]:
        with self._lock:
            return [
                {"request_id": r.id, "tool": r.tool_call.name,
                 "payload": r.payload_text, "danger": r.danger}
                for r in self._pending.values()
            ]

    # -- queries -----------------------------------------------------------

    def busy(self) -> bool:
        return self._worker is not None and self._worker.is_alive()

    def submit_auto(self, query: str) -> None:
        if self.busy():
            raise R2AssistError("a query is already running")
        settings = self.registry.snapshot()
        agent = AutoAgent(
            provider=self.provider, settings=settings,
            approver=self._blocking_approver, session=self.disasm,
            conv=self.conv, ledger=self.ledger, price_table=self.price_table,
            emit=self.bus.emit)
        self.phase = "running"

        def work():
            try:
                result = agent.run(query)
                self.phase = result.state.phase
                self.final_answer = result.final_answer
            except R2AssistError as exc:
                self.phase = "error"
                self.bus.emit("error", {"message": str(exc)})

        self._worker = threading.Thread(target=work, daemon=True)
        self._worker.start()

    def submit_direct(self, text: str, kind: str = "free_query") -> None:
        if self.busy():
            raise R2AssistError("a query is already running")
        settings = self.registry.snapshot()
        runner = DirectRunner(self.provider, self.conv, self.ledger,
                              self.price_table, session=self.disasm)
        self.phase = "running"

        def work():
            try:
                runner.run_direct(DirectKind(kind), settings, query=text)
                self.phase = "done"
                self.bus.emit("run_finished", {"phase": "done",
                                               "final_answer": None})
            except R2AssistError as exc:
                self.phase = "error"
                self.bus.emit("error", {"message": str(exc)})

        self._worker = threading.Thread(target=work, daemon=True)
        self._worker.start()

    def wait(self, timeout: float = 30.0) -> None:
        if self._worker is not None:
            self._worker.join(timeout)

    def state_payload(self) -> dict:
        settings = self.registry.snapshot()
        return {
            "phase": self.phase,
            "final_answer": self.final_answer,
            "run_count": self.ledger.run_count,
            "max_runs": self.ledger.max_runs,
            "total_cost": self.ledger.total_cost,
            "run_cost": self.ledger.run_cost,
            "status_line": render_status(self.ledger, settings.model_ref),
            "pending_approvals": self.pending_approvals(),
            "message_count": len(self.conv),
        }


# -- HTTP surface ----------------------------------------------------------


class QueryBody(BaseModel):
    mode: str  # direct | auto
    text: str
    kind: str = "free_query"


class ApprovalBody(BaseModel):
    verdict: str
    edited_payload: Optional[str] = None
    reason: str = ""


class SettingBody(BaseModel):
    key: str
    value: str


def create_app(state: Optional[SessionState] = None) -> FastAPI:
    state = state or SessionState()
    app = FastAPI(title="r2assist session service")
    app.state.session = state

    @app.get("/state")
    def get_state() -> dict:
        return state.state_payload()

    @app.get("/transcript")
    def get_transcript() -> Any:
        return json.loads(state.conv.render_log("structured"))

    @app.post("/query")
    def post_query(body: QueryBody) -> dict:
        if body.mode not in ("direct", "auto"):
            raise HTTPException(400, "mode must be 'direct' or 'auto'")
        try:
            if body.mode == "auto":
                state.submit_auto(body.text)
            else:
                state.submit_direct(body.text, kind=body.kind)
        except R2AssistError as exc:
            raise HTTPException(409, str(exc))
        return {"accepted": True}

    @app.post("/approvals/{request_id}")
    def post_approval(request_id: str, body: ApprovalBody) -> dict:
        try:
            decision = ApprovalDecision(verdict=body.verdict,
                                        edited_payload=body.edited_payload,
                                        reason=body.reason)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        try:
            state.deliver_decision(request_id, decision)
        except KeyError:
            raise HTTPException(404, f"no pending approval '{request_id}'")
        return {"accepted": True}

    @app.post("/settings")
    def post_setting(body: SettingBody) -> dict:
        try:
            state.registry.set(body.key, body.value)
        except (UnknownKeyError, ParseFailureError) as exc:
            raise HTTPException(400, str(exc))
        return {"accepted": True}

    @app.get("/settings")
    def get_settings() -> dict:
        return state.registry.snapshot().as_dict()

    @app.get("/events")
    def get_events(from_seq: int = 0) -> dict:
        try:
            events = state.bus.replay(from_seq)
        except SeqExpiredError as exc:
            raise HTTPException(410, str(exc))
        next_seq = events[-1]["seq"] if events else from_seq
        return {"events": events, "next_seq": next_seq}

    @app.get("/events/stream")
    def stream_events(from_seq: int = 0) -> StreamingResponse:
        def generate():
            cursor = from_seq
            try:
                backlog = state.bus.replay(cursor)
            except SeqExpiredError:
                backlog = state.bus.replay(0)
            while True:
                for event in backlog:
                    cursor = event["seq"]
                    yield (f"id: {event['seq']}\n"
                           f"event: {event['kind']}\n"
                           f"data: {json.dumps(event)}\n\n")
                if state.phase not in ("running",) and not backlog:
                    # keep-alive comment so clients can detect liveness
                    yield ": keep-alive\n\n"
                backlog = state.bus.wait_for(cursor, timeout=5.0)

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app


def serve(state: Optional[SessionState] = None, host: str = "127.0.0.1",
          port: int = 8642) -> None:
    """Run the session service; binds loopback-only by default."""
    import uvicorn

    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")
