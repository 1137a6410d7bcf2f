"""Auto-mode agent loop: model interactions, human approval, tool dispatch."""
from __future__ import annotations

import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .bridge import DisasmSession
from .config import Settings
from .conversation import ChatMessage, ContentBlock, Conversation, sanitize_text
from .costs import CostLedger, PriceTable, render_status
from .errors import R2AssistError
from .gateway import ProviderResponse
from .templates import TemplateSet
from .tools import (
    ApprovalDecision,
    ApprovalRequest,
    ToolCall,
    ToolValidationError,
    tool_catalog,
    validate_args,
)

PHASES = ("idle", "awaiting_model", "awaiting_approval", "executing_tool",
          "done", "aborted")


class MaxRunsExceededError(R2AssistError):
    pass


class UnapprovedExecutionError(R2AssistError):
    pass


@dataclass
class AutoRunState:
    max_runs: int
    run_index: int = 0
    phase: str = "idle"
    final_answer: Optional[str] = None
    pending: list[ApprovalRequest] = field(default_factory=list)


class ApprovalLog:
    """Record of every decision; the dispatcher refuses calls without one."""

    def __init__(self):
        self._decisions: dict[str, ApprovalDecision] = {}

    def record(self, call_id: str, decision: ApprovalDecision) -> None:
        self._decisions[call_id] = decision

    def decision_for(self, call_id: str) -> Optional[ApprovalDecision]:
        return self._decisions.get(call_id)


class ToolDispatcher:
    """Executes approved tool payloads on the analyst host.

    There is no sandbox: the approval gate is the safety mechanism. Scripts
    run with a per-session scratch directory as working directory.
    """

    def __init__(self, session: Optional[DisasmSession], settings: Settings,
                 approval_log: ApprovalLog,
                 workdir: Optional[str] = None):
        self.session = session
        self.settings = settings
        self.approval_log = approval_log
        self.workdir = workdir or tempfile.mkdtemp(prefix="r2assist-")

    def dispatch(self, call: ToolCall) -> str:
        decision = self.approval_log.decision_for(call.id)
        if decision is None or decision.verdict not in ("approve", "approve_edited"):
            raise UnapprovedExecutionError(
                f"tool call {call.id} ({call.name}) has no approval on record"
            )
        try:
            if call.name == "r2cmd":
                return self._r2cmd(call)
            if call.name == "run_python":
                return self._spawn([self.settings.get("python_interpreter"),
                                    "-c", call.args["script"]])
            if call.name == "execute_js":
                return self._spawn([self.settings.get("js_interpreter"),
                                    "-e", call.args["script"]])
            if call.name == "execute_binary":
                return self._spawn([call.args["path"],
                                    *call.args.get("args", [])])
            return f"error: unknown tool '{call.name}'"
        except FileNotFoundError as exc:
            return f"error: interpreter or binary not found: {exc.filename}"
        except subprocess.TimeoutExpired as exc:
            partial = (exc.output or b"").decode("utf-8", "replace")
            return (f"error: execution timed out after {exc.timeout:.0f}s; "
                    f"partial output:\n{partial}")

    def _r2cmd(self, call: ToolCall) -> str:
        if self.session is None:
            return "error: no disassembler session open"
        result = self.session.exec(call.args["command"])
        if result.timed_out:
            return (f"error: command timed out; partial output:\n{result.output}")
        return result.output

    def _spawn(self, argv: list[str]) -> str:
        proc = subprocess.run(
            argv, capture_output=True,
            timeout=self.settings.get("tool_timeout"),
            cwd=self.workdir)
        out = proc.stdout.decode("utf-8", "replace")
        err = proc.stderr.decode("utf-8", "replace")
        text = out + (("\n" + err) if err else "")
        if proc.returncode != 0:
            text = f"exit status {proc.returncode}\n{text}"
        return sanitize_text(text.strip("\n"))


@dataclass
class AutoRunResult:
    final_answer: Optional[str]
    state: AutoRunState
    conversation: Conversation
    ledger: CostLedger


class AutoAgent:
    """Sequential state machine for one auto query.

    `provider` is anything with complete(conv, model, settings, tools=,
    system=) -> ProviderResponse; `approver` maps an ApprovalRequest to an
    ApprovalDecision (blocking until the analyst answers).
    """

    def __init__(
        self,
        provider,
        settings: Settings,
        approver: Callable[[ApprovalRequest], ApprovalDecision],
        session: Optional[DisasmSession] = None,
        conv: Optional[Conversation] = None,
        ledger: Optional[CostLedger] = None,
        price_table: Optional[PriceTable] = None,
        emit: Optional[Callable[[str, dict], None]] = None,
        dispatcher: Optional[ToolDispatcher] = None,
    ):
        self.provider = provider
        self.settings = settings
        self.approver = approver
        self.session = session
        self.conv = conv if conv is not None else Conversation()
        self.ledger = ledger if ledger is not None else CostLedger(
            max_runs=settings.max_runs)
        self.price_table = price_table or PriceTable.load(
            settings.get("pricing_path") or None)
        self.approval_log = ApprovalLog()
        self.dispatcher = dispatcher or ToolDispatcher(
            session, settings, self.approval_log)
        self.templates = TemplateSet.load(settings.get("template_path"))
        self.state = AutoRunState(max_runs=settings.max_runs)
        self._emit = emit or (lambda kind, payload: None)
        self._init_msg_index: Optional[int] = None

    # -- request assembly --------------------------------------------------

    def system_prompt(self) -> str:
        return self.settings.get("system_prompt") or self.templates.get("system")

    def _snapshot_text(self) -> str:
        if self.session is None:
            return ""
        commands = self.settings.init_commands
        snapshot = self.session.init_snapshot(commands)
        return f"Initial information ({commands}):\n{snapshot}"

    def build_initial_request(self, query: str) -> Conversation:
        """System prompt + init snapshot + user query; tools ride along at send."""
        snapshot = self._snapshot_text()
        if snapshot:
            self.conv.append(ChatMessage.user(snapshot, origin="tool_output"))
            self._init_msg_index = len(self.conv.messages) - 1
        self.conv.append(ChatMessage.user(query, origin="human"))
        self.state = AutoRunState(max_runs=self.settings.max_runs,
                                  phase="awaiting_model")
        return self.conv

    def _refresh_snapshot(self) -> None:
        if (self._init_msg_index is None
                or not self.settings.get("auto.resend_init")):
            return
        snapshot = self._snapshot_text()
        if snapshot:
            msg = self.conv.messages[self._init_msg_index]
            msg.blocks = [ContentBlock.text_block(snapshot)]

    # -- state transitions -------------------------------------------------

    def step(self, response: ProviderResponse) -> AutoRunState:
        """Consume one model response: either a final answer or tool requests."""
        if self.state.phase != "awaiting_model":
            raise R2AssistError(f"step() called in phase {self.state.phase}")
        self.state.run_index += 1

        blocks = list(response.assistant_blocks)
        # scripted providers may omit the tool_use blocks; tool_results must
        # still reference an existing call id
        present = {b.tool_call_id for b in blocks if b.kind == "tool_use"}
        for call in response.tool_calls:
            if call.id not in present:
                blocks.append(ContentBlock.tool_use(call.id, call.name, call.args))
        if not blocks:
            blocks = [ContentBlock.text_block("")]
        self.conv.append(ChatMessage(role="assistant", blocks=blocks,
                                     origin="auto_loop"))

        if not response.tool_calls:
            self.state.phase = "done"
            self.state.final_answer = response.text()
            return self.state

        if self.state.run_index >= self.state.max_runs:
            # close the transcript: every tool call gets a result, even here
            for call in response.tool_calls:
                self._append_tool_result(
                    call, "aborted: interaction limit reached, not executed")
            self.state.phase = "aborted"
            return self.state

        self.state.pending = []
        for call in response.tool_calls:
            try:
                validate_args(call.name, call.args)
            except ToolValidationError as exc:
                # malformed request: feed the error back so the model repairs
                self._append_tool_result(call, f"error: {exc}")
                continue
            request = ApprovalRequest.for_call(call)
            self.state.pending.append(request)
            self._emit("approval_requested", {
                "request_id": request.id,
                "tool": call.name,
                "payload": request.payload_text,
                "danger": request.danger,
            })
        self.state.phase = "awaiting_approval" if self.state.pending else "awaiting_model"
        return self.state

    def apply_decision(self, request: ApprovalRequest,
                       decision: ApprovalDecision) -> str:
        """Record the verdict, dispatch if approved, append the tool result."""
        if self.state.phase != "awaiting_approval":
            raise R2AssistError(
                f"apply_decision() called in phase {self.state.phase}")
        call = request.tool_call
        self.approval_log.record(call.id, decision)
        self._emit("approval_resolved", {"request_id": request.id,
                                         "verdict": decision.verdict})
        if decision.verdict == "deny":
            reason = decision.reason or "no reason given"
            result_text = f"user denied execution: {reason}"
        else:
            if decision.verdict == "approve_edited":
                call = call.with_payload(decision.edited_payload)
                call.id = request.tool_call.id
            self.state.phase = "executing_tool"
            result_text = self.dispatcher.dispatch(call)
            self._emit("tool_executed", {"tool": call.name,
                                         "payload": call.payload_text(),
                                         "output": result_text})
        self._append_tool_result(request.tool_call, result_text)
        self.state.pending = [p for p in self.state.pending if p.id != request.id]
        self.state.phase = ("awaiting_approval" if self.state.pending
                            else "awaiting_model")
        return result_text

    def _append_tool_result(self, call: ToolCall, text: str) -> None:
        self.conv.append(ChatMessage(
            role="tool_result",
            blocks=[ContentBlock.tool_result(call.id, sanitize_text(text))],
            origin="tool_output"))

    # -- orchestration -----------------------------------------------------

    def run(self, query: str) -> AutoRunResult:
        """Full auto query: loop model and tools until done or max_runs."""
        self.ledger.start_run()
        self.ledger.max_runs = self.state.max_runs = self.settings.max_runs
        self.build_initial_request(query)
        model = self.settings.model_ref

        while self.state.phase == "awaiting_model":
            self._refresh_snapshot()
            started = time.monotonic()
            response = self.provider.complete(
                self.conv, model, self.settings,
                tools=tool_catalog(), system=self.system_prompt())
            self.ledger.record_usage(response.usage, model, self.price_table)
            self.ledger.record_interaction(time.monotonic() - started)
            self.step(response)
            status = render_status(self.ledger, model)
            self._emit("status_updated", {"line": status,
                                          "run_count": self.ledger.run_count,
                                          "max_runs": self.ledger.max_runs})
            while self.state.pending:
                request = self.state.pending[0]
                decision = self.approver(request)
                self.apply_decision(request, decision)

        self._emit("run_finished", {"phase": self.state.phase,
                                    "final_answer": self.state.final_answer})
        return AutoRunResult(final_answer=self.state.final_answer,
                             state=self.state, conversation=self.conv,
                             ledger=self.ledger)
