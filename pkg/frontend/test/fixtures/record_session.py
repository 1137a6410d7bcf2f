"""Record a real session event log for the console replay tests.

Run from the repository root with the python package installed:

    python3 frontend/test/fixtures/record_session.py

Writes session-50.json next to this file: the first 50 events of a scripted
auto run (two approved tool calls, one denial, a final answer) followed by a
direct query, exactly as the service emits them.
"""
import json
import pathlib
import sys
import time

sys.path.insert(0, "tests")

from r2assist.bridge import DisasmSession
from r2assist.config import SettingsRegistry
from r2assist.service import SessionState
from r2assist.tools import ApprovalDecision

from conftest import R2_FIXTURES, ScriptedProvider, text_response, tool_response


def main() -> None:
    registry = SettingsRegistry(config_file="")
    provider = ScriptedProvider([
        tool_response(("r2cmd", {"command": "aaa"})),
        tool_response(("r2cmd", {"command": "iI"})),
        tool_response(("r2cmd", {"command": "afl"})),
        tool_response(("r2cmd", {"command": "pdf main"})),
        tool_response(("r2cmd", {"command": "izz"})),
        tool_response(("r2cmd", {"command": "pdc"})),
        tool_response(("r2cmd", {"command": "dc"})),
        text_response("main prints a greeting and exits"),
        text_response("prctl tweaks process attributes"),
        text_response("no further questions"),
    ])
    session = DisasmSession.open_mock(dict(R2_FIXTURES))
    state = SessionState(registry=registry, provider=provider,
                         disasm_session=session)

    decisions = [
        ApprovalDecision(verdict="approve"),
        ApprovalDecision(verdict="approve"),
        ApprovalDecision(verdict="approve"),
        ApprovalDecision(verdict="approve_edited", edited_payload="pdf @ main"),
        ApprovalDecision(verdict="approve"),
        ApprovalDecision(verdict="approve"),
        ApprovalDecision(verdict="deny", reason="no debugging on this host"),
    ]
    state.submit_auto("what does main do?")
    seen: set = set()
    for decision in decisions:
        while True:
            fresh = [p for p in state.pending_approvals()
                     if p["request_id"] not in seen]
            if fresh:
                break
            time.sleep(0.01)
        seen.add(fresh[0]["request_id"])
        state.deliver_decision(fresh[0]["request_id"], decision)
    state.wait()
    state.submit_direct("Explain prctl in 1 line")
    state.wait()
    state.submit_direct("anything else worth noting?")
    state.wait()

    events = state.bus.replay(0)[:50]
    assert len(events) == 50, f"expected >= 50 events, got {len(events)}"
    out = pathlib.Path(__file__).with_name("session-50.json")
    out.write_text(json.dumps(events, indent=2) + "\n")
    print(f"wrote {out} ({len(events)} events)")


if __name__ == "__main__":
    main()
