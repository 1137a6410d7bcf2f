import sys

import pytest

from r2assist.bridge import DisasmSession
from r2assist.config import SettingsRegistry
from r2assist.conversation import ContentBlock
from r2assist.costs import Usage
from r2assist.gateway import ProviderResponse
from r2assist.tools import ToolCall


def text_response(text, input_tokens=100, output_tokens=50):
    return ProviderResponse(
        assistant_blocks=[ContentBlock.text_block(text)],
        usage=Usage(input_tokens=input_tokens, output_tokens=output_tokens),
        stop_reason="end_turn",
    )


def tool_response(*calls, text=""):
    """A response requesting the given (name, args) tool calls."""
    tool_calls = [ToolCall(name=name, args=args) for name, args in calls]
    blocks = [ContentBlock.text_block(text)] if text else []
    blocks += [ContentBlock.tool_use(c.id, c.name, c.args) for c in tool_calls]
    return ProviderResponse(
        assistant_blocks=blocks,
        tool_calls=tool_calls,
        usage=Usage(input_tokens=100, output_tokens=50),
        stop_reason="tool_use",
    )


class ScriptedProvider:
    """Stands in for the gateway: returns canned responses in order.

    Entries may be ProviderResponse objects or callables taking the
    conversation. When the script runs out, `repeat` (if set) is used
    forever -- handy for adversarial always-tool providers.
    """

    def __init__(self, script, repeat=None):
        self.script = list(script)
        self.repeat = repeat
        self.calls = []

    def complete(self, conv, model, settings, tools=None, system=None):
        self.calls.append({
            "messages": len(conv.messages),
            "tools": [t.name for t in tools] if tools else [],
            "system": system,
        })
        if self.script:
            entry = self.script.pop(0)
        elif self.repeat is not None:
            entry = self.repeat
        else:
            raise AssertionError("scripted provider exhausted")
        return entry(conv) if callable(entry) else entry


@pytest.fixture
def registry():
    reg = SettingsRegistry(config_file="")
    reg.set("python_interpreter", sys.executable)
    return reg


@pytest.fixture
def settings(registry):
    return registry.snapshot()


R2_FIXTURES = {
    "aaa": "[x] Analyze all flags\n[x] Analyze function calls",
    "iI": "arch     x86\nbits     64\nos       linux",
    "afl": "0x000011a9    1 38           main\n0x00001060    1 11           entry0",
    "afl~main": "0x000011a9    1 38           main",
    "pdc": "void main (void) {\n    // string: hello\n    puts(\"hello\");\n}",
    "pdf main": "/ 38: int main (int argc);\n| 0x000011a9  push rbp",
    "izz": "0x2004 12 11 .rodata ascii hello world",
    "axffq": "sym.imp.puts",
    "pdc @ sym.imp.puts": "void sym.imp.puts (const char *s);",
}


@pytest.fixture
def mock_session():
    return DisasmSession.open_mock(dict(R2_FIXTURES))
