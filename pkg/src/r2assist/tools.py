"""Tool catalog, tool calls and approval records for auto mode."""
from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass(frozen=True)
class ToolDefinition:
    name: str
    input_schema: dict
    description: str

    def to_wire(self) -> dict:
        """Canonical wire serialization (key order matters for golden tests)."""
        return {
            "name": self.name,
            "input_schema": self.input_schema,
            "description": self.description,
        }


R2CMD = ToolDefinition(
    name="r2cmd",
    input_schema={
        "type": "object",
        "properties": {"command": {"type": "string"}},
        "required": ["command"],
    },
    description="Run a r2 command and return the output",
)

EXECUTE_BINARY = ToolDefinition(
    name="execute_binary",
    input_schema={
        "type": "object",
        "properties": {
            "path": {"type": "string"},
            "args": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["path"],
    },
    description="Execute a binary on the host and return its output",
)

RUN_PYTHON = ToolDefinition(
    name="run_python",
    input_schema={
        "type": "object",
        "properties": {"script": {"type": "string"}},
        "required": ["script"],
    },
    description="Run a Python program on the host and return its output",
)

EXECUTE_JS = ToolDefinition(
    name="execute_js",
    input_schema={
        "type": "object",
        "properties": {"script": {"type": "string"}},
        "required": ["script"],
    },
    description="Run a Javascript program on the host and return its output",
)


def tool_catalog() -> list[ToolDefinition]:
    """The four tools the model may request, r2cmd first."""
    return [R2CMD, EXECUTE_BINARY, RUN_PYTHON, EXECUTE_JS]


TOOL_BY_NAME = {t.name: t for t in tool_catalog()}


class ToolValidationError(Exception):
    pass


def validate_args(name: str, args: dict) -> None:
    """Check args against the tool's input_schema before any approval prompt."""
    tool = TOOL_BY_NAME.get(name)
    if tool is None:
        raise ToolValidationError(f"unknown tool '{name}'")
    schema = tool.input_schema
    if not isinstance(args, dict):
        raise ToolValidationError(f"{name}: arguments must be an object")
    for req in schema.get("required", []):
        if req not in args:
            raise ToolValidationError(f"{name}: missing required argument '{req}'")
    for key, value in args.items():
        prop = schema["properties"].get(key)
        if prop is None:
            raise ToolValidationError(f"{name}: unexpected argument '{key}'")
        if prop["type"] == "string" and not isinstance(value, str):
            raise ToolValidationError(f"{name}: '{key}' must be a string")
        if prop["type"] == "array" and not isinstance(value, list):
            raise ToolValidationError(f"{name}: '{key}' must be an array")


@dataclass
class ToolCall:
    name: str
    args: dict
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    raw: Any = None

    def payload_text(self) -> str:
        """The editable text the analyst reviews: a command or a full script."""
        if self.name == "r2cmd":
            return self.args.get("command", "")
        if self.name in ("run_python", "execute_js"):
            return self.args.get("script", "")
        if self.name == "execute_binary":
            return " ".join([self.args.get("path", ""), *self.args.get("args", [])]).strip()
        return str(self.args)

    def with_payload(self, text: str) -> "ToolCall":
        """Same call with analyst-edited payload text."""
        if self.name == "r2cmd":
            args = {**self.args, "command": text}
        elif self.name in ("run_python", "execute_js"):
            args = {**self.args, "script": text}
        elif self.name == "execute_binary":
            parts = text.split()
            args = {"path": parts[0] if parts else "", "args": parts[1:]}
        else:
            args = self.args
        return ToolCall(name=self.name, args=args, id=self.id, raw=self.raw)


# Payload patterns the approval UI must render as dangerous. The gate only
# warns; the analyst decides.
_DEBUGGER_CMDS = re.compile(r"^\s*(do|db|dc|ds|dr|ood)\b")
_SHELL_ESCAPE = re.compile(r"^\s*!")
_DESTRUCTIVE = re.compile(
    r"\brm\s+-[a-z]*[rf]|\bmkfs\b|\bdd\s+.*of=/dev|shutil\.rmtree|os\.remove|"
    r"unlinkSync|format\s*\(\s*['\"][a-z]:",
    re.IGNORECASE,
)


def danger_flags(call: ToolCall) -> list[str]:
    flags = []
    payload = call.payload_text()
    if call.name == "r2cmd":
        if _DEBUGGER_CMDS.search(payload):
            flags.append("debugger: executes the analyzed binary on this host")
        if _SHELL_ESCAPE.search(payload):
            flags.append("shell escape: runs an arbitrary host command")
    if call.name == "execute_binary":
        flags.append("executes a binary on this host")
    if _DESTRUCTIVE.search(payload):
        flags.append("destructive: touches the filesystem")
    return flags


@dataclass
class ApprovalRequest:
    tool_call: ToolCall
    payload_text: str
    danger: list[str]
    id: str = field(default_factory=lambda: uuid.uuid4().hex)

    @classmethod
    def for_call(cls, call: ToolCall) -> "ApprovalRequest":
        return cls(tool_call=call, payload_text=call.payload_text(),
                   danger=danger_flags(call))


@dataclass
class ApprovalDecision:
    verdict: str  # approve | approve_edited | deny
    edited_payload: Optional[str] = None
    reason: str = ""

    def __post_init__(self):
        if self.verdict not in ("approve", "approve_edited", "deny"):
            raise ValueError(f"unknown verdict '{self.verdict}'")
        if self.verdict == "approve_edited" and self.edited_payload is None:
            raise ValueError("approve_edited needs the edited payload")
