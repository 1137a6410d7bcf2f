"""Ordered message store: context piling, reset, tail deletion, logging, truncation."""
from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import BudgetTooSmallError, InvalidMessageError

ROLES = ("system", "user", "assistant", "tool_result")
ORIGINS = ("human", "direct_template", "auto_loop", "tool_output")

LOG_FORMAT_VERSION = 1

TRUNCATION_MARKER = "[...truncated...]"

# Control characters allowed in message text; anything else is treated as binary.
_ALLOWED_CONTROLS = {"\n", "\r", "\t"}


def is_clean_text(text: str) -> bool:
    """True when the string carries no raw binary bytes (C0 controls, NULs)."""
    return all(ch >= " " or ch in _ALLOWED_CONTROLS for ch in text)


def sanitize_text(text: str) -> str:
    """Hex-escape binary-looking characters so the result is safe to send."""
    return "".join(
        ch if ch >= " " or ch in _ALLOWED_CONTROLS else f"\\x{ord(ch):02x}"
        for ch in text
    )


@dataclass
class ContentBlock:
    kind: str  # text | tool_use | tool_result
    text: str = ""
    # tool_use payload
    tool_call_id: str = ""
    tool_name: str = ""
    tool_args: dict = field(default_factory=dict)

    @classmethod
    def text_block(cls, text: str) -> "ContentBlock":
        return cls(kind="text", text=text)

    @classmethod
    def tool_use(cls, call_id: str, name: str, args: dict) -> "ContentBlock":
        return cls(kind="tool_use", tool_call_id=call_id, tool_name=name, tool_args=args)

    @classmethod
    def tool_result(cls, call_id: str, output: str) -> "ContentBlock":
        return cls(kind="tool_result", text=output, tool_call_id=call_id)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "text":
            d["text"] = self.text
        elif self.kind == "tool_use":
            d.update(tool_call_id=self.tool_call_id, tool_name=self.tool_name,
                     tool_args=self.tool_args)
        else:
            d.update(tool_call_id=self.tool_call_id, text=self.text)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ContentBlock":
        return cls(kind=d["kind"], text=d.get("text", ""),
                   tool_call_id=d.get("tool_call_id", ""),
                   tool_name=d.get("tool_name", ""),
                   tool_args=d.get("tool_args", {}))


@dataclass
class ChatMessage:
    role: str
    blocks: list[ContentBlock]
    origin: str = "human"
    timestamp: float = field(default_factory=time.time)

    def validate(self) -> None:
        if self.role not in ROLES:
            raise InvalidMessageError(f"unknown role '{self.role}'")
        if self.origin not in ORIGINS:
            raise InvalidMessageError(f"unknown origin '{self.origin}'")
        if not self.blocks:
            raise InvalidMessageError("message has no content blocks")
        for block in self.blocks:
            if not is_clean_text(block.text):
                raise InvalidMessageError(
                    "message text contains raw binary bytes; hex-escape it first"
                )

    def text(self) -> str:
        """Concatenated text of all blocks (tool_use rendered as its payload)."""
        parts = []
        for b in self.blocks:
            if b.kind == "tool_use":
                parts.append(f"{b.tool_name}({json.dumps(b.tool_args, sort_keys=True)})")
            else:
                parts.append(b.text)
        return "\n".join(parts)

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "origin": self.origin,
            "timestamp": self.timestamp,
            "blocks": [b.to_dict() for b in self.blocks],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChatMessage":
        return cls(role=d["role"], origin=d.get("origin", "human"),
                   timestamp=d.get("timestamp", 0.0),
                   blocks=[ContentBlock.from_dict(b) for b in d["blocks"]])

    @classmethod
    def user(cls, text: str, origin: str = "human") -> "ChatMessage":
        return cls(role="user", blocks=[ContentBlock.text_block(text)], origin=origin)

    @classmethod
    def assistant(cls, text: str, origin: str = "auto_loop") -> "ChatMessage":
        return cls(role="assistant", blocks=[ContentBlock.text_block(text)], origin=origin)


@dataclass
class TruncationReport:
    dropped_indices: list[int] = field(default_factory=list)
    shortened_indices: list[int] = field(default_factory=list)

    @property
    def unchanged(self) -> bool:
        return not self.dropped_indices and not self.shortened_indices


class Conversation:
    """Append-only ordered message list, mutated only via reset/drop_last/truncate."""

    def __init__(self, session_id: Optional[str] = None):
        self.id = session_id or uuid.uuid4().hex
        self.messages: list[ChatMessage] = []

    def __len__(self) -> int:
        return len(self.messages)

    def append(self, msg: ChatMessage) -> "Conversation":
        msg.validate()
        if msg.role == "system" and any(m.role == "system" for m in self.messages):
            raise InvalidMessageError("conversation already has a system message")
        if msg.role == "system" and self.messages:
            raise InvalidMessageError("a system message must come first")
        if msg.role == "tool_result":
            known_ids = {
                b.tool_call_id
                for m in self.messages
                for b in m.blocks
                if b.kind == "tool_use"
            }
            for b in msg.blocks:
                if b.kind == "tool_result" and b.tool_call_id not in known_ids:
                    raise InvalidMessageError(
                        f"tool_result references unknown tool call '{b.tool_call_id}'"
                    )
        self.messages.append(msg)
        return self

    def reset(self) -> "Conversation":
        self.messages = []
        return self

    def drop_last(self, n: int) -> "Conversation":
        if n < 1:
            raise ValueError("n must be >= 1")
        self.messages = self.messages[: max(0, len(self.messages) - n)]
        return self

    def user_messages(self) -> list[ChatMessage]:
        return [m for m in self.messages if m.role == "user"]

    def render_log(self, format: str = "plain") -> str:
        if format == "structured":
            return json.dumps(
                {
                    "version": LOG_FORMAT_VERSION,
                    "id": self.id,
                    "messages": [m.to_dict() for m in self.messages],
                },
                indent=2,
            )
        if format == "plain":
            lines = []
            for m in self.messages:
                lines.append(f"[{m.role}] {m.text()}")
            return "\n".join(lines)
        raise ValueError(f"unknown log format '{format}'")

    @classmethod
    def parse_log(cls, text: str) -> "Conversation":
        data = json.loads(text)
        if data.get("version") != LOG_FORMAT_VERSION:
            raise ValueError(f"unsupported log version {data.get('version')}")
        conv = cls(session_id=data.get("id"))
        conv.messages = [ChatMessage.from_dict(d) for d in data["messages"]]
        return conv

    # -- token-budget truncation ------------------------------------------

    def estimate(self, estimator: Callable[[str], int]) -> int:
        return sum(estimator(b.text) for m in self.messages for b in m.blocks)

    def truncate_to_budget(
        self, budget: int, estimator: Callable[[str], int]
    ) -> TruncationReport:
        """Shrink the context to fit `budget` estimated tokens.

        Oldest non-protected messages go first; if that is not enough the
        largest tool_result blocks get their middle elided. The system
        message and the most recent user message always survive.
        """
        last_user = None
        for i in range(len(self.messages) - 1, -1, -1):
            if self.messages[i].role == "user":
                last_user = i
                break
        floor = sum(
            estimator(b.text)
            for i, m in enumerate(self.messages)
            if m.role == "system" or i == last_user
            for b in m.blocks
        )
        if budget < floor:
            raise BudgetTooSmallError(
                f"budget {budget} below system + last user message ({floor} tokens)"
            )

        report = TruncationReport()
        if self.estimate(estimator) <= budget:
            return report

        # Pass 1: drop oldest droppable messages (never system, last user or
        # the final message while anything else remains).
        keep = list(range(len(self.messages)))
        while self.estimate_subset(keep, estimator) > budget:
            droppable = [
                i for i in keep
                if self.messages[i].role != "system" and i != last_user and i != keep[-1]
            ]
            if not droppable:
                break
            victim = droppable[0]
            keep.remove(victim)
            report.dropped_indices.append(victim)

        # Pass 2: elide the middle of the largest tool_result blocks.
        while self.estimate_subset(keep, estimator) > budget:
            candidates = [
                (estimator(b.text), i, b)
                for i in keep
                for b in self.messages[i].blocks
                if b.kind == "tool_result" and TRUNCATION_MARKER not in b.text
                and len(b.text) > 64
            ]
            if not candidates:
                break
            _, idx, block = max(candidates, key=lambda t: t[0])
            overshoot = self.estimate_subset(keep, estimator) - budget
            block.text = _elide_middle(block.text, overshoot)
            if idx not in report.shortened_indices:
                report.shortened_indices.append(idx)

        # Pass 3: the final message itself is droppable if it is not protected.
        while self.estimate_subset(keep, estimator) > budget:
            tail = keep[-1]
            if self.messages[tail].role == "system" or tail == last_user:
                break
            keep.remove(tail)
            report.dropped_indices.append(tail)

        self.messages = [self.messages[i] for i in keep]
        return report

    def estimate_subset(self, indices: list[int], estimator) -> int:
        return sum(
            estimator(b.text) for i in indices for b in self.messages[i].blocks
        )


def _elide_middle(text: str, overshoot_tokens: int) -> str:
    """Cut the middle of `text`, keeping head and tail around a marker."""
    # 4 chars per token heuristic, cut extra to converge quickly.
    cut = max((overshoot_tokens + 1) * 4 + len(TRUNCATION_MARKER), len(text) // 2)
    remain = max(32, len(text) - cut)
    head = text[: remain // 2]
    tail = text[len(text) - (remain - remain // 2):]
    return head + TRUNCATION_MARKER + tail
