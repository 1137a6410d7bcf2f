"""AI assistance for radare2: direct prompts, approval-gated auto mode, cost tracking."""

from .config import ModelRef, Settings, SettingsRegistry, resolve_api_key
from .conversation import ChatMessage, ContentBlock, Conversation
from .costs import CostLedger, PriceTable, estimate_tokens, render_status
from .tools import ApprovalDecision, ApprovalRequest, ToolCall, ToolDefinition, tool_catalog

__all__ = [
    "ModelRef",
    "Settings",
    "SettingsRegistry",
    "resolve_api_key",
    "ChatMessage",
    "ContentBlock",
    "Conversation",
    "CostLedger",
    "PriceTable",
    "estimate_tokens",
    "render_status",
    "ApprovalDecision",
    "ApprovalRequest",
    "ToolCall",
    "ToolDefinition",
    "tool_catalog",
]

__version__ = "0.1.0"
