"""Provider wire dialects: encode requests, transport, decode responses, classify errors."""
from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import httpx

from .config import ModelRef, Settings, api_key_env_var, resolve_api_key
from .conversation import ChatMessage, ContentBlock, Conversation, is_clean_text
from .costs import Usage, estimate_tokens
from .errors import (
    InvalidMessageError,
    MissingKeyError,
    R2AssistError,
    ToolsUnsupportedError,
)
from .tools import ToolCall, ToolDefinition

ANTHROPIC_VERSION = "2023-06-01"

# Which wire dialect each provider speaks. Gemini is deferred at v1.
DIALECTS = {
    "anthropic": "anthropic",
    "openai": "chat",
    "mistral": "chat",
    "groq": "chat",
    "xai": "chat",
    "ollama": "ollama",
}

DEFAULT_BASE_URLS = {
    "anthropic": "https://api.anthropic.com",
    "openai": "https://api.openai.com",
    "mistral": "https://api.mistral.ai",
    "groq": "https://api.groq.com/openai",
    "xai": "https://api.x.ai",
    "ollama": "http://localhost:11434",
}

ENDPOINT_PATHS = {"anthropic": "/v1/messages", "chat": "/v1/chat/completions",
                  "ollama": "/api/chat"}


class UnsupportedDialectError(R2AssistError):
    pass


@dataclass
class WireRequest:
    provider: str
    url: str
    headers: dict[str, str]
    body: dict


@dataclass
class ProviderResponse:
    assistant_blocks: list[ContentBlock] = field(default_factory=list)
    tool_calls: list[ToolCall] = field(default_factory=list)
    usage: Usage = field(default_factory=Usage)
    stop_reason: str = "end_turn"  # end_turn | tool_use | length | other

    def text(self) -> str:
        return "\n".join(b.text for b in self.assistant_blocks if b.kind == "text")


class ProviderFailure(R2AssistError):
    """A classified provider error (rate limit, context length, auth...)."""

    def __init__(self, error_class: str, message: str, retriable: bool,
                 limit: Optional[int] = None, requested: Optional[int] = None):
        self.error_class = error_class
        self.retriable = retriable
        self.limit = limit
        self.requested = requested
        super().__init__(f"[{error_class}] {message}")


def _dialect(provider: str) -> str:
    dialect = DIALECTS.get(provider)
    if dialect is None:
        raise UnsupportedDialectError(
            f"provider '{provider}' has no wire dialect implemented yet"
        )
    return dialect


def _guard_text(conv: Conversation) -> None:
    for msg in conv.messages:
        for block in msg.blocks:
            if not is_clean_text(block.text):
                raise InvalidMessageError(
                    "conversation contains raw binary bytes; refusing to send"
                )


def _system_text(conv: Conversation, settings: Settings,
                 system: Optional[str]) -> str:
    if system is not None:
        return system
    for msg in conv.messages:
        if msg.role == "system":
            return msg.text()
    return settings.get("system_prompt")


def encode_request(
    conv: Conversation,
    model: ModelRef,
    settings: Settings,
    tools: Optional[list[ToolDefinition]] = None,
    system: Optional[str] = None,
    api_key: Optional[str] = None,
) -> WireRequest:
    """Build the provider-specific request payload for this conversation."""
    if not conv.messages:
        raise ValueError("conversation is empty")
    _guard_text(conv)
    dialect = _dialect(model.provider)
    if tools and dialect not in ("anthropic", "chat", "ollama"):
        raise ToolsUnsupportedError(
            f"provider '{model.provider}' has no native tool calling"
        )

    base = settings.get("base_url") or DEFAULT_BASE_URLS[model.provider]
    url = base.rstrip("/") + ENDPOINT_PATHS[dialect]
    headers = {"content-type": "application/json", "accept": "application/json"}
    key = api_key if api_key is not None else resolve_api_key(model.provider)
    if model.provider != "ollama":
        if not key:
            raise MissingKeyError(model.provider, api_key_env_var(model.provider))
        if dialect == "anthropic":
            headers["x-api-key"] = key
            headers["anthropic-version"] = ANTHROPIC_VERSION
        else:
            headers["Authorization"] = f"Bearer {key}"

    system_text = _system_text(conv, settings, system)
    if dialect == "anthropic":
        body = _encode_anthropic(conv, model, settings, tools, system_text)
    elif dialect == "chat":
        body = _encode_chat(conv, model, settings, tools, system_text)
    else:
        body = _encode_ollama(conv, model, settings, tools, system_text)
    return WireRequest(provider=model.provider, url=url, headers=headers, body=body)


def _encode_anthropic(conv, model, settings, tools, system_text) -> dict:
    messages = []
    for msg in conv.messages:
        if msg.role == "system":
            continue
        if msg.role == "tool_result":
            content = [
                {"type": "tool_result", "tool_use_id": b.tool_call_id,
                 "content": b.text}
                for b in msg.blocks if b.kind == "tool_result"
            ]
            messages.append({"role": "user", "content": content})
            continue
        content = []
        for b in msg.blocks:
            if b.kind == "text":
                content.append({"type": "text", "text": b.text})
            elif b.kind == "tool_use":
                content.append({"type": "tool_use", "id": b.tool_call_id,
                                "name": b.tool_name, "input": b.tool_args})
        messages.append({"role": msg.role, "content": content})
    body = {
        "model": model.model_name,
        "messages": messages,
        "temperature": settings.temperature,
        "top_p": settings.top_p,
        "max_tokens": settings.max_tokens,
    }
    if system_text:
        body["system"] = system_text
    if tools:
        body["tools"] = [t.to_wire() for t in tools]
    return body


def _chat_messages(conv, system_text) -> list[dict]:
    messages = []
    if system_text:
        messages.append({"role": "system", "content": system_text})
    for msg in conv.messages:
        if msg.role == "system":
            continue
        if msg.role == "tool_result":
            for b in msg.blocks:
                if b.kind == "tool_result":
                    messages.append({"role": "tool",
                                     "tool_call_id": b.tool_call_id,
                                     "content": b.text})
            continue
        tool_uses = [b for b in msg.blocks if b.kind == "tool_use"]
        text = "\n".join(b.text for b in msg.blocks if b.kind == "text")
        entry: dict[str, Any] = {"role": msg.role, "content": text}
        if tool_uses:
            entry["tool_calls"] = [
                {"id": b.tool_call_id, "type": "function",
                 "function": {"name": b.tool_name,
                              "arguments": json.dumps(b.tool_args)}}
                for b in tool_uses
            ]
        messages.append(entry)
    return messages


def _chat_tools(tools) -> list[dict]:
    return [
        {"type": "function",
         "function": {"name": t.name, "description": t.description,
                      "parameters": t.input_schema}}
        for t in tools
    ]


def _encode_chat(conv, model, settings, tools, system_text) -> dict:
    body = {
        "stream": False,
        "model": model.model_name,
        "messages": _chat_messages(conv, system_text),
        "temperature": settings.temperature,
        "top_p": settings.top_p,
        "max_tokens": settings.max_tokens,
    }
    if tools:
        body["tools"] = _chat_tools(tools)
    return body


def _encode_ollama(conv, model, settings, tools, system_text) -> dict:
    body = {
        "stream": False,
        "model": model.model_name,
        "messages": _chat_messages(conv, system_text),
        "options": {
            "temperature": settings.temperature,
            "top_p": settings.top_p,
            "num_predict": settings.max_tokens,
        },
    }
    if tools:
        body["tools"] = _chat_tools(tools)
    return body


# -- decoding ------------------------------------------------------------


def _load_json(raw) -> dict:
    if isinstance(raw, dict):
        return raw
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    try:
        data = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ProviderFailure("malformed", f"cannot parse provider payload: {exc}",
                              retriable=False) from None
    if not isinstance(data, dict):
        raise ProviderFailure("malformed", "provider payload is not an object",
                              retriable=False)
    return data


def decode_response(raw, provider: str) -> ProviderResponse:
    """Extract assistant text, tool calls and token usage from a 2xx payload."""
    data = _load_json(raw)
    dialect = _dialect(provider)
    try:
        if dialect == "anthropic":
            resp = _decode_anthropic(data)
        elif dialect == "chat":
            resp = _decode_chat(data)
        else:
            resp = _decode_ollama(data)
    except ProviderFailure:
        raise
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ProviderFailure("malformed",
                              f"payload does not match {dialect} dialect: {exc!r}",
                              retriable=False) from None
    # tool_calls non-empty <=> stop_reason == tool_use
    if resp.tool_calls:
        resp.stop_reason = "tool_use"
    elif resp.stop_reason == "tool_use":
        resp.stop_reason = "other"
    if resp.usage.input_tokens == 0 and resp.usage.output_tokens == 0:
        resp.usage = Usage(output_tokens=estimate_tokens(resp.text()),
                           estimated=True)
    return resp


_ANTHROPIC_STOPS = {"end_turn": "end_turn", "tool_use": "tool_use",
                    "max_tokens": "length"}
_CHAT_STOPS = {"stop": "end_turn", "tool_calls": "tool_use", "length": "length"}


def _decode_anthropic(data: dict) -> ProviderResponse:
    resp = ProviderResponse()
    for item in data["content"]:
        if item["type"] == "text":
            resp.assistant_blocks.append(ContentBlock.text_block(item["text"]))
        elif item["type"] == "tool_use":
            call = ToolCall(name=item["name"], args=item["input"], raw=item)
            if item.get("id"):
                call.id = item["id"]
            resp.tool_calls.append(call)
            resp.assistant_blocks.append(
                ContentBlock.tool_use(call.id, call.name, call.args))
    resp.stop_reason = _ANTHROPIC_STOPS.get(data.get("stop_reason"), "other")
    usage = data.get("usage") or {}
    resp.usage = Usage(input_tokens=usage.get("input_tokens", 0),
                       output_tokens=usage.get("output_tokens", 0))
    return resp


def _decode_chat(data: dict) -> ProviderResponse:
    resp = ProviderResponse()
    message = data["choices"][0]["message"]
    if message.get("content"):
        resp.assistant_blocks.append(ContentBlock.text_block(message["content"]))
    for tc in message.get("tool_calls") or []:
        args_raw = tc["function"].get("arguments", "{}")
        args = json.loads(args_raw) if isinstance(args_raw, str) else args_raw
        call = ToolCall(name=tc["function"]["name"], args=args, raw=tc)
        if tc.get("id"):
            call.id = tc["id"]
        resp.tool_calls.append(call)
        resp.assistant_blocks.append(
            ContentBlock.tool_use(call.id, call.name, call.args))
    resp.stop_reason = _CHAT_STOPS.get(
        data["choices"][0].get("finish_reason"), "other")
    usage = data.get("usage") or {}
    resp.usage = Usage(input_tokens=usage.get("prompt_tokens", 0),
                       output_tokens=usage.get("completion_tokens", 0))
    return resp


def _decode_ollama(data: dict) -> ProviderResponse:
    resp = ProviderResponse()
    message = data["message"]
    if message.get("content"):
        resp.assistant_blocks.append(ContentBlock.text_block(message["content"]))
    for tc in message.get("tool_calls") or []:
        call = ToolCall(name=tc["function"]["name"],
                        args=tc["function"].get("arguments", {}), raw=tc)
        resp.tool_calls.append(call)
        resp.assistant_blocks.append(
            ContentBlock.tool_use(call.id, call.name, call.args))
    resp.stop_reason = "end_turn" if data.get("done") else "other"
    resp.usage = Usage(input_tokens=data.get("prompt_eval_count", 0),
                       output_tokens=data.get("eval_count", 0))
    return resp


# -- error classification ------------------------------------------------

_CONTEXT_RE = re.compile(
    r"maximum context length is (\d+) tokens.*?requested (\d+) tokens", re.S)

_CONTEXT_CODES = {"context_length_exceeded"}
_CREDIT_CODES = {"insufficient_quota", "billing_hard_limit_reached",
                 "out_of_credit", "credit_balance_too_low"}
_RATE_CODES = {"rate_limit_exceeded", "rate_limit_error", "overloaded_error"}
_AUTH_CODES = {"invalid_api_key", "authentication_error", "permission_error",
               "invalid_request_error_auth"}


def classify_error(raw, provider: str, status: Optional[int] = None) -> ProviderFailure:
    """Map a non-2xx provider payload onto the error taxonomy."""
    try:
        data = _load_json(raw)
    except ProviderFailure:
        data = {}
    err = data.get("error", data)
    if not isinstance(err, dict):
        err = {"message": str(err)}
    code = str(err.get("code", "") or "")
    etype = str(err.get("type", "") or "")
    message = str(err.get("message", "") or raw)

    if code in _CONTEXT_CODES or "maximum context length" in message:
        match = _CONTEXT_RE.search(message)
        limit = int(match.group(1)) if match else None
        requested = int(match.group(2)) if match else None
        return ProviderFailure("context_length", message, retriable=False,
                               limit=limit, requested=requested)
    if code in _CREDIT_CODES or etype in _CREDIT_CODES or "credit" in message.lower():
        return ProviderFailure("out_of_credit", message, retriable=False)
    if status == 429 or code in _RATE_CODES or etype in _RATE_CODES:
        return ProviderFailure("rate_limit", message, retriable=True)
    if status in (401, 403) or code in _AUTH_CODES or etype in _AUTH_CODES:
        return ProviderFailure("auth", message, retriable=False)
    if status is not None and status >= 500:
        return ProviderFailure("transport", message, retriable=True)
    return ProviderFailure("malformed", message, retriable=False)


# -- transport -----------------------------------------------------------


class ProviderGateway:
    """Sequential transport for one session; stateless per request."""

    def __init__(self, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep,
                 max_retries: int = 3):
        self._transport = transport
        self._sleep = sleep
        self._max_retries = max_retries

    def send(self, req: WireRequest, timeout: float = 120.0) -> bytes:
        try:
            with httpx.Client(transport=self._transport, timeout=timeout) as client:
                resp = client.post(req.url, headers=req.headers, json=req.body)
        except httpx.HTTPError as exc:
            raise ProviderFailure("transport", str(exc), retriable=True) from exc
        if resp.status_code // 100 == 2:
            return resp.content
        raise classify_error(resp.content, req.provider, status=resp.status_code)

    def complete(
        self,
        conv: Conversation,
        model: ModelRef,
        settings: Settings,
        tools: Optional[list[ToolDefinition]] = None,
        system: Optional[str] = None,
    ) -> ProviderResponse:
        """Encode, send with rate-limit backoff, decode."""
        req = encode_request(conv, model, settings, tools=tools, system=system)
        timeout = settings.get("http_timeout")
        delay = 1.0
        for attempt in range(self._max_retries + 1):
            try:
                raw = self.send(req, timeout=timeout)
                break
            except ProviderFailure as failure:
                if failure.error_class == "context_length":
                    raise ProviderFailure(
                        "context_length",
                        str(failure) + " (hint: reduce the length of the messages:"
                        " reset the context with -R, narrow auto.init_commands,"
                        " or lower max_tokens)",
                        retriable=False,
                        limit=failure.limit, requested=failure.requested,
                    ) from None
                if not failure.retriable or attempt == self._max_retries:
                    raise
                self._sleep(delay)
                delay = min(delay * 2, 30.0)
        return decode_response(raw, model.provider)
