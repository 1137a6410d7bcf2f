"""Single-shot prompt commands: decompile, explain, rename, vulns, file/free query."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .bridge import DisasmSession
from .config import ModelRef, Settings
from .conversation import ChatMessage, Conversation, is_clean_text
from .costs import CostLedger, PriceTable, estimate_tokens
from .errors import BinaryFileError, NoFunctionHereError
from .gateway import ProviderGateway
from .templates import (
    CONCISE_SUFFIX,
    TemplateSet,
    strip_markdown_fences,
    wrap_code,
)


class DirectKind(str, Enum):
    DECOMPILE = "decompile"
    DECOMPILE_RECURSIVE = "decompile_recursive"
    EXPLAIN = "explain"
    SUGGEST_NAME = "suggest_name"
    SUGGEST_VARS = "suggest_vars"
    SIGNATURE = "signature"
    FIND_VULNS = "find_vulns"
    FIND_VULNS_RECURSIVE = "find_vulns_recursive"
    FILE_QUERY = "file_query"
    FREE_QUERY = "free_query"


# Kinds whose prompt embeds disassembler output
CODE_KINDS = {
    DirectKind.DECOMPILE, DirectKind.DECOMPILE_RECURSIVE, DirectKind.EXPLAIN,
    DirectKind.SUGGEST_NAME, DirectKind.SUGGEST_VARS, DirectKind.SIGNATURE,
}
DECOMPILE_KINDS = {DirectKind.DECOMPILE, DirectKind.DECOMPILE_RECURSIVE}
RECURSIVE_KINDS = {DirectKind.DECOMPILE_RECURSIVE, DirectKind.FIND_VULNS_RECURSIVE}


@dataclass
class PromptBundle:
    instruction_text: str
    code_context: str
    language_hint: str

    def user_text(self) -> str:
        if self.code_context:
            return f"{self.instruction_text}\n{self.code_context}"
        return self.instruction_text

    def estimated_tokens(self) -> int:
        return estimate_tokens(self.user_text())


def gather_code_context(session: DisasmSession, kind: DirectKind) -> str:
    """Pseudo-decompilation of the current function; recursive kinds add callees."""
    result = session.exec("pdc")
    code = result.output.strip("\n")
    if not code:
        raise NoFunctionHereError("no function at the current address")
    if kind in RECURSIVE_KINDS:
        seen = set()
        for name in session.exec("axffq").output.split():
            if name in seen:
                continue
            seen.add(name)
            callee = session.exec(f"pdc @ {name}").output.strip("\n")
            if callee:
                code += f"\n// ---- callee: {name} ----\n{callee}"
    return code


def build_direct_prompt(kind: DirectKind, code: str, settings: Settings,
                        templates: Optional[TemplateSet] = None,
                        query: str = "") -> PromptBundle:
    templates = templates or TemplateSet.load(settings.get("template_path"))
    language = settings.get("output_language")
    if kind in DECOMPILE_KINDS:
        instruction = templates.get("decompile", language=language)
        context = wrap_code(code)
    elif kind in (DirectKind.FIND_VULNS, DirectKind.FIND_VULNS_RECURSIVE):
        instruction = templates.get("find_vulns")
        context = wrap_code(code, header="Decompiled code:")
    elif kind in CODE_KINDS:
        instruction = templates.get(kind.value, language=language)
        context = wrap_code(code)
    elif kind == DirectKind.FILE_QUERY:
        instruction = templates.get("file_query", query=query)
        context = wrap_code(code, header="File contents:")
    else:
        instruction = templates.get("free_query", query=query)
        context = ""
    if (settings.get("concise") and kind not in DECOMPILE_KINDS
            and not instruction.endswith(CONCISE_SUFFIX)):
        instruction = f"{instruction} {CONCISE_SUFFIX}"
    return PromptBundle(instruction_text=instruction, code_context=context,
                        language_hint=language)


class DirectRunner:
    """Runs direct commands against one session's conversation and ledger."""

    def __init__(self, gateway: ProviderGateway, conv: Conversation,
                 ledger: CostLedger, price_table: PriceTable,
                 session: Optional[DisasmSession] = None):
        self.gateway = gateway
        self.conv = conv
        self.ledger = ledger
        self.price_table = price_table
        self.session = session

    def _send(self, user_text: str, settings: Settings,
              model: Optional[ModelRef] = None) -> str:
        model = model or settings.model_ref
        self.conv.append(ChatMessage.user(user_text, origin="direct_template"))
        self.conv.truncate_to_budget(settings.max_tokens, estimate_tokens)
        response = self.gateway.complete(self.conv, model, settings)
        answer = response.text()
        self.conv.append(ChatMessage.assistant(answer, origin="auto_loop"))
        self.ledger.record_usage(response.usage, model, self.price_table)
        return answer

    def run_direct(self, kind: DirectKind, settings: Settings,
                   query: str = "") -> str:
        """Build the prompt for `kind`, send it, pile the exchange onto the context."""
        if kind in (DirectKind.FIND_VULNS, DirectKind.FIND_VULNS_RECURSIVE):
            # Vulnerability scan runs over the AI-decompiled output, so this
            # chains two model calls.
            base = (DirectKind.DECOMPILE_RECURSIVE
                    if kind == DirectKind.FIND_VULNS_RECURSIVE
                    else DirectKind.DECOMPILE)
            decompiled = self.run_direct(base, settings)
            bundle = build_direct_prompt(kind, decompiled, settings)
            return self._send(bundle.user_text(), settings)

        if kind in CODE_KINDS:
            if self.session is None:
                raise NoFunctionHereError("no disassembler session open")
            code = gather_code_context(self.session, kind)
            bundle = build_direct_prompt(kind, code, settings)
        else:
            bundle = build_direct_prompt(kind, "", settings, query=query)
        answer = self._send(bundle.user_text(), settings)
        if kind in DECOMPILE_KINDS:
            answer = strip_markdown_fences(answer)
        return answer

    def file_query(self, path: str, query: str, settings: Settings) -> str:
        try:
            with open(path, encoding="utf-8") as fh:
                content = fh.read()
        except FileNotFoundError:
            raise
        except UnicodeDecodeError:
            raise BinaryFileError(
                f"{path} is not a text file; binary content is never sent"
            ) from None
        if not is_clean_text(content):
            raise BinaryFileError(
                f"{path} contains binary bytes; binary content is never sent"
            )
        bundle = build_direct_prompt(DirectKind.FILE_QUERY, content, settings,
                                     query=query)
        return self._send(bundle.user_text(), settings)
