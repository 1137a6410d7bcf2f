"""Prompt templates for direct commands and the auto-mode system prompt.

All templates can be overridden by a JSON file (setting `template_path`)
mapping template name -> text. Placeholders: {code}, {language}, {query}.
"""
from __future__ import annotations

import json
from typing import Optional

DECOMPILE_INSTRUCTION = (
    "Rewrite this function and respond ONLY with code, NO explanations, "
    "NO markdown, Change 'goto' into if/else/for/while, Simplify as much as "
    "possible, use better variable names, take function arguments and strings "
    "from comments like 'string:'. Translate this code into {language} "
    "programming language. Do not explain anything:"
)

CODE_BEGIN = "[BEGIN]"
CODE_END = "[END]"

CONCISE_SUFFIX = "answer in 1 or 2 lines at most"

AUTO_SYSTEM_PROMPT = (
    "You are a reverse engineer and you are using radare2 to analyze a binary.\n"
    "The user will ask questions about the binary and you will respond with "
    "helpful, factual answers based only on evidence you gather.\n"
    "You may request the provided tools to gather information. Every tool "
    "request is reviewed by the human analyst, who may edit or deny it; if a "
    "request is denied, adapt your plan instead of repeating it.\n"
    "Prefer cheap, narrow r2 commands over broad ones. Never ask to run the "
    "analyzed binary unless the user explicitly wants dynamic analysis.\n"
    "When you have enough information, answer directly without using any tool."
)

DEFAULT_TEMPLATES = {
    "decompile": DECOMPILE_INSTRUCTION,
    "explain": "Explain what this function does and what it is used for.",
    "suggest_name": (
        "Suggest a better name for this function. Respond ONLY with the name, "
        "nothing else."
    ),
    "suggest_vars": (
        "Suggest better names and types for the variables of this function. "
        "List one suggestion per line as old_name -> new_name: type."
    ),
    "signature": (
        "Give the most likely signature for this function as a single line of "
        "{language} code. Respond ONLY with the signature."
    ),
    "find_vulns": (
        "Find vulnerabilities in the following decompiled code. For each one, "
        "name the weakness, the affected line and how to trigger it."
    ),
    "file_query": "{query}",
    "free_query": "{query}",
    "system": AUTO_SYSTEM_PROMPT,
}


class TemplateSet:
    """Default templates merged with an optional user override file."""

    def __init__(self, overrides: Optional[dict[str, str]] = None):
        self.templates = {**DEFAULT_TEMPLATES, **(overrides or {})}

    @classmethod
    def load(cls, path: str = "") -> "TemplateSet":
        if not path:
            return cls()
        with open(path, encoding="utf-8") as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(DEFAULT_TEMPLATES)
        if unknown:
            raise ValueError(
                "unknown template names: " + ", ".join(sorted(unknown)))
        return cls(overrides)

    def get(self, name: str, **fields) -> str:
        return self.templates[name].format_map(_Fields(fields))


class _Fields(dict):
    # leave unknown placeholders untouched instead of raising
    def __missing__(self, key):
        return "{" + key + "}"


def wrap_code(code: str, header: str = "Output of pdc:") -> str:
    return f"{header}\n{CODE_BEGIN}\n{code}\n{CODE_END}"


def strip_markdown_fences(text: str) -> str:
    """Drop accidental ``` fences models emit despite instructions."""
    lines = text.splitlines()
    kept = [ln for ln in lines if not ln.strip().startswith("```")]
    return "\n".join(kept).strip("\n")
