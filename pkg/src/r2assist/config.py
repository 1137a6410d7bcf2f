"""Runtime settings registry, model selection and API key resolution."""
from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .errors import (
    AmbiguousModelError,
    ParseFailureError,
    UnknownKeyError,
    UnknownProviderError,
)

PROVIDERS = ("anthropic", "openai", "mistral", "gemini", "groq", "xai", "ollama")

# Providers that do not need an API key (locally hosted, ollama-compatible).
KEYLESS_PROVIDERS = {"ollama"}

# Seed list of suggested models, used to resolve bare model names.
SUGGESTED_MODELS = {
    "anthropic": [
        "claude-3-7-sonnet-20250219",
        "claude-3-5-sonnet-20241022",
        "claude-3-haiku-20240307",
    ],
    "gemini": ["gemini-1.5-flash", "gemini-1.0-pro"],
    "groq": [
        "deepseek-r1-distill-llama-70b",
        "deepseek-r1-distill-qwen-32b",
        "llama-3.3-70b-versatile",
    ],
    "mistral": ["mistral-large-latest"],
    "openai": ["gpt-4", "gpt-4o-mini", "gpt-3.5-turbo"],
    "xai": ["grok-2-1212"],
}


@dataclass(frozen=True)
class ModelRef:
    """A provider plus its provider-specific model name."""

    provider: str
    model_name: str

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise UnknownProviderError(
                f"unknown provider '{self.provider}' (supported: {', '.join(PROVIDERS)})"
            )
        if not self.model_name:
            raise ValueError("model_name must be non-empty")

    def __str__(self) -> str:
        return f"{self.provider}:{self.model_name}"

    @classmethod
    def parse(cls, spec: str) -> "ModelRef":
        provider, _, name = spec.partition(":")
        return cls(provider, name)


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(s)


def _parse_unit_float(s: str) -> float:
    v = float(s)
    if not (0.0 <= v <= 1.0) or math.isnan(v):
        raise ValueError(s)
    return v


def _parse_pos_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise ValueError(s)
    return v


def _parse_pos_float(s: str) -> float:
    v = float(s)
    if v <= 0:
        raise ValueError(s)
    return v


def _parse_provider(s: str) -> str:
    if s not in PROVIDERS:
        raise ValueError(s)
    return s


@dataclass(frozen=True)
class SettingSpec:
    parse: Callable[[str], Any]
    default: Any
    type_name: str
    description: str


SETTING_SPECS: dict[str, SettingSpec] = {
    "api": SettingSpec(_parse_provider, "anthropic", "provider",
                       "LLM provider: " + "|".join(PROVIDERS)),
    "model": SettingSpec(str, "claude-3-7-sonnet-20250219", "string",
                         "model name for the selected provider"),
    "temperature": SettingSpec(_parse_unit_float, 0.002, "real in [0,1]",
                               "sampling temperature"),
    "top_p": SettingSpec(_parse_unit_float, 0.95, "real in [0,1]",
                         "nucleus sampling threshold"),
    "max_tokens": SettingSpec(_parse_pos_int, 4096, "positive integer",
                              "request-side token budget"),
    "auto.max_runs": SettingSpec(_parse_pos_int, 100, "positive integer",
                                 "max model interactions per auto query"),
    "auto.init_commands": SettingSpec(str, "aaa;iI;afl", "string",
                                      "semicolon-separated r2 commands for the initial snapshot"),
    "auto.resend_init": SettingSpec(_parse_bool, True, "boolean",
                                    "re-send the init snapshot on every auto request"),
    "system_prompt": SettingSpec(str, "", "string",
                                 "override for the auto-mode system prompt"),
    "output_language": SettingSpec(str, "C", "string",
                                   "target programming language for decompiled code"),
    "pricing_path": SettingSpec(str, "", "file path",
                                "pricing table file (empty = bundled table)"),
    "template_path": SettingSpec(str, "", "file path",
                                 "prompt template override file"),
    "base_url": SettingSpec(str, "", "URL",
                            "override the provider endpoint base URL"),
    "http_timeout": SettingSpec(_parse_pos_float, 120.0, "positive real",
                                "provider request timeout in seconds"),
    "tool_timeout": SettingSpec(_parse_pos_float, 60.0, "positive real",
                                "tool execution timeout in seconds"),
    "python_interpreter": SettingSpec(str, "python3", "string",
                                      "interpreter used by the run_python tool"),
    "js_interpreter": SettingSpec(str, "node", "string",
                                  "interpreter used by the execute_js tool"),
    "concise": SettingSpec(_parse_bool, False, "boolean",
                           "append a conciseness hint to direct prompts"),
}

# Environment variable that may point at a key=value config file.
CONFIG_FILE_ENV = "R2ASSIST_CONFIG"


class Settings:
    """Immutable snapshot of all runtime settings."""

    def __init__(self, values: dict[str, Any]):
        self._values = dict(values)

    def get(self, key: str) -> Any:
        if key not in SETTING_SPECS:
            raise UnknownKeyError(key, sorted(SETTING_SPECS))
        return self._values[key]

    # Convenience accessors for the hot keys.
    @property
    def api(self) -> str:
        return self._values["api"]

    @property
    def model(self) -> str:
        return self._values["model"]

    @property
    def model_ref(self) -> ModelRef:
        return ModelRef(self.api, self.model)

    @property
    def temperature(self) -> float:
        return self._values["temperature"]

    @property
    def top_p(self) -> float:
        return self._values["top_p"]

    @property
    def max_tokens(self) -> int:
        return self._values["max_tokens"]

    @property
    def max_runs(self) -> int:
        return self._values["auto.max_runs"]

    @property
    def init_commands(self) -> str:
        return self._values["auto.init_commands"]

    def as_dict(self) -> dict[str, Any]:
        return dict(self._values)


class SettingsRegistry:
    """Single-writer settings store; readers take immutable snapshots."""

    def __init__(self, config_file: Optional[str] = None):
        self._lock = threading.Lock()
        self._values = {k: spec.default for k, spec in SETTING_SPECS.items()}
        path = config_file if config_file is not None else os.environ.get(CONFIG_FILE_ENV)
        if path:
            self._load_file(path)

    def _load_file(self, path: str) -> None:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                self.set(key.strip(), value.strip())

    def set(self, key: str, value: str) -> Settings:
        if key not in SETTING_SPECS:
            raise UnknownKeyError(key, sorted(SETTING_SPECS))
        spec = SETTING_SPECS[key]
        try:
            typed = spec.parse(value)
        except (ValueError, TypeError):
            raise ParseFailureError(key, value, spec.type_name) from None
        with self._lock:
            self._values[key] = typed
        return self.snapshot()

    def get(self, key: str) -> Any:
        if key not in SETTING_SPECS:
            raise UnknownKeyError(key, sorted(SETTING_SPECS))
        with self._lock:
            return self._values[key]

    def snapshot(self) -> Settings:
        with self._lock:
            return Settings(self._values)

    def select_model(self, spec: str) -> ModelRef:
        """Select the current model from 'provider:name' or a bare suggested name."""
        if ":" in spec:
            ref = ModelRef.parse(spec)
        else:
            matches = [
                ModelRef(provider, name)
                for provider, names in SUGGESTED_MODELS.items()
                for name in names
                if name == spec
            ]
            if not matches:
                raise UnknownProviderError(
                    f"'{spec}' is not in the suggested model list; use provider:name"
                )
            if len(matches) > 1:
                raise AmbiguousModelError(
                    f"'{spec}' matches several providers: "
                    + ", ".join(str(m) for m in matches)
                )
            ref = matches[0]
        with self._lock:
            self._values["api"] = ref.provider
            self._values["model"] = ref.model_name
        return ref

    def describe(self) -> str:
        """All keys with current values, one per line (the `-e` listing)."""
        with self._lock:
            lines = [
                f"{key} = {self._values[key]}    # {SETTING_SPECS[key].description}"
                for key in sorted(SETTING_SPECS)
            ]
        return "\n".join(lines)


def api_key_env_var(provider: str) -> str:
    return f"{provider.upper()}_API_KEY"


def resolve_api_key(provider: str) -> Optional[str]:
    """Look up the provider's API key in the environment.

    Keyless providers return None without error; for the others a missing
    key is only an error at request time, so None is returned here too.
    """
    if provider not in PROVIDERS:
        raise UnknownProviderError(f"unknown provider '{provider}'")
    if provider in KEYLESS_PROVIDERS:
        return None
    return os.environ.get(api_key_env_var(provider))
