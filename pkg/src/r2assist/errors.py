"""Shared exception types."""
from __future__ import annotations


class R2AssistError(Exception):
    """Base class for all r2assist errors."""


class UnknownKeyError(R2AssistError):
    def __init__(self, key: str, valid_keys: list[str]):
        self.key = key
        self.valid_keys = valid_keys
        super().__init__(
            f"unknown setting '{key}'. Valid keys: {', '.join(valid_keys)}"
        )


class ParseFailureError(R2AssistError):
    def __init__(self, key: str, value: str, expected: str):
        self.key = key
        self.value = value
        self.expected = expected
        super().__init__(f"cannot parse '{value}' for '{key}': expected {expected}")


class UnknownProviderError(R2AssistError):
    pass


class AmbiguousModelError(R2AssistError):
    pass


class MissingKeyError(R2AssistError):
    def __init__(self, provider: str, env_var: str):
        self.provider = provider
        self.env_var = env_var
        super().__init__(
            f"no API key for provider '{provider}': set the {env_var} environment variable"
        )


class InvalidMessageError(R2AssistError):
    pass


class BudgetTooSmallError(R2AssistError):
    pass


class ToolsUnsupportedError(R2AssistError):
    pass


class NoFunctionHereError(R2AssistError):
    pass


class SessionDeadError(R2AssistError):
    pass


class CommandTimeoutError(R2AssistError):
    def __init__(self, command: str, partial_output: str = ""):
        self.command = command
        self.partial_output = partial_output
        super().__init__(f"command timed out: {command!r}")


class BinaryFileError(R2AssistError):
    pass
