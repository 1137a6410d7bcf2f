"""Drive a disassembler process over its command pipe, plus a scriptable mock backend."""
from __future__ import annotations

import os
import select
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .conversation import sanitize_text
from .errors import CommandTimeoutError, R2AssistError, SessionDeadError

# Per-command output cap; longer output is elided with a marker.
OUTPUT_CAP_BYTES = 64 * 1024
OUTPUT_ELISION_MARKER = "\n[...output elided: exceeded 64 KiB cap...]\n"

R2_EXECUTABLES = ("radare2", "r2")


class SpawnFailureError(R2AssistError):
    pass


@dataclass
class CommandResult:
    command: str
    output: str
    duration: float
    timed_out: bool = False


class MockBackend:
    """Canned command -> output map for tests; supports artificial delays."""

    def __init__(self, fixtures: dict[str, Union[str, Callable[[], str]]],
                 delays: Optional[dict[str, float]] = None,
                 default: str = ""):
        self.fixtures = dict(fixtures)
        self.delays = delays or {}
        self.default = default
        self.executed: list[str] = []
        self.alive = True

    def run(self, command: str, timeout: float) -> str:
        if not self.alive:
            raise SessionDeadError("mock backend closed")
        delay = self.delays.get(command, 0.0)
        if delay > timeout:
            raise CommandTimeoutError(command)
        if delay:
            time.sleep(delay)
        self.executed.append(command)
        value = self.fixtures.get(command, self.default)
        return value() if callable(value) else value

    def close(self) -> None:
        self.alive = False


class ProcessBackend:
    """External disassembler spoken to over its scripting pipe.

    Commands are written newline-terminated; replies are read up to a NUL
    terminator (the pipe convention of `r2 -q0`).
    """

    def __init__(self, binary_path: str, executable: Optional[str] = None):
        exe = executable or next(
            (e for e in R2_EXECUTABLES if shutil.which(e)), None)
        if exe is None:
            raise SpawnFailureError(
                "no disassembler executable found (tried: "
                + ", ".join(R2_EXECUTABLES) + ")")
        try:
            self.proc = subprocess.Popen(
                [exe, "-q0", binary_path],
                stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL)
        except OSError as exc:
            raise SpawnFailureError(f"cannot spawn {exe}: {exc}") from exc
        # -q0 emits one NUL once the binary is loaded
        self._read_until_nul(timeout=30.0)

    @property
    def alive(self) -> bool:
        return self.proc.poll() is None

    def _read_until_nul(self, timeout: float) -> str:
        chunks = []
        deadline = time.monotonic() + timeout
        fd = self.proc.stdout.fileno()
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise CommandTimeoutError(
                    "<pipe read>", b"".join(chunks).decode("utf-8", "replace"))
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            data = os.read(fd, 65536)
            if not data:
                raise SessionDeadError("disassembler process closed its pipe")
            if b"\x00" in data:
                chunks.append(data.split(b"\x00", 1)[0])
                break
            chunks.append(data)
        return b"".join(chunks).decode("utf-8", errors="replace")

    def run(self, command: str, timeout: float) -> str:
        if not self.alive:
            raise SessionDeadError("disassembler process has exited")
        try:
            self.proc.stdin.write(command.encode() + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise SessionDeadError("disassembler process has exited") from None
        return self._read_until_nul(timeout)

    def close(self) -> None:
        if self.alive:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class DisasmSession:
    """One live session per analyzed binary; commands run strictly in order."""

    def __init__(self, backend, binary_path: str = "", timeout: float = 60.0):
        self.backend = backend
        self.binary_path = binary_path
        self.timeout = timeout
        self._lock = threading.Lock()

    @classmethod
    def open(cls, binary_path: str, timeout: float = 60.0) -> "DisasmSession":
        if not os.path.isfile(binary_path):
            raise FileNotFoundError(binary_path)
        return cls(ProcessBackend(binary_path), binary_path, timeout)

    @classmethod
    def open_mock(cls, fixtures: dict, timeout: float = 60.0,
                  **kwargs) -> "DisasmSession":
        return cls(MockBackend(fixtures, **kwargs), "<mock>", timeout)

    @property
    def alive(self) -> bool:
        return self.backend.alive

    def exec(self, command: str) -> CommandResult:
        with self._lock:
            start = time.monotonic()
            try:
                output = self.backend.run(command, self.timeout)
            except CommandTimeoutError as exc:
                return CommandResult(command=command,
                                     output=exc.partial_output,
                                     duration=time.monotonic() - start,
                                     timed_out=True)
            output = sanitize_text(output)
            if len(output) > OUTPUT_CAP_BYTES:
                output = output[:OUTPUT_CAP_BYTES] + OUTPUT_ELISION_MARKER
            return CommandResult(command=command, output=output,
                                 duration=time.monotonic() - start)

    def init_snapshot(self, init_commands: str) -> str:
        """Run the semicolon-separated init commands, concatenating outputs in order."""
        outputs = []
        for command in init_commands.split(";"):
            command = command.strip()
            if not command:
                continue
            try:
                result = self.exec(command)
            except SessionDeadError:
                raise
            except R2AssistError as exc:
                outputs.append(f"[{command}: error: {exc}]")
                continue
            outputs.append(result.output)
        return "\n".join(outputs)

    def close(self) -> None:
        self.backend.close()
