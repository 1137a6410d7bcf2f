"""Command-line surface and interactive REPL with inline approval prompts."""
from __future__ import annotations

import os
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Optional

from .agent import AutoAgent
from .bridge import DisasmSession
from .config import SettingsRegistry
from .conversation import Conversation
from .costs import CostLedger, PriceTable, render_status
from .direct import DirectKind, DirectRunner
from .errors import R2AssistError
from .gateway import ProviderFailure, ProviderGateway
from .tools import ApprovalDecision, ApprovalRequest

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROVIDER = 2
EXIT_ABORTED = 3

HELP_TEXT = """Usage: r2assist [--bin file] [--serve] [-args] [...]
| -d                 Decompile current function
| -dr                Decompile current function (+ 1 level of recursivity)
| -a [query]         Resolve question using auto mode
| -e                 List settings (use -e key=value to change, -e key to print)
| -h                 Show this help message
| -i [file] [query]  read file and ask the llm with the given query
| -m                 show selected model, list suggested ones, choose one
| -n                 suggest a better name for the current function
| -r                 enter the chat repl
| -L                 show chat logs (See -Lj for json)
| -L-[N]             delete the last (or N last messages from the chat history)
| -R                 reset the chat conversation context
| -Rq ([text])       out of scope: embeddings
| -s                 function signature
| -x                 explain current function
| -v                 suggest better variables names and types
| -V[r]              find vulnerabilities in the decompiled code (-Vr uses -dr)
| [arg]              send the text as a free query and print the output
"""

_FLAG_OPS = {
    "-d": "decompile",
    "-dr": "decompile_recursive",
    "-x": "explain",
    "-n": "suggest_name",
    "-v": "suggest_vars",
    "-s": "signature",
    "-V": "find_vulns",
    "-Vr": "find_vulns_recursive",
    "-r": "repl",
    "-L": "log",
    "-Lj": "log_json",
    "-R": "reset",
    "-Rq": "embeddings_oos",
    "-h": "help",
}


class UsageError(R2AssistError):
    pass


@dataclass
class Invocation:
    op: str
    arg: str = ""
    query: str = ""
    n: int = 1
    binary: str = ""
    serve: bool = False


def parse_invocation(argv: list[str]) -> Invocation:
    """Map the flag surface onto operations; unknown flags raise UsageError."""
    args = list(argv)
    binary = ""
    serve = False
    while args and args[0].startswith("--"):
        if args[0] == "--bin":
            if len(args) < 2:
                raise UsageError("--bin needs a file path")
            binary = args[1]
            args = args[2:]
        elif args[0] == "--serve":
            serve = True
            args = args[1:]
        else:
            raise UsageError(f"unknown option {args[0]}")

    if not args:
        return Invocation(op="repl" if not serve else "serve",
                          binary=binary, serve=serve)

    flag, rest = args[0], args[1:]
    if not flag.startswith("-"):
        return Invocation(op="free_query", arg=" ".join(args),
                          binary=binary, serve=serve)
    if flag in _FLAG_OPS:
        return Invocation(op=_FLAG_OPS[flag], arg=" ".join(rest),
                          binary=binary, serve=serve)
    if flag == "-a":
        if not rest:
            raise UsageError("-a needs a query")
        return Invocation(op="auto", arg=" ".join(rest),
                          binary=binary, serve=serve)
    if flag == "-e":
        return Invocation(op="setting", arg=" ".join(rest),
                          binary=binary, serve=serve)
    if flag == "-m":
        return Invocation(op="model", arg=" ".join(rest),
                          binary=binary, serve=serve)
    if flag == "-i":
        if len(rest) < 2:
            raise UsageError("-i needs a file and a query")
        return Invocation(op="file_query", arg=rest[0],
                          query=" ".join(rest[1:]), binary=binary, serve=serve)
    if flag.startswith("-L-"):
        suffix = flag[3:]
        try:
            n = int(suffix) if suffix else 1
        except ValueError:
            raise UsageError(f"bad count in {flag}") from None
        if n < 1:
            raise UsageError("message count must be >= 1")
        return Invocation(op="drop_last", n=n, binary=binary, serve=serve)
    raise UsageError(f"unknown flag {flag}")


def _edit_in_editor(text: str) -> str:
    editor = os.environ.get("VISUAL") or os.environ.get("EDITOR") or "vi"
    with tempfile.NamedTemporaryFile("w+", suffix=".txt", delete=False) as fh:
        fh.write(text)
        path = fh.name
    try:
        subprocess.run([editor, path], check=False)
        with open(path, encoding="utf-8") as fh:
            return fh.read().rstrip("\n")
    finally:
        os.unlink(path)


def prompt_approval(request: ApprovalRequest, *,
                    input_fn=input, output=sys.stdout) -> ApprovalDecision:
    """Inline approval prompt: approve / edit-in-editor / deny."""
    print(f"\n--- tool request: {request.tool_call.name} ---", file=output)
    for flag in request.danger:
        print(f"!! DANGER: {flag}", file=output)
    print(request.payload_text, file=output)
    while True:
        try:
            answer = input_fn("approve [y], edit [e], deny [n]? ").strip().lower()
        except EOFError:
            return ApprovalDecision(verdict="deny", reason="input closed")
        if answer in ("y", "yes", "a"):
            return ApprovalDecision(verdict="approve")
        if answer in ("e", "edit"):
            edited = _edit_in_editor(request.payload_text)
            return ApprovalDecision(verdict="approve_edited",
                                    edited_payload=edited)
        if answer in ("n", "no", "d"):
            reason = input_fn("reason (optional): ").strip()
            return ApprovalDecision(verdict="deny", reason=reason)
        print("please answer y, e or n", file=output)


class CliApp:
    """Wires the session core for standalone CLI use."""

    def __init__(self, registry: Optional[SettingsRegistry] = None,
                 gateway: Optional[ProviderGateway] = None,
                 disasm: Optional[DisasmSession] = None,
                 output=None, input_fn=input):
        self.registry = registry or SettingsRegistry()
        self.gateway = gateway or ProviderGateway()
        self.disasm = disasm
        self.conv = Conversation()
        settings = self.registry.snapshot()
        self.ledger = CostLedger(max_runs=settings.max_runs)
        self.price_table = PriceTable.load(settings.get("pricing_path") or None)
        self.output = output or sys.stdout
        self.input_fn = input_fn

    def _print(self, text: str) -> None:
        print(text, file=self.output)

    def _runner(self) -> DirectRunner:
        return DirectRunner(self.gateway, self.conv, self.ledger,
                            self.price_table, session=self.disasm)

    def execute(self, inv: Invocation) -> int:
        settings = self.registry.snapshot()
        try:
            if inv.op == "help":
                self._print(HELP_TEXT)
            elif inv.op == "embeddings_oos":
                self._print("out of scope: embeddings")
            elif inv.op == "reset":
                self.conv.reset()
            elif inv.op == "drop_last":
                self.conv.drop_last(inv.n)
            elif inv.op == "log":
                self._print(self.conv.render_log("plain"))
            elif inv.op == "log_json":
                self._print(self.conv.render_log("structured"))
            elif inv.op == "setting":
                self._do_setting(inv.arg)
            elif inv.op == "model":
                self._do_model(inv.arg)
            elif inv.op == "file_query":
                answer = self._runner().file_query(inv.arg, inv.query, settings)
                self._print(answer)
            elif inv.op == "free_query":
                answer = self._runner().run_direct(
                    DirectKind.FREE_QUERY, settings, query=inv.arg)
                self._print(answer)
            elif inv.op == "auto":
                return self._do_auto(inv.arg, settings)
            elif inv.op in DirectKind._value2member_map_:
                answer = self._runner().run_direct(
                    DirectKind(inv.op), settings)
                self._print(answer)
            else:
                raise UsageError(f"unhandled operation '{inv.op}'")
        except ProviderFailure as exc:
            self._print(f"provider error: {exc}")
            return EXIT_PROVIDER
        except R2AssistError as exc:
            self._print(f"error: {exc}")
            return EXIT_USAGE
        except FileNotFoundError as exc:
            self._print(f"error: file not found: {exc}")
            return EXIT_USAGE
        return EXIT_OK

    def _do_setting(self, arg: str) -> None:
        if not arg:
            self._print(self.registry.describe())
        elif "=" in arg:
            key, _, value = arg.partition("=")
            self.registry.set(key.strip(), value.strip())
        else:
            self._print(f"{arg} = {self.registry.get(arg)}")

    def _do_model(self, arg: str) -> None:
        from .config import SUGGESTED_MODELS
        if not arg:
            settings = self.registry.snapshot()
            self._print(f"selected: {settings.model_ref}")
            for provider, names in sorted(SUGGESTED_MODELS.items()):
                for name in names:
                    self._print(f"  {provider}:{name}")
        else:
            ref = self.registry.select_model(arg)
            self._print(f"selected: {ref}")

    def _do_auto(self, query: str, settings) -> int:
        def approver(request: ApprovalRequest) -> ApprovalDecision:
            return prompt_approval(request, input_fn=self.input_fn,
                                   output=self.output)

        def emit(kind: str, payload: dict) -> None:
            if kind == "status_updated":
                self._print(payload["line"])

        agent = AutoAgent(provider=self.gateway, settings=settings,
                          approver=approver, session=self.disasm,
                          conv=self.conv, ledger=self.ledger,
                          price_table=self.price_table, emit=emit)
        result = agent.run(query)
        if result.state.phase == "aborted":
            self._print("aborted: interaction limit reached")
            return EXIT_ABORTED
        self._print(result.final_answer or "")
        return EXIT_OK

    def repl(self) -> int:
        """Read lines and dispatch them as flag commands or free queries."""
        self._print("r2assist repl; -h for help, Ctrl-D to exit")
        while True:
            try:
                line = self.input_fn(">> ").strip()
            except EOFError:
                self._print("")
                return EXIT_OK
            if not line:
                continue
            if line in ("q", "quit", "exit"):
                return EXIT_OK
            try:
                inv = parse_invocation(line.split())
            except UsageError as exc:
                self._print(f"usage: {exc}")
                continue
            if inv.op == "repl":
                continue
            self.execute(inv)


def main(argv: Optional[list[str]] = None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    try:
        inv = parse_invocation(argv)
    except UsageError as exc:
        print(f"error: {exc}\n{HELP_TEXT}", file=sys.stderr)
        return EXIT_USAGE

    disasm = None
    if inv.binary:
        try:
            disasm = DisasmSession.open(inv.binary)
        except (FileNotFoundError, R2AssistError) as exc:
            print(f"error: cannot open {inv.binary}: {exc}", file=sys.stderr)
            return EXIT_USAGE

    if inv.serve:
        from .service import SessionState, serve
        state = SessionState(disasm_session=disasm)
        serve(state)
        return EXIT_OK

    app = CliApp(disasm=disasm)
    if inv.op == "repl":
        return app.repl()
    return app.execute(inv)


if __name__ == "__main__":
    sys.exit(main())
