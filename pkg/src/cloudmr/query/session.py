"""Interactive and batch front ends for the query layer."""

from __future__ import annotations

import sys
from typing import Callable, Iterable, TextIO

from cloudmr.engine import Engine
from cloudmr.errors import CloudMRError, CoercionError, UnknownFile
from cloudmr.query import diagnostics as dg
from cloudmr.query.diagnostics import Diagnostic, Severity
from cloudmr.query.runtime import Executor, Relation
from cloudmr.query.semantics import Analyzer
from cloudmr.query.syntax import parse
from cloudmr.store import BlockStore

PROMPT = "grunt> "
CONTINUATION = ">> "


class Session:
    """Runs statements one at a time, like the grunt shell.

    Every line of console output (diagnostics, DESCRIBE and DUMP results) is
    passed to ``emit`` and kept in ``transcript``.
    """

    def __init__(
        self,
        store: BlockStore,
        engine: Engine | None = None,
        num_workers: int = 4,
        emit: Callable[[str], None] | None = None,
    ):
        self.store = store
        self.analyzer = Analyzer()
        self.executor = Executor(store, engine, num_workers)
        self.diagnostics: list[Diagnostic] = []
        self.transcript: list[str] = []
        self._emit = emit
        self.next_line = 1

    @property
    def relations(self) -> dict[str, Relation]:
        return {a: r for a, r in self.executor.relations.items() if a in self.analyzer.catalog}

    @property
    def error_count(self) -> int:
        return sum(d.severity is Severity.ERROR for d in self.diagnostics)

    def _out(self, line: str) -> None:
        self.transcript.append(line)
        if self._emit is not None:
            self._emit(line)

    def _report(self, diag: Diagnostic) -> None:
        self.diagnostics.append(diag)
        self._out(diag.format())

    def run_text(self, text: str) -> None:
        """Parse and run ``text``, numbering its lines after everything seen so far."""
        first = self.next_line
        self.next_line += text.count("\n") + (0 if text.endswith("\n") else 1)
        for stmt in parse(text, first):
            checked, diags = self.analyzer.check(stmt)
            for d in diags:
                self._report(d)
            if checked is None:
                continue
            try:
                lines = self.executor.run(checked)
            except CoercionError as exc:
                self._fail(checked, dg.error(dg.COERCION_FAILED, str(exc)))
                continue
            except UnknownFile as exc:
                self._fail(checked, dg.error(dg.INPUT_ERROR, f"Input path does not exist: {exc}"))
                continue
            except CloudMRError as exc:
                self._fail(checked, dg.error(dg.INPUT_ERROR, str(exc)))
                continue
            for line in lines:
                self._out(line)

    def _fail(self, checked, diag: Diagnostic) -> None:
        self.analyzer.mark_failed(getattr(checked.statement, "alias", None))
        self._report(diag)

    def replay(self, lines: Iterable[str]) -> str:
        """Feed lines as if typed at the prompt; return the console transcript."""
        out: list[str] = []
        saved = self._emit
        self._emit = out.append
        try:
            buffer = ""
            for line in lines:
                out.append((CONTINUATION if buffer else PROMPT) + line)
                buffer += line + "\n"
                if _complete(buffer):
                    self.run_text(buffer)
                    buffer = ""
            if buffer.strip():
                self.run_text(buffer)
        finally:
            self._emit = saved
        return "\n".join(out) + "\n"


def _complete(buffer: str) -> bool:
    stripped = buffer.strip()
    if not stripped:
        return True
    # a ';' inside a quoted literal does not end the statement
    return stripped.endswith(";") and stripped.count("'") % 2 == 0


def run_script(store: BlockStore, text: str, num_workers: int = 4, out: TextIO | None = None) -> Session:
    out = out or sys.stdout
    session = Session(store, num_workers=num_workers, emit=lambda line: print(line, file=out))
    session.run_text(text)
    return session


def repl(store: BlockStore, stdin: TextIO | None = None, stdout: TextIO | None = None, num_workers: int = 4) -> Session:
    """Read statements at a ``grunt>`` prompt until EOF or ``quit``."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    session = Session(store, num_workers=num_workers, emit=lambda line: print(line, file=stdout, flush=True))
    buffer = ""
    while True:
        stdout.write(CONTINUATION if buffer else PROMPT)
        stdout.flush()
        line = stdin.readline()
        if not line:
            if buffer.strip():
                session.run_text(buffer)
            stdout.write("\n")
            break
        if not buffer and line.strip().lower() in ("quit", "quit;", "exit", "exit;"):
            break
        buffer += line if line.endswith("\n") else line + "\n"
        if _complete(buffer):
            if buffer.strip():
                session.run_text(buffer)
            else:
                session.next_line += 1
            buffer = ""
    return session
