"""Language-neutral execution of graph-resident source code.

An executor turns a code value plus an input value into an output value.
``BuiltinExecutor`` serves a small table of pure functions for tests and
wiring; ``SubprocessExecutor`` runs real programs: the input is written
to the child's standard input as one canonical JSON document, the output
is parsed from standard output, standard error becomes log lines, and a
nonzero exit is a failure. Debug mode sets BEESTAR_DEBUG=1 in the child
environment (builtins emit DEBUG enter/exit markers instead).

Cancellation is cooperative through a threading.Event: builtins poll it,
subprocesses get terminate-then-kill with a grace period.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field

from .values import Code, Value, ValueType

MODE_NORMAL = "normal"
MODE_DEBUG = "debug"


@dataclass
class ExecutionResult:
    value: Value | None = None
    failure: str | None = None
    cancelled: bool = False
    duration: float = 0.0
    log_lines: list[str] = field(default_factory=list)
    exit_status: int = 0

    @property
    def ok(self) -> bool:
        return self.failure is None and not self.cancelled

    @classmethod
    def failed(cls, reason: str, *, exit_status: int = 1, duration: float = 0.0,
               log_lines=None, cancelled: bool = False) -> "ExecutionResult":
        return cls(failure=reason, cancelled=cancelled, duration=duration,
                   log_lines=list(log_lines or ()), exit_status=exit_status)


def _require_code(code: Value) -> Code:
    if not isinstance(code, Value) or code.tag is not ValueType.CODE:
        raise ValueError("executor needs a code value")
    return code.payload


class BuiltinExecutor:
    """Named pure functions: identity, uppercase, sum, const:<v>, sleep:<s>."""

    language = "builtin"

    def run(self, code: Value, input_value: Value, mode: str = MODE_NORMAL,
            cancel: threading.Event | None = None) -> ExecutionResult:
        body = _require_code(code)
        name = body.text
        start = time.monotonic()
        log: list[str] = []
        if mode == MODE_DEBUG:
            log.append(f"DEBUG enter {name}")

        try:
            value = self._apply(name, input_value, cancel)
        except _Cancelled:
            return ExecutionResult.failed(
                "cancelled", cancelled=True, exit_status=-1,
                duration=time.monotonic() - start, log_lines=log,
            )
        except Exception as exc:
            log.append(str(exc))
            return ExecutionResult.failed(
                str(exc), duration=time.monotonic() - start, log_lines=log,
            )

        if mode == MODE_DEBUG:
            log.append(f"DEBUG exit {name}")
        return ExecutionResult(value=value, duration=time.monotonic() - start,
                               log_lines=log)

    def _apply(self, name: str, input_value: Value,
               cancel: threading.Event | None) -> Value:
        if name == "identity":
            return input_value
        if name == "uppercase":
            if input_value.tag is not ValueType.STRING:
                raise ValueError(f"uppercase needs a string input, got {input_value.tag.value}")
            return Value.string(input_value.payload.upper())
        if name == "sum":
            if input_value.tag is not ValueType.ARRAY:
                raise ValueError(f"sum needs an array input, got {input_value.tag.value}")
            total = 0.0
            for item in input_value.payload:
                if item.tag is not ValueType.NUMBER:
                    raise ValueError("sum needs an array of numbers")
                total += item.payload
            return Value.number(total)
        if name.startswith("const:"):
            literal = name[len("const:"):]
            try:
                return Value.from_json(json.loads(literal))
            except (ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"bad const literal: {exc}") from exc
        if name.startswith("sleep:"):
            try:
                seconds = float(name[len("sleep:"):])
            except ValueError as exc:
                raise ValueError(f"bad sleep duration: {exc}") from exc
            deadline = time.monotonic() + seconds
            while time.monotonic() < deadline:
                if cancel is not None and cancel.is_set():
                    raise _Cancelled()
                time.sleep(min(0.02, max(0.0, deadline - time.monotonic())))
            return input_value
        raise ValueError(f"unknown builtin function {name!r}")


class _Cancelled(Exception):
    pass


# argv templates per code language; {text} is the program body, {file}
# a temp file holding it.
DEFAULT_TEMPLATES: dict[str, list[str]] = {
    "python": [sys.executable, "-c", "{text}"],
    "sh": ["sh", "-c", "{text}"],
    "shell": ["sh", "-c", "{text}"],
}


class SubprocessExecutor:
    """Runs code values as child processes, one canonical document each way."""

    def __init__(self, templates: dict[str, list[str]] | None = None,
                 grace: float = 1.0):
        self.templates = dict(DEFAULT_TEMPLATES)
        if templates:
            self.templates.update(templates)
        self.grace = grace

    def run(self, code: Value, input_value: Value, mode: str = MODE_NORMAL,
            cancel: threading.Event | None = None) -> ExecutionResult:
        body = _require_code(code)
        template = self.templates.get(body.language)
        if template is None:
            return ExecutionResult.failed(f"no command template for language {body.language!r}")

        tmp_path = None
        argv = []
        for part in template:
            if "{file}" in part:
                if tmp_path is None:
                    import tempfile

                    fd, tmp_path = tempfile.mkstemp(prefix="beestar-code-")
                    with os.fdopen(fd, "w", encoding="utf-8") as fh:
                        fh.write(body.text)
                argv.append(part.replace("{file}", tmp_path))
            else:
                argv.append(part.replace("{text}", body.text))

        env = dict(os.environ)
        if mode == MODE_DEBUG:
            env["BEESTAR_DEBUG"] = "1"
        else:
            env.pop("BEESTAR_DEBUG", None)

        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,     # never the parent's stdin
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                env=env,
            )
        except OSError as exc:
            self._cleanup(tmp_path)
            return ExecutionResult.failed(f"spawn failed: {exc}")

        payload = input_value.canonical().encode("utf-8")
        holder: dict = {}

        def _communicate():
            try:
                holder["out"], holder["err"] = proc.communicate(payload)
            except Exception as exc:  # pragma: no cover - broken pipe races
                holder["exc"] = exc

        comm = threading.Thread(target=_communicate, daemon=True)
        comm.start()
        cancelled = False
        while comm.is_alive():
            if cancel is not None and cancel.is_set():
                cancelled = True
                proc.terminate()
                comm.join(self.grace)
                if comm.is_alive():
                    proc.kill()
                    comm.join(5.0)
                break
            comm.join(0.02)
        duration = time.monotonic() - start
        self._cleanup(tmp_path)

        stderr = holder.get("err", b"") or b""
        log = [line for line in stderr.decode("utf-8", "replace").splitlines() if line]
        exit_status = proc.returncode if proc.returncode is not None else -9

        if cancelled:
            return ExecutionResult.failed("cancelled", cancelled=True,
                                          exit_status=exit_status,
                                          duration=duration, log_lines=log)
        if "exc" in holder:
            return ExecutionResult.failed(f"i/o failure: {holder['exc']}",
                                          exit_status=exit_status,
                                          duration=duration, log_lines=log)
        if exit_status != 0:
            reason = f"exit status {exit_status}"
            if log:
                reason += f": {log[-1]}"
            return ExecutionResult.failed(reason, exit_status=exit_status,
                                          duration=duration, log_lines=log)
        stdout = holder.get("out", b"") or b""
        try:
            value = Value.from_json(json.loads(stdout.decode("utf-8")))
        except (ValueError, json.JSONDecodeError) as exc:
            return ExecutionResult.failed(f"unparseable output: {exc}",
                                          duration=duration, log_lines=log)
        return ExecutionResult(value=value, duration=duration, log_lines=log,
                               exit_status=0)

    @staticmethod
    def _cleanup(tmp_path: str | None) -> None:
        if tmp_path is not None:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass


class ExecutorRouter:
    """Picks the executor for a code value by its language."""

    def __init__(self, grace: float = 1.0,
                 templates: dict[str, list[str]] | None = None):
        self._builtin = BuiltinExecutor()
        self._subprocess = SubprocessExecutor(templates=templates, grace=grace)

    def run(self, code: Value, input_value: Value, mode: str = MODE_NORMAL,
            cancel: threading.Event | None = None) -> ExecutionResult:
        body = _require_code(code)
        executor = self._builtin if body.language == "builtin" else self._subprocess
        return executor.run(code, input_value, mode, cancel)
