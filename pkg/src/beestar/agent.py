"""The standalone agent: a message loop mapping play/stop/debug to behavior.

An AgentWorker owns one RPC listener and one runner thread, so at most
one execution is ever in flight. Play triggers arriving mid-run coalesce
into a single pending slot (newest wins); stop cancels the current run,
discards anything pending, and is idempotent. Source code and input are
read from the graph at run start, so a coalesced run always sees the
latest committed input and a source-code edit takes effect on the next
play without a restart.

The worker mirrors its state to the AgentEntity's ``status`` property
after every transition and writes each successful result back through
``apply_agent_output`` exactly once. Cancelled and failed runs write
nothing.

The same class backs both deployment targets: ``agent_main`` runs it as
a standalone process against a remote server, the simulated target runs
it as threads in the host process. Either way it speaks the same frame
protocol on a loopback TCP endpoint.
"""

from __future__ import annotations

import logging
import os
import signal
import sys
import threading
import time

from .engine import CAUSE_AGENT_LOG, CAUSE_AGENT_STATUS
from .errors import ChainDepthExceeded, RegistrationFailure
from .executors import MODE_DEBUG, MODE_NORMAL, ExecutorRouter
from .rpc import RpcServer
from .values import Value, ValueType

logger = logging.getLogger(__name__)


def _is_chain_depth_rejection(exc: Exception) -> bool:
    """A depth-policy veto of an output write is a halt, not a failure."""
    return isinstance(exc, ChainDepthExceeded) or \
        getattr(exc, "code", "") == "chain_depth_exceeded"

IDLE = "idle"
RUNNING = "running"
STOPPING = "stopping"
ERROR = "error"


class DirectGraphClient:
    """Graph access for workers living in the same process as the engine."""

    def __init__(self, interface, registry=None):
        self.interface = interface
        self.registry = registry

    def get_entity(self, name: str) -> dict:
        return self.interface.graph.entity_dump(name)

    def get_value(self, name: str, prop: str) -> Value:
        return self.interface.graph.get_value(name, prop)

    def set_property(self, name: str, prop: str, value: Value, cause: str) -> dict:
        return self.interface.set_property(name, prop, value, cause).summary_doc()

    def apply_output(self, name: str, value: Value, chain: dict | None) -> dict:
        tup = (chain["id"], chain["hop"]) if chain else None
        return self.interface.apply_agent_output(name, value, tup).summary_doc()

    def register_agent(self, name: str, endpoint: str) -> None:
        if self.registry is not None:
            self.registry.register(name, endpoint)

    def unregister_agent(self, name: str) -> None:
        if self.registry is not None:
            self.registry.unregister(name)

    def log_watchers(self, name: str) -> list[str]:
        graph = self.interface.graph
        agent = graph.entity(name)
        out = []
        for edge in graph.edges():
            if edge.label.kind != "watches" or edge.to_id != agent.id:
                continue
            watcher, _ = graph.edge_endpoints(edge)
            if "LogEntity" in graph.kind_chain(watcher) and watcher not in out:
                out.append(watcher)
        return out


class AgentWorker:
    def __init__(self, name: str, client, *, stop_grace: float = 1.0,
                 host: str = "127.0.0.1"):
        self.name = name
        self.client = client
        self.host = host
        self._router = ExecutorRouter(grace=stop_grace)
        self._lock = threading.Lock()
        self._job_ready = threading.Condition(self._lock)
        self._state = IDLE
        self._pending: tuple[str, dict | None] | None = None   # (mode, chain)
        self._cancel: threading.Event | None = None
        self._closing = False
        self._rpc: RpcServer | None = None
        self._runner = threading.Thread(target=self._run_loop,
                                        name=f"agent-{name}", daemon=True)
        self.runs_started = 0
        self.outputs_written = 0
        self.last_result = None

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> "AgentWorker":
        """Fetch the AgentEntity, open the message endpoint, register."""
        try:
            dump = self.client.get_entity(self.name)
        except Exception as exc:
            raise RegistrationFailure(f"cannot fetch agent entity {self.name!r}: {exc}") from exc
        if "AgentEntity" not in dump.get("chain", []):
            raise RegistrationFailure(f"{self.name!r} is not an AgentEntity")
        self._rpc = RpcServer(self.handle_message, host=self.host).start()
        self._runner.start()
        self._mirror_status(IDLE)
        try:
            self.client.register_agent(self.name, self._rpc.endpoint)
        except Exception as exc:
            self.close()
            raise RegistrationFailure(f"registration failed: {exc}") from exc
        return self

    @property
    def endpoint(self) -> str:
        return self._rpc.endpoint if self._rpc else ""

    def close(self) -> None:
        with self._lock:
            self._closing = True
            self._pending = None
            if self._cancel is not None:
                self._cancel.set()
            self._job_ready.notify_all()
        if self._rpc is not None:
            self._rpc.close()
        if self._runner.is_alive():
            self._runner.join(timeout=5.0)
        try:
            self.client.unregister_agent(self.name)
        except Exception:
            pass

    # -- message protocol -----------------------------------------------------------

    def handle_message(self, doc: dict) -> dict:
        mid = doc.get("id")
        verb = doc.get("verb")
        if verb in ("play", "debug"):
            mode = MODE_DEBUG if verb == "debug" else MODE_NORMAL
            detail = self._schedule(mode, doc.get("chain"))
            return {"id": mid, "status": "ok", "detail": detail}
        if verb == "stop":
            detail = self._request_stop()
            return {"id": mid, "status": "ok", "detail": detail}
        return {"id": mid, "status": "error", "detail": f"unknown verb {verb!r}"}

    def _schedule(self, mode: str, chain: dict | None) -> str:
        with self._lock:
            if self._closing:
                return "shutting down"
            busy = self._state in (RUNNING, STOPPING)
            self._pending = (mode, chain)     # newest wins
            self._job_ready.notify_all()
            return "queued" if busy else "started"

    def _request_stop(self) -> str:
        with self._lock:
            self._pending = None
            if self._state == RUNNING and self._cancel is not None:
                self._state = STOPPING
                self._cancel.set()
                mirror = True
            else:
                mirror = False
        if mirror:
            self._mirror_status(STOPPING)
            return "stopping"
        return "idle"

    # -- execution ---------------------------------------------------------------------

    def _run_loop(self) -> None:
        while True:
            with self._lock:
                while self._pending is None and not self._closing:
                    self._job_ready.wait()
                if self._closing:
                    return
                mode, chain = self._pending
                self._pending = None
                self._state = RUNNING
                self._cancel = threading.Event()
                cancel = self._cancel
            self._mirror_status(RUNNING)
            self.runs_started += 1
            final = self._execute(mode, chain, cancel)
            with self._lock:
                self._cancel = None
                if self._pending is not None and not self._closing:
                    # keep state; next loop iteration picks the pending job
                    continue_next = True
                else:
                    self._state = final
                    continue_next = False
            if not continue_next:
                self._mirror_status(final if final != ERROR else self._error_status)

    _error_status = ERROR

    def _execute(self, mode: str, chain: dict | None, cancel: threading.Event) -> str:
        try:
            code = self.client.get_value(self.name, "source code")
        except Exception as exc:
            self._error_status = f"error: {exc}"
            return ERROR
        if code.is_null or code.tag is not ValueType.CODE:
            self._error_status = "error: missing source code"
            return ERROR
        try:
            input_value = self.client.get_value(self.name, "input")
        except Exception as exc:
            self._error_status = f"error: {exc}"
            return ERROR

        result = self._router.run(code, input_value, mode, cancel)
        self.last_result = result
        if result.cancelled:
            return IDLE
        self._mirror_log(result.log_lines)
        if not result.ok:
            self._error_status = f"error: {result.failure}"
            return ERROR
        try:
            self.client.apply_output(self.name, result.value, chain)
            self.outputs_written += 1
        except Exception as exc:
            if _is_chain_depth_rejection(exc):
                logger.info("agent %s output suppressed: %s", self.name, exc)
                return IDLE
            self._error_status = f"error: output rejected: {exc}"
            return ERROR
        return IDLE

    def _mirror_status(self, status: str) -> None:
        try:
            self.client.set_property(self.name, "status", Value.string(status),
                                     CAUSE_AGENT_STATUS)
        except Exception as exc:
            logger.warning("status mirror for %s failed: %s", self.name, exc)

    def _mirror_log(self, lines: list[str]) -> None:
        """Append run output to any LogEntity watching this agent."""
        if not lines:
            return
        try:
            for log_name in self.client.log_watchers(self.name):
                current = self.client.get_value(log_name, "lines")
                existing = list(current.payload) if current.tag is ValueType.ARRAY else []
                existing.extend(Value.string(line) for line in lines)
                self.client.set_property(log_name, "lines", Value.array(existing),
                                         CAUSE_AGENT_LOG)
        except Exception as exc:
            logger.warning("log mirror for %s failed: %s", self.name, exc)

    # -- test support ---------------------------------------------------------------

    def state(self) -> str:
        with self._lock:
            return self._state

    def wait_idle(self, timeout: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                if self._state in (IDLE, ERROR) and self._pending is None:
                    return True
            time.sleep(0.005)
        return False


def agent_main(server: str, name: str) -> int:
    """Process entry point: serve one agent until stopped or disconnected."""
    from .client import HttpGraphClient

    logging.basicConfig(level=os.environ.get("BEESTAR_LOG", "WARNING"))
    client = HttpGraphClient(server)

    # Handlers go in before registration: the supervisor may stop us the
    # moment it sees the endpoint appear.
    stop = threading.Event()

    def _terminate(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, _terminate)
    signal.signal(signal.SIGINT, _terminate)

    worker = None
    last_error: Exception | None = None
    for attempt in range(5):
        candidate = AgentWorker(name, client)
        try:
            worker = candidate.start()
            break
        except RegistrationFailure as exc:
            last_error = exc
            message = str(exc)
            if "is not an AgentEntity" in message or "no entity named" in message:
                break            # no point retrying a missing agent
            if stop.wait(0.2 * (attempt + 1)):
                return 0
    if worker is None:
        print(f"beestar-agent: {last_error}", file=sys.stderr)
        return 2

    # Liveness: if the server goes away for good, exit rather than linger.
    failures = 0
    while not stop.is_set():
        stop.wait(1.0)
        if stop.is_set():
            break
        try:
            client.get_entity(name)
            failures = 0
        except Exception:
            failures += 1
            if failures >= 5:
                print("beestar-agent: lost server connection", file=sys.stderr)
                worker.close()
                return 3
    worker.close()
    return 0


def main() -> None:  # pragma: no cover - exercised via subprocess in tests
    server = os.environ.get("BEESTAR_SERVER", "")
    name = os.environ.get("BEESTAR_AGENT", "")
    if len(sys.argv) >= 3:
        server, name = sys.argv[1], sys.argv[2]
    if not server or not name:
        print("usage: python -m beestar.agent <server-url> <agent-name> "
              "(or env BEESTAR_SERVER/BEESTAR_AGENT)", file=sys.stderr)
        sys.exit(2)
    sys.exit(agent_main(server, name))


if __name__ == "__main__":  # pragma: no cover
    main()
