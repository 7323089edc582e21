"""The network face of the graph: HTTP routes plus a push event stream.

Every mutating route funnels into the propagation engine's writer; the
journal is the server-side total order of property_changed,
graph_changed and agent_status entries, each as one ndjson line
``{"seq": n, "kind": s, "payload": {...}}``. Stream clients replay from
their cursor and then follow live, with heartbeat lines (no seq) keeping
idle connections warm. Slow clients are disconnected rather than ever
blocking a commit.

Binds to loopback by default; there is no authentication.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

from .engine import CAUSE_AGENT_RUN, CAUSE_EXTERNAL, Interface
from .errors import (
    AgentUnreachable,
    BadLabelGrammar,
    BeestarError,
    ChainDepthExceeded,
    CycleError,
    DanglingProperty,
    DuplicateEdge,
    DuplicateName,
    PropertyTypeError,
    SchemaViolation,
    UnknownAgent,
    UnknownEdge,
    UnknownEntity,
    UnknownKind,
    UnknownProperty,
    UnknownScope,
    ValidationError,
)
from .program import export_program
from .registry import AgentRegistry, wire_triggers
from .values import Value, ValueType, canonical_dumps

logger = logging.getLogger(__name__)

DEFAULT_PORT = 7311

_ERROR_MAP = [
    ((UnknownEntity, UnknownProperty, UnknownEdge, UnknownAgent, UnknownKind,
      UnknownScope), 404),
    ((CycleError, ChainDepthExceeded), 409),
    ((PropertyTypeError, SchemaViolation, ValidationError, BadLabelGrammar,
      DuplicateEdge, DuplicateName, DanglingProperty), 422),
    ((AgentUnreachable,), 502),
]

_ERROR_CODES = {
    PropertyTypeError: "type_error",
    CycleError: "cycle_error",
    ChainDepthExceeded: "chain_depth_exceeded",
    AgentUnreachable: "agent_unreachable",
}


def _status_for(exc: Exception) -> int:
    for classes, status in _ERROR_MAP:
        if isinstance(exc, classes):
            return status
    return 500


def _code_for(exc: Exception) -> str:
    for cls, code in _ERROR_CODES.items():
        if isinstance(exc, cls):
            return code
    return type(exc).__name__


class _Journal:
    """Append-only, fan-out to per-client queues under one lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: list[dict] = []
        self._seq = 0
        self._queues: list[queue.Queue] = []

    def append(self, kind: str, payload: dict) -> dict:
        with self._lock:
            entry = {"seq": self._seq, "kind": kind, "payload": payload}
            self._seq += 1
            self._entries.append(entry)
            dead = []
            for q in self._queues:
                try:
                    q.put_nowait(entry)
                except queue.Full:
                    dead.append(q)
            for q in dead:
                self._queues.remove(q)
                try:
                    q.put_nowait(None)          # poison: stream disconnects
                except queue.Full:
                    pass
        return entry

    def attach(self, q: queue.Queue, since: int) -> list[dict]:
        """Atomically snapshot the replay and start live delivery."""
        with self._lock:
            self._queues.append(q)
            return [e for e in self._entries if e["seq"] > since]

    def detach(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._queues:
                self._queues.remove(q)


class BeestarServer:
    def __init__(self, interface: Interface, *, host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT, ui_dir: str | None = None,
                 heartbeat_interval: float = 15.0):
        self.interface = interface
        self.registry = AgentRegistry()
        self.journal = _Journal()
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self.heartbeat_interval = heartbeat_interval
        self._stopping = threading.Event()

        interface.subscribe("all", self._on_event)
        interface.add_structural_sink(self._on_structural)
        wire_triggers(interface, self.registry)
        self.registry.on_change = self._on_registration

        app = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                logger.debug("%s - %s", self.address_string(), fmt % args)

            def do_GET(self):
                app.route(self, "GET")

            def do_POST(self):
                app.route(self, "POST")

            def do_PUT(self):
                app.route(self, "PUT")

            def do_DELETE(self):
                app.route(self, "DELETE")

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self.host, self.port = self._httpd.server_address[:2]
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        name="beestar-http", daemon=True)

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "BeestarServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        self._httpd.shutdown()
        self._httpd.server_close()

    # -- engine -> journal -------------------------------------------------------

    def _on_event(self, ev) -> None:
        self.journal.append("property_changed", ev.to_doc())

    def _on_structural(self, delta: dict) -> None:
        self.journal.append("graph_changed", delta)

    def _on_registration(self, name: str, endpoint: str | None) -> None:
        self.journal.append("agent_status",
                            {"agent": name, "endpoint": endpoint,
                             "registered": endpoint is not None})

    # -- routing --------------------------------------------------------------------

    def route(self, handler: BaseHTTPRequestHandler, method: str) -> None:
        parsed = urlparse(handler.path)
        segments = [unquote(s) for s in parsed.path.split("/") if s]
        try:
            # consume the body up front: replying with an unread body would
            # desync the keep-alive connection
            handler._beestar_body = self._read_body(handler)
            self._dispatch(handler, method, segments, parse_qs(parsed.query))
        except BeestarError as exc:
            self._send_json(handler, _status_for(exc),
                            {"error": _code_for(exc), "detail": str(exc)})
        except (ValueError, json.JSONDecodeError) as exc:
            self._send_json(handler, 400, {"error": "bad_request", "detail": str(exc)})
        except BrokenPipeError:
            pass
        except Exception as exc:
            logger.exception("unhandled error on %s %s", method, handler.path)
            self._send_json(handler, 500, {"error": "internal", "detail": str(exc)})

    def _dispatch(self, handler, method: str, seg: list[str], query: dict) -> None:
        iface = self.interface
        if seg == ["graph"]:
            if method == "GET":
                return self._send_json(handler, 200, export_program(iface.graph))
            if method == "POST":
                doc = self._body(handler)
                iface.load_document(doc)
                return self._send_json(handler, 200, {
                    "entities": len(iface.graph.entities()),
                    "edges": len(iface.graph.edges()),
                })
        if seg == ["entities"]:
            if method == "GET":
                dumps = [iface.graph.entity_dump(e.name) for e in iface.graph.entities()]
                return self._send_json(handler, 200, {"entities": dumps})
            if method == "POST":
                doc = self._body(handler)
                props = [
                    (p, ValueType.parse(spec["type"]), Value.from_json(spec.get("value")))
                    for p, spec in doc.get("properties", {}).items()
                ]
                ent = iface.create_entity(doc["name"], doc.get("kind", "Entity"), props)
                return self._send_json(handler, 200, iface.graph.entity_dump(ent.name))
        if len(seg) == 2 and seg[0] == "entities":
            name = seg[1]
            if method == "GET":
                return self._send_json(handler, 200, iface.graph.entity_dump(name))
            if method == "DELETE":
                iface.remove_entity(name)
                self.registry.unregister(name)
                return self._send_json(handler, 200, {"removed": name})
        if len(seg) == 4 and seg[0] == "entities" and seg[2] == "properties":
            name, prop = seg[1], seg[3]
            if method == "GET":
                p = iface.graph.property_of(name, prop)
                return self._send_json(handler, 200, {
                    "type": p.declared_type.value, "value": p.value.to_json(),
                    "version": p.version,
                })
            if method == "PUT":
                doc = self._body(handler)
                value = Value.from_json(doc.get("value"))
                cause = doc.get("cause", CAUSE_EXTERNAL)
                chain_doc = doc.get("chain")
                chain = (chain_doc["id"], chain_doc["hop"]) if chain_doc else None
                if cause == CAUSE_AGENT_RUN:
                    if prop != "output":
                        raise ValidationError("cause agent-run applies to 'output' only")
                    report = iface.apply_agent_output(name, value, chain)
                else:
                    report = iface.set_property(name, prop, value, cause, chain)
                return self._send_json(handler, 200, report.summary_doc())
        if seg == ["edges"] and method == "POST":
            doc = self._body(handler)
            edge = iface.add_edge(doc["from"], doc["to"], doc["label"])
            return self._send_json(handler, 200,
                                   {"id": edge.id, "ordinal": edge.ordinal})
        if len(seg) == 2 and seg[0] == "edges" and method == "DELETE":
            iface.remove_edge(seg[1])
            return self._send_json(handler, 200, {"removed": seg[1]})
        if seg == ["agents"] and method == "GET":
            return self._send_json(handler, 200, {"agents": self.registry.snapshot()})
        if len(seg) == 2 and seg[0] == "agents" and method == "GET":
            info = self.registry.snapshot().get(seg[1])
            if info is None:
                raise UnknownAgent(f"agent {seg[1]!r} is not registered")
            return self._send_json(handler, 200, info)
        if len(seg) == 3 and seg[0] == "agents" and seg[2] == "message" and method == "POST":
            name = seg[1]
            if not iface.graph.has_entity(name):
                raise UnknownEntity(f"no entity named {name!r}")
            doc = self._body(handler)
            verb = doc.get("verb")
            if verb not in ("play", "stop", "debug"):
                raise ValidationError(f"verb must be play|stop|debug, got {verb!r}")
            reply = self.registry.forward(name, verb, chain=doc.get("chain"),
                                          sender="server")
            return self._send_json(handler, 200, reply)
        if len(seg) == 3 and seg[0] == "agents" and seg[2] == "register":
            name = seg[1]
            if method == "POST":
                if not iface.graph.has_entity(name):
                    raise UnknownEntity(f"no entity named {name!r}")
                doc = self._body(handler)
                endpoint = doc.get("endpoint")
                if not isinstance(endpoint, str) or ":" not in endpoint:
                    raise ValidationError(f"endpoint must be host:port, got {endpoint!r}")
                self.registry.register(name, endpoint)
                return self._send_json(handler, 200, {"registered": name})
            if method == "DELETE":
                self.registry.unregister(name)
                return self._send_json(handler, 200, {"unregistered": name})
        if seg == ["events"] and method == "GET":
            since = int(query.get("since", ["-1"])[0])
            return self._stream_events(handler, since)
        if self.ui_dir is not None and method == "GET" and (not seg or seg[0] == "ui"):
            return self._serve_static(handler, seg[1:] if seg else [])
        self._send_json(handler, 404, {"error": "no_route",
                                       "detail": f"{method} /{'/'.join(seg)}"})

    # -- helpers ----------------------------------------------------------------------

    @staticmethod
    def _read_body(handler) -> bytes:
        length = int(handler.headers.get("Content-Length", 0))
        return handler.rfile.read(length) if length else b""

    @staticmethod
    def _body(handler) -> dict:
        raw = handler._beestar_body
        if not raw:
            return {}
        doc = json.loads(raw.decode("utf-8"))
        if not isinstance(doc, dict):
            raise ValidationError("request body must be a JSON object")
        return doc

    @staticmethod
    def _send_json(handler, status: int, doc: dict) -> None:
        body = canonical_dumps(doc).encode("utf-8")
        handler.send_response(status)
        handler.send_header("Content-Type", "application/json; charset=utf-8")
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        handler.wfile.write(body)

    def _stream_events(self, handler, since: int) -> None:
        # chunked transfer, one line per chunk: clients see each event the
        # moment it is flushed instead of waiting for a read buffer to fill
        handler.send_response(200)
        handler.send_header("Content-Type", "application/x-ndjson; charset=utf-8")
        handler.send_header("Cache-Control", "no-cache")
        handler.send_header("Transfer-Encoding", "chunked")
        handler.end_headers()

        q: queue.Queue = queue.Queue(maxsize=1024)
        replay = self.journal.attach(q, since)
        try:
            for entry in replay:
                self._write_line(handler, entry)
            while not self._stopping.is_set():
                try:
                    entry = q.get(timeout=self.heartbeat_interval)
                except queue.Empty:
                    self._write_line(handler, {"kind": "heartbeat"})
                    continue
                if entry is None:            # poisoned: we were too slow
                    return
                self._write_line(handler, entry)
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.journal.detach(q)
            try:
                handler.wfile.write(b"0\r\n\r\n")
                handler.wfile.flush()
            except OSError:
                pass

    @staticmethod
    def _write_line(handler, doc: dict) -> None:
        data = canonical_dumps(doc).encode("utf-8") + b"\n"
        handler.wfile.write(f"{len(data):x}\r\n".encode("ascii") + data + b"\r\n")
        handler.wfile.flush()

    def _serve_static(self, handler, parts: list[str]) -> None:
        assert self.ui_dir is not None
        rel = "/".join(parts) or "index.html"
        path = (self.ui_dir / rel).resolve()
        if not str(path).startswith(str(self.ui_dir)) or not path.is_file():
            return self._send_json(handler, 404, {"error": "no_file", "detail": rel})
        body = path.read_bytes()
        ctype = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        handler.send_response(200)
        handler.send_header("Content-Type", ctype)
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        handler.wfile.write(body)
