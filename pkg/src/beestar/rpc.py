"""Agent message transport: length-prefixed JSON frames over TCP.

Frame layout: 4-byte big-endian length, then a UTF-8 JSON body. Requests
look like {"id": n, "verb": "play|stop|debug"} (play may carry a "chain"
object so trigger depth survives process hops); replies echo the id with
{"id": n, "status": "ok|error", "detail": s}. One request per connection.
"""

from __future__ import annotations

import json
import logging
import socket
import struct
import threading

logger = logging.getLogger(__name__)

MAX_FRAME = 64 * 1024 * 1024


def send_frame(sock: socket.socket, doc: dict) -> None:
    body = json.dumps(doc, separators=(",", ":")).encode("utf-8")
    sock.sendall(struct.pack(">I", len(body)) + body)


def recv_frame(sock: socket.socket) -> dict | None:
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise ValueError(f"frame of {length} bytes exceeds limit")
    body = _recv_exact(sock, length)
    if body is None:
        return None
    return json.loads(body.decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def request(endpoint: str, doc: dict, timeout: float = 5.0) -> dict:
    """Send one frame to ``host:port`` and wait for the reply."""
    host, _, port = endpoint.rpartition(":")
    with socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout) as sock:
        send_frame(sock, doc)
        reply = recv_frame(sock)
    if reply is None:
        raise ConnectionError(f"no reply from {endpoint}")
    return reply


class RpcServer:
    """One handler, one short-lived thread per connection."""

    def __init__(self, handler, host: str = "127.0.0.1", port: int = 0):
        self._handler = handler
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(16)
        self.host, self.port = self._sock.getsockname()[:2]
        self._closing = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop,
                                        name=f"rpc-{self.port}", daemon=True)

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "RpcServer":
        self._thread.start()
        return self

    def _accept_loop(self) -> None:
        while not self._closing.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn: socket.socket) -> None:
        with conn:
            try:
                doc = recv_frame(conn)
                if doc is None:
                    return
                try:
                    reply = self._handler(doc)
                except Exception as exc:
                    logger.exception("rpc handler failed")
                    reply = {"id": doc.get("id"), "status": "error", "detail": str(exc)}
                send_frame(conn, reply)
            except (OSError, ValueError) as exc:
                logger.debug("rpc connection dropped: %s", exc)

    def close(self) -> None:
        self._closing.set()
        try:  # wake the blocked accept()
            socket.create_connection((self.host, self.port), timeout=0.2).close()
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
        if self._thread.is_alive():
            self._thread.join(timeout=1.0)
