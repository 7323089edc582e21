"""Where agents announce their message endpoints.

The registry maps agent names to ``host:port`` RPC endpoints and forwards
message frames to them. Forwarding fails fast when no endpoint is
registered. ``wire_triggers`` connects a propagation Interface's play
triggers to the registry so committed waves reach running agents.
"""

from __future__ import annotations

import logging
import threading
import time

from . import rpc
from .errors import AgentUnreachable

logger = logging.getLogger(__name__)


class AgentRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._endpoints: dict[str, dict] = {}
        self._message_seq = 0
        self.on_change = None       # callable(name, endpoint|None), set by the server

    def register(self, name: str, endpoint: str) -> None:
        with self._lock:
            self._endpoints[name] = {"endpoint": endpoint, "ts": time.time()}
        if self.on_change is not None:
            self.on_change(name, endpoint)

    def unregister(self, name: str) -> None:
        with self._lock:
            self._endpoints.pop(name, None)
        if self.on_change is not None:
            self.on_change(name, None)

    def endpoint_of(self, name: str) -> str | None:
        with self._lock:
            info = self._endpoints.get(name)
            return info["endpoint"] if info else None

    def snapshot(self) -> dict[str, dict]:
        with self._lock:
            return {name: dict(info) for name, info in self._endpoints.items()}

    def forward(self, name: str, verb: str, chain: dict | None = None,
                sender: str = "interface", timeout: float = 5.0) -> dict:
        """Send one message frame to the named agent and return the reply."""
        endpoint = self.endpoint_of(name)
        if endpoint is None:
            raise AgentUnreachable(f"agent {name!r} has no registered endpoint")
        with self._lock:
            mid = self._message_seq
            self._message_seq += 1
        frame = {"id": mid, "verb": verb, "sender": sender}
        if chain is not None:
            frame["chain"] = chain
        try:
            return rpc.request(endpoint, frame, timeout=timeout)
        except (OSError, ConnectionError, ValueError) as exc:
            raise AgentUnreachable(f"agent {name!r} at {endpoint}: {exc}") from exc


def wire_triggers(interface, registry: AgentRegistry) -> None:
    """Forward committed play triggers to registered agents, dropping
    (with a warning) any that have nowhere to go."""

    def _forward(trigger):
        try:
            registry.forward(
                trigger.agent,
                "play",
                chain={"id": trigger.chain_id, "hop": trigger.hop},
            )
        except AgentUnreachable as exc:
            logger.warning("dropping play trigger: %s", exc)

    interface.set_trigger_sink(_forward)
