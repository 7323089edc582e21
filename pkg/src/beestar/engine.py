"""The single enforcement point for property updates.

Every assignment runs as a *wave*: the new value is staged on the target
property, then the update rules cascade depth-first —

  1. if the property is the entity's emission property (agent ``output``,
     input widget ``value``), each outgoing ``sets`` edge stages the same
     value on its target, in edge-ordinal order;
  2. each watcher of a staged property is visited in ordinal order:
     display-kind watchers queue a notification, agent-kind watchers get
     their ``input`` staged and a play trigger queued.

A wave that stages the same (entity, property) twice is a cycle and is
discarded whole; so is a wave whose value fails the target's declared
type. Commits are atomic: versions bump, events get global sequence
numbers and land in the durable log, and only then are notifications and
triggers handed to the dispatcher thread, so sinks never see an
uncommitted change and the engine never blocks on them.

Agent-to-agent chains are bounded: triggers emitted by a wave at hop h
carry h+1, and an output wave past ``max_chain_depth`` is rejected.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field

from .errors import (
    ChainDepthExceeded,
    CycleError,
    PropertyTypeError,
    UnknownAgent,
    UnknownScope,
)
from .graph import Graph
from .program import load_program
from .values import Value, canonical_dumps

logger = logging.getLogger(__name__)

CAUSE_EXTERNAL = "external-set"
CAUSE_AGENT_RUN = "agent-run"
CAUSE_AGENT_STATUS = "agent-status"
CAUSE_AGENT_LOG = "agent-log"
CAUSE_WATCH_FILL = "watch-trigger input fill"


def cause_sets_edge(source: str) -> str:
    return f"sets-edge from {source}"


# Kind -> property whose change fires outgoing sets edges.
EMISSION_RULES: dict[str, str] = {
    "AgentEntity": "output",
    "InputEntity": "value",
}

STATUS_COMMITTED = "committed"
STATUS_TYPE_ERROR = "type_error"
STATUS_CYCLE_ERROR = "cycle_error"
STATUS_CHAIN_DEPTH = "chain_depth_exceeded"


@dataclass(frozen=True)
class ChangeEvent:
    """One committed property assignment."""

    seq: int
    wave: int
    entity: str
    prop: str
    old: Value
    new: Value
    version: int
    cause: str

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "wave": self.wave,
            "entity": self.entity,
            "prop": self.prop,
            "old": self.old.to_json(),
            "new": self.new.to_json(),
            "version": self.version,
            "cause": self.cause,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ChangeEvent":
        return cls(
            seq=doc["seq"],
            wave=doc["wave"],
            entity=doc["entity"],
            prop=doc["prop"],
            old=Value.from_json(doc["old"]),
            new=Value.from_json(doc["new"]),
            version=doc["version"],
            cause=doc["cause"],
        )

    def canonical_line(self) -> str:
        return canonical_dumps(self.to_doc())


@dataclass(frozen=True)
class PlayTrigger:
    """A post-commit request for an agent to run, with chain bookkeeping."""

    agent: str
    value: Value
    chain_id: int
    hop: int
    wave: int


@dataclass(frozen=True)
class Notification:
    """A post-commit update notice for a display-kind watcher."""

    display: str
    entity: str
    prop: str
    value: Value
    version: int
    wave: int


@dataclass(frozen=True)
class WaveReport:
    wave: int
    status: str
    events: tuple[ChangeEvent, ...] = ()
    triggers: tuple[PlayTrigger, ...] = ()
    notifications: tuple[Notification, ...] = ()
    detail: str = ""

    def summary_doc(self) -> dict:
        return {
            "wave": self.wave,
            "status": self.status,
            "events": len(self.events),
            "triggers": [t.agent for t in self.triggers],
            "detail": self.detail,
        }


@dataclass
class Subscription:
    id: int
    scope: object            # "all" | entity name | (entity, prop)
    sink: object             # callable(ChangeEvent)
    kind: str = "event-stream"


@dataclass
class _WaveState:
    visited: set = field(default_factory=set)
    changes: list = field(default_factory=list)       # (entity, prop, old, new, version, cause)
    triggers: list = field(default_factory=list)
    notifications: list = field(default_factory=list)


class Interface:
    """Wave executor, subscription hub and event log over one Graph.

    Waves are serialized behind one writer lock. Structural operations
    (entity/edge create and delete) go through the same lock so the
    journal order downstream is total.
    """

    def __init__(self, graph: Graph | None = None, *, max_chain_depth: int = 64,
                 log_path: str | None = None, strict: bool = True):
        self.graph = graph if graph is not None else Graph(strict=strict)
        self.max_chain_depth = max_chain_depth
        self._lock = threading.RLock()
        self._wave_seq = 0
        self._event_seq = 0
        self._chain_seq = 0
        self._events: list[ChangeEvent] = []
        self._subs: dict[int, Subscription] = {}
        self._sub_seq = 0
        self._notification_sinks: list = []
        self._structural_sinks: list = []
        self._trigger_sink = None
        self._log_file = open(log_path, "a", encoding="utf-8") if log_path else None
        self._dispatch_q: queue.Queue = queue.Queue()
        self._dispatcher = threading.Thread(
            target=self._dispatch_loop, name="beestar-dispatch", daemon=True
        )
        self._dispatcher.start()

    # -- wiring ---------------------------------------------------------------

    def set_trigger_sink(self, sink) -> None:
        self._trigger_sink = sink

    def add_notification_sink(self, sink) -> None:
        self._notification_sinks.append(sink)

    def add_structural_sink(self, sink) -> None:
        self._structural_sinks.append(sink)

    # -- properties -------------------------------------------------------------

    def set_property(self, entity: str, prop: str, value: Value,
                     cause: str = CAUSE_EXTERNAL,
                     chain: tuple[int, int] | None = None) -> WaveReport:
        """Run one wave assigning ``value`` to ``entity.prop``.

        Returns the committed report; raises PropertyTypeError, CycleError
        or ChainDepthExceeded (wave discarded, graph untouched), or
        UnknownEntity/UnknownProperty when the target does not resolve.
        """
        if not isinstance(value, Value):
            value = Value.from_json(value)
        return self._run_wave(entity, prop, value, cause, chain)

    def apply_agent_output(self, agent: str, value: Value,
                           chain: tuple[int, int] | None = None) -> WaveReport:
        """Map an agent run's return value onto its ``output`` property."""
        if not isinstance(value, Value):
            value = Value.from_json(value)
        if not self.graph.has_entity(agent):
            raise UnknownAgent(f"no entity named {agent!r}")
        if "AgentEntity" not in self.graph.kind_chain(agent):
            raise UnknownAgent(f"{agent!r} is not an AgentEntity")
        return self._run_wave(agent, "output", value, CAUSE_AGENT_RUN, chain)

    def _run_wave(self, entity: str, prop: str, value: Value, cause: str,
                  chain: tuple[int, int] | None) -> WaveReport:
        with self._lock:
            wave_id = self._wave_seq
            self._wave_seq += 1
            if chain is None:
                chain_id, hop = self._chain_seq, 0
                self._chain_seq += 1
            else:
                chain_id, hop = int(chain[0]), int(chain[1])
            if hop > self.max_chain_depth:
                report = WaveReport(
                    wave_id, STATUS_CHAIN_DEPTH,
                    detail=f"chain {chain_id} hop {hop} exceeds max_chain_depth "
                           f"{self.max_chain_depth}",
                )
                raise ChainDepthExceeded(report.detail, report=report)

            state = _WaveState()
            try:
                self._stage(state, entity, prop, value, cause, wave_id, chain_id, hop)
            except PropertyTypeError as exc:
                exc.report = WaveReport(wave_id, STATUS_TYPE_ERROR, detail=str(exc))
                raise
            except CycleError as exc:
                exc.report = WaveReport(wave_id, STATUS_CYCLE_ERROR, detail=str(exc))
                raise

            events = []
            for ename, pname, old, new, version, ecause in state.changes:
                applied_old, applied_version = self.graph.apply_assignment(ename, pname, new)
                assert applied_old == old and applied_version == version
                ev = ChangeEvent(self._event_seq, wave_id, ename, pname, old, new,
                                 version, ecause)
                self._event_seq += 1
                self._events.append(ev)
                if self._log_file is not None:
                    self._log_file.write(ev.canonical_line() + "\n")
                events.append(ev)
            if self._log_file is not None:
                self._log_file.flush()

            report = WaveReport(
                wave_id, STATUS_COMMITTED,
                events=tuple(events),
                triggers=tuple(state.triggers),
                notifications=tuple(state.notifications),
            )
            self._dispatch_q.put(("wave", report))
            return report

    def _stage(self, state: _WaveState, entity: str, prop: str, value: Value,
               cause: str, wave_id: int, chain_id: int, hop: int) -> None:
        graph = self.graph
        ent = graph.entity(entity)
        key = (ent.name, prop)
        if key in state.visited:
            raise CycleError(f"({ent.name}, {prop}) staged twice in wave {wave_id}")
        state.visited.add(key)
        current = graph.check_assignable(ent.name, prop, value)
        state.changes.append(
            (ent.name, prop, current.value, value, current.version + 1, cause)
        )

        chain = graph.kind_chain(ent.name)
        emission = next((p for k, p in EMISSION_RULES.items() if k in chain), None)
        if prop == emission:
            for target, tprop in graph.set_targets_of(ent.name):
                self._stage(state, target.name, tprop, value,
                            cause_sets_edge(ent.name), wave_id, chain_id, hop)

        for watcher in graph.watchers_of(ent.name, prop):
            wchain = graph.kind_chain(watcher.name)
            if "DisplayEntity" in wchain:
                state.notifications.append(
                    Notification(watcher.name, ent.name, prop, value,
                                 current.version + 1, wave_id)
                )
            elif "AgentEntity" in wchain:
                self._stage(state, watcher.name, "input", value,
                            CAUSE_WATCH_FILL, wave_id, chain_id, hop)
                state.triggers.append(
                    PlayTrigger(watcher.name, value, chain_id, hop + 1, wave_id)
                )
            # other kinds are inert watchers

    # -- subscriptions ------------------------------------------------------------

    def subscribe(self, scope="all", sink=None, kind: str = "event-stream") -> Subscription:
        """Deliver every committed event in ``scope`` to ``sink``, in order."""
        if sink is None:
            raise ValueError("subscribe needs a sink callable")
        with self._lock:
            if scope != "all":
                if isinstance(scope, str):
                    if not self.graph.has_entity(scope):
                        raise UnknownScope(f"no entity named {scope!r}")
                elif isinstance(scope, tuple) and len(scope) == 2:
                    self.graph.property_of(scope[0], scope[1])
                else:
                    raise UnknownScope(f"unintelligible scope {scope!r}")
            sub = Subscription(self._sub_seq, scope, sink, kind)
            self._sub_seq += 1
            self._subs[sub.id] = sub
            return sub

    def unsubscribe(self, sub_id: int) -> None:
        with self._lock:
            self._subs.pop(sub_id, None)

    @staticmethod
    def _in_scope(sub: Subscription, ev: ChangeEvent) -> bool:
        if sub.scope == "all":
            return True
        if isinstance(sub.scope, str):
            return ev.entity == sub.scope
        return (ev.entity, ev.prop) == tuple(sub.scope)

    # -- event log -------------------------------------------------------------------

    def event_log(self, since: int = -1) -> list[ChangeEvent]:
        """Committed events with global sequence > ``since``, commit order."""
        with self._lock:
            return [ev for ev in self._events if ev.seq > since]

    def canonical_log(self, since: int = -1) -> str:
        return "\n".join(ev.canonical_line() for ev in self.event_log(since))

    # -- dispatch ------------------------------------------------------------------

    def _dispatch_loop(self) -> None:
        while True:
            item = self._dispatch_q.get()
            try:
                if item is None:
                    return
                kind, payload = item
                if kind == "wave":
                    self._dispatch_wave(payload)
                elif kind == "structural":
                    for sink in list(self._structural_sinks):
                        self._call_sink(sink, payload)
            finally:
                self._dispatch_q.task_done()

    def _dispatch_wave(self, report: WaveReport) -> None:
        # Notifications first, then triggers, per the wave contract.
        for ev in report.events:
            with self._lock:
                subs = sorted(self._subs.values(), key=lambda s: s.id)
            for sub in subs:
                if self._in_scope(sub, ev):
                    self._call_sink(sub.sink, ev)
        for note in report.notifications:
            for sink in list(self._notification_sinks):
                self._call_sink(sink, note)
        for trigger in report.triggers:
            if self._trigger_sink is not None:
                self._call_sink(self._trigger_sink, trigger)
            else:
                logger.debug("no trigger sink; dropping play trigger for %s", trigger.agent)

    @staticmethod
    def _call_sink(sink, payload) -> None:
        try:
            sink(payload)
        except Exception:
            logger.exception("sink %r failed", sink)

    def drain(self, timeout: float = 10.0) -> None:
        """Block until every queued dispatch has been delivered."""
        deadline = time.monotonic() + timeout
        while self._dispatch_q.unfinished_tasks and time.monotonic() < deadline:
            time.sleep(0.002)

    def close(self) -> None:
        self._dispatch_q.put(None)
        self._dispatcher.join(timeout=2.0)
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    # -- structural operations ---------------------------------------------------------

    def create_entity(self, name: str, kind: str, props=()):
        with self._lock:
            ent = self.graph.create_entity(name, kind, props)
            self._emit_structural({"op": "entity_created",
                                   "entity": self.graph.entity_dump(name)})
            return ent

    def add_edge(self, from_name: str, to_name: str, label):
        with self._lock:
            edge = self.graph.add_edge(from_name, to_name, label)
            self._emit_structural({
                "op": "edge_added", "id": edge.id,
                "from": from_name, "to": to_name, "label": edge.label.text(),
            })
            return edge

    def remove_entity(self, name: str) -> None:
        with self._lock:
            self.graph.remove_entity(name)
            self._emit_structural({"op": "entity_removed", "name": name})

    def remove_edge(self, edge_id: str) -> None:
        with self._lock:
            edge = self.graph.edge(edge_id)
            src, dst = self.graph.edge_endpoints(edge)
            self.graph.remove_edge(edge_id)
            self._emit_structural({
                "op": "edge_removed", "id": edge_id,
                "from": src, "to": dst, "label": edge.label.text(),
            })

    def load_document(self, doc: dict) -> None:
        """Apply a program document onto the live graph, all or nothing."""
        with self._lock:
            before_entities = {e.name for e in self.graph.entities()}
            before_edges = {e.id for e in self.graph.edges()}
            try:
                load_program(doc, graph=self.graph)
            except Exception:
                added_edges = [e for e in self.graph.edges() if e.id not in before_edges]
                for edge in reversed(added_edges):
                    self.graph.remove_edge(edge.id)
                added = [e for e in self.graph.entities() if e.name not in before_entities]
                for ent in reversed(added):   # instances before the kinds they chain to
                    self.graph.remove_entity(ent.name)
                raise
            for ent in self.graph.entities():
                if ent.name not in before_entities:
                    self._emit_structural({"op": "entity_created",
                                           "entity": self.graph.entity_dump(ent.name)})
            for edge in self.graph.edges():
                if edge.id not in before_edges:
                    src, dst = self.graph.edge_endpoints(edge)
                    self._emit_structural({
                        "op": "edge_added", "id": edge.id,
                        "from": src, "to": dst, "label": edge.label.text(),
                    })

    def _emit_structural(self, delta: dict) -> None:
        self._dispatch_q.put(("structural", delta))


def replay_onto(graph: Graph, events) -> Graph:
    """Apply a committed event sequence to a freshly loaded graph."""
    for ev in events:
        graph.force_assignment(ev.entity, ev.prop, ev.new, ev.version)
    return graph


def read_log_file(path: str) -> list[ChangeEvent]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ChangeEvent.from_doc(json.loads(line)))
    return out
