"""Shared test rigs: engine stacks, scenario drivers, quiescence waits."""

from __future__ import annotations

import time

from beestar.agent import AgentWorker, DirectGraphClient
from beestar.engine import Interface
from beestar.errors import BeestarError, CycleError, PropertyTypeError
from beestar.graph import Builder, EdgeLabel, Graph
from beestar.registry import AgentRegistry, wire_triggers
from beestar.values import Value, ValueType

KIND_NAMES = {"plain": "Entity", "agent": "AgentEntity", "input": "InputEntity",
              "display": "StatusEntity"}


def build_scenario_graph(scenario: dict) -> Graph:
    graph = Graph()
    for ent in scenario["entities"]:
        props = [(p, ValueType.ANY, Value.from_json(v))
                 for p, v in ent.get("props", {}).items()]
        graph.create_entity(ent["name"], KIND_NAMES[ent["kind"]], props)
    for edge in scenario["edges"]:
        graph.add_edge(edge["from"], edge["to"],
                       EdgeLabel(edge["type"] if edge["type"] == "sets" else "watches",
                                 edge["prop"]))
    return graph


def drive_scenario(scenario: dict):
    """Run a scenario's external sets through the engine; mirror the
    oracle's result shape."""
    interface = Interface(build_scenario_graph(scenario))
    outcomes = []
    try:
        for ext in scenario["sets"]:
            try:
                report = interface.set_property(ext["entity"], ext["prop"],
                                                Value.from_json(ext["value"]))
                staged = sorted((ev.entity, ev.prop) for ev in report.events)
                outcomes.append((report.status, staged,
                                 [t.agent for t in report.triggers]))
            except CycleError:
                outcomes.append(("cycle_error", [], []))
            except PropertyTypeError:
                outcomes.append(("type_error", [], []))
        snapshot = {
            key: (value.to_json(), version)
            for key, (value, version) in interface.graph.snapshot_values().items()
        }
        return snapshot, outcomes
    finally:
        interface.close()


def listing_builder(func: str = "uppercase") -> Builder:
    """The canonical three-entity prompt/input/agent application."""
    b = Builder()
    prompt = b.entity("prompt")
    textbox = b.input("CLIPInputEntity")
    b.sets(textbox, "word", [prompt])
    agent = b.agent("CLIPAgent", func=func)
    b.watch(agent, "word", [prompt])
    return b


class LocalStack:
    """Interface + registry + in-process workers, no HTTP.

    Workers speak the real frame protocol over loopback TCP; only graph
    access is direct. ``set`` waits for quiescence by default so scripted
    interactions produce deterministic event logs.
    """

    def __init__(self, graph: Graph | None = None, *, max_chain_depth: int = 64):
        self.interface = Interface(graph if graph is not None else Graph(),
                                   max_chain_depth=max_chain_depth)
        self.graph = self.interface.graph
        self.registry = AgentRegistry()
        wire_triggers(self.interface, self.registry)
        self.notifications = []
        self.interface.add_notification_sink(self.notifications.append)
        self.workers: dict[str, AgentWorker] = {}

    def deploy(self, name: str) -> AgentWorker:
        client = DirectGraphClient(self.interface, self.registry)
        worker = AgentWorker(name, client).start()
        self.workers[name] = worker
        return worker

    def set(self, entity: str, prop: str, value, wait: bool = True):
        report = self.interface.set_property(
            entity, prop, value if isinstance(value, Value) else Value.from_json(value)
        )
        if wait:
            self.settle()
        return report

    def message(self, agent: str, verb: str, wait: bool = True) -> dict:
        reply = self.registry.forward(agent, verb)
        if wait:
            self.settle()
        return reply

    def quiescent(self) -> bool:
        if self.interface._dispatch_q.unfinished_tasks:
            return False
        for worker in self.workers.values():
            with worker._lock:
                if worker._state not in ("idle", "error") or worker._pending is not None:
                    return False
        return True

    def settle(self, timeout: float = 20.0) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.quiescent():
                time.sleep(0.03)           # let freshly dispatched triggers land
                if self.quiescent():
                    return
            time.sleep(0.005)
        raise TimeoutError("stack did not settle")

    def log_text(self) -> str:
        return self.interface.canonical_log()

    def close(self) -> None:
        for worker in self.workers.values():
            try:
                worker.close()
            except BeestarError:
                pass
        self.interface.close()
