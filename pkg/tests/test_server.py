import json
import threading
import time

import pytest
import requests

from beestar.client import ApiError, ServerClient
from beestar.engine import Interface
from beestar.graph import Graph
from beestar.program import export_program
from beestar.server import BeestarServer
from beestar.values import Value

from harness import listing_builder


@pytest.fixture
def served():
    interface = Interface(listing_builder().graph)
    server = BeestarServer(interface, port=0, heartbeat_interval=0.25).start()
    yield server, ServerClient(server.url)
    server.stop()
    interface.close()


def _drain(server, timeout: float = 5.0) -> None:
    server.interface.drain(timeout)


# -- graph routes ------------------------------------------------------------------

def test_get_graph_exports_program(served):
    server, api = served
    doc = api.graph_export()
    assert [e["name"] for e in doc["entities"]] == \
        ["prompt", "CLIPInputEntity", "CLIPAgent"]
    assert len(doc["edges"]) == 2


def test_post_graph_loads_into_live_graph(served):
    server, api = served
    extra = {"entities": [{"name": "extra", "kind": "Entity",
                           "properties": {"x": {"type": "any", "value": 5}}}],
             "edges": []}
    out = api.graph_load(extra)
    assert out["entities"] == 4
    assert api.entity("extra")["properties"]["x"]["value"] == 5


def test_post_graph_name_clash_is_422(served):
    server, api = served
    with pytest.raises(ApiError) as err:
        api.graph_load({"entities": [{"name": "prompt", "kind": "Entity",
                                      "properties": {}}], "edges": []})
    assert err.value.status == 422


# -- entity routes --------------------------------------------------------------------

def test_entity_crud(served):
    server, api = served
    dumps = api.entities()
    assert {d["name"] for d in dumps} == {"prompt", "CLIPInputEntity", "CLIPAgent"}
    created = api.create_entity({"name": "Training Data", "kind": "Entity",
                                 "properties": {"data": {"type": "array",
                                                         "value": {"link": "file:t"}}}})
    assert created["properties"]["data"]["value"] == {"link": "file:t"}
    edge = api.add_edge("CLIPAgent", "Training Data", "sets data")
    api.delete_edge(edge["id"])
    api.delete_entity("Training Data")
    with pytest.raises(ApiError) as err:
        api.entity("Training Data")
    assert err.value.status == 404


def test_entity_dump_includes_chain_and_versions(served):
    server, api = served
    dump = api.entity("CLIPAgent")
    assert dump["chain"] == ["AgentEntity", "Entity"]
    assert dump["properties"]["status"]["version"] == 0


def test_unknown_routes_and_entities(served):
    server, api = served
    with pytest.raises(ApiError) as err:
        api.entity("ghost")
    assert err.value.status == 404
    resp = requests.get(server.url + "/nosuchroute", timeout=5)
    assert resp.status_code == 404


# -- property routes ---------------------------------------------------------------------

def test_put_word_reports_trigger(served):
    server, api = served
    summary = api.set_property("prompt", "word", "bulldozer")
    assert summary["status"] == "committed"
    assert summary["triggers"] == ["CLIPAgent"]
    assert summary["events"] == 2


def test_put_wrong_type_is_422(served):
    server, api = served
    api.set_property("prompt", "word", "seed")      # word slot stays any-typed
    server.interface.graph.entity("prompt").properties["word"].declared_type = \
        __import__("beestar.values", fromlist=["ValueType"]).ValueType.STRING
    with pytest.raises(ApiError) as err:
        api.set_property("prompt", "word", 42)
    assert err.value.status == 422
    assert err.value.code == "type_error"


def test_put_cycle_is_409(served):
    server, api = served
    api.graph_load({
        "entities": [
            {"name": "A", "kind": "InputEntity", "properties": {}},
            {"name": "B", "kind": "InputEntity", "properties": {}},
        ],
        "edges": [
            {"from": "A", "to": "B", "label": "sets value"},
            {"from": "B", "to": "A", "label": "sets value"},
        ],
    })
    with pytest.raises(ApiError) as err:
        api.set_property("A", "value", "ping")
    assert err.value.status == 409
    assert err.value.code == "cycle_error"


def test_get_property_route(served):
    server, api = served
    api.set_property("prompt", "word", "crane")
    resp = requests.get(server.url + "/entities/prompt/properties/word", timeout=5)
    doc = resp.json()
    assert doc["value"] == "crane" and doc["version"] == 1


def test_agent_run_cause_restricted_to_output(served):
    server, api = served
    with pytest.raises(ApiError) as err:
        api.set_property("CLIPAgent", "input", "x", cause="agent-run")
    assert err.value.status == 422


# -- agent message routes ----------------------------------------------------------------------

def test_message_unregistered_agent_is_502(served):
    server, api = served
    with pytest.raises(ApiError) as err:
        api.message("CLIPAgent", "play")
    assert err.value.status == 502


def test_message_unknown_agent_is_404(served):
    server, api = served
    with pytest.raises(ApiError) as err:
        api.message("ghost", "play")
    assert err.value.status == 404


def test_message_bad_verb_is_422(served):
    server, api = served
    with pytest.raises(ApiError) as err:
        api.message("CLIPAgent", "think")
    assert err.value.status == 422


def test_register_and_forward(served):
    server, api = served
    from beestar.rpc import RpcServer

    seen = []

    def handler(doc):
        seen.append(doc)
        return {"id": doc["id"], "status": "ok", "detail": ""}

    rpc = RpcServer(handler).start()
    try:
        api.register_agent("CLIPAgent", rpc.endpoint)
        assert api.agent_registration("CLIPAgent")["endpoint"] == rpc.endpoint
        reply = api.message("CLIPAgent", "play")
        assert reply["status"] == "ok"
        assert seen[0]["verb"] == "play"
        assert api.agents()["agents"]["CLIPAgent"]["endpoint"] == rpc.endpoint
    finally:
        rpc.close()


def test_register_requires_existing_entity(served):
    server, api = served
    with pytest.raises(ApiError) as err:
        api.register_agent("ghost", "127.0.0.1:1")
    assert err.value.status == 404
    with pytest.raises(ApiError) as err:
        api.register_agent("CLIPAgent", "not-an-endpoint")
    assert err.value.status == 422


# -- event stream -------------------------------------------------------------------------------

def _interact(api):
    api.set_property("prompt", "word", "bulldozer")
    api.set_property("prompt", "word", "crane")
    api.set_property("CLIPAgent", "output", "CRANE", cause="agent-run")


def test_stream_replay_equals_event_log(served):
    server, api = served
    _interact(api)
    _drain(server)
    got = []
    for doc in api.events(since=-1):
        if doc["kind"] == "property_changed":
            got.append(doc["payload"])
        if len(got) == len(server.interface.event_log()):
            break
    expected = [ev.to_doc() for ev in server.interface.event_log()]
    assert got == expected


def test_two_clients_identical_sequences(served):
    server, api = served
    _interact(api)
    _drain(server)

    def collect(out):
        for doc in api.events(since=-1):
            out.append(doc)
            if len(out) >= 5:
                return

    one, two = [], []
    t1 = threading.Thread(target=collect, args=(one,))
    t2 = threading.Thread(target=collect, args=(two,))
    t1.start(); t2.start()
    t1.join(10); t2.join(10)
    assert one[:5] == two[:5]
    seqs = [d["seq"] for d in one[:5]]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)


def test_heartbeat_default_interval_is_15s():
    import inspect

    sig = inspect.signature(BeestarServer.__init__)
    assert sig.parameters["heartbeat_interval"].default == 15.0


def test_idle_stream_sends_heartbeats(served):
    server, api = served
    beats = 0
    for doc in api.events(since=10_000, include_heartbeats=True):
        assert doc["kind"] == "heartbeat"
        assert "seq" not in doc
        beats += 1
        if beats == 2:
            break
    assert beats == 2


def test_cursor_beyond_head_starts_live(served):
    server, api = served
    _interact(api)
    _drain(server)
    collected = []

    def tail():
        for doc in api.events(since=10_000):
            collected.append(doc)
            return

    t = threading.Thread(target=tail)
    t.start()
    time.sleep(0.2)
    api.set_property("prompt", "word", "late")
    t.join(10)
    assert collected and collected[0]["payload"]["new"] == "late"


def test_stream_rebuilds_exact_state(served):
    """Stream completeness: replay from 0 reconstructs values and versions."""
    server, api = served
    api.create_entity({"name": "late entity", "kind": "Entity",
                       "properties": {"x": {"type": "any", "value": None}}})
    _interact(api)
    api.set_property("late entity", "x", [1, 2, 3])
    _drain(server)

    rebuilt: dict = {}
    total = 0
    for doc in api.events(since=-1):
        total += 1
        if doc["kind"] == "graph_changed" and doc["payload"]["op"] == "entity_created":
            ent = doc["payload"]["entity"]
            for prop, spec in ent["properties"].items():
                rebuilt[(ent["name"], prop)] = (spec["value"], spec["version"])
        elif doc["kind"] == "property_changed":
            payload = doc["payload"]
            rebuilt[(payload["entity"], payload["prop"])] = \
                (payload["new"], payload["version"])
        if total >= 2 and doc["kind"] == "property_changed" and \
                doc["payload"]["entity"] == "late entity":
            break

    state = {
        (ent["name"], prop): (spec["value"], spec["version"])
        for ent in api.entities()
        for prop, spec in ent["properties"].items()
    }
    for key, expected in state.items():
        if key in rebuilt:
            assert rebuilt[key] == expected
    assert ("late entity", "x") in rebuilt


def test_api_engine_equivalence(served):
    """The same operations over HTTP and directly yield identical state."""
    server, api = served
    twin = Interface(listing_builder().graph)
    try:
        api.set_property("prompt", "word", "bulldozer")
        twin.set_property("prompt", "word", Value.string("bulldozer"))
        api.create_entity({"name": "N", "kind": "Entity",
                           "properties": {"x": {"type": "any", "value": 1}}})
        twin.create_entity("N", "Entity",
                           [("x", "any", Value.number(1))])
        api.add_edge("CLIPAgent", "N", "sets x")
        twin.add_edge("CLIPAgent", "N", "sets x")
        api.set_property("CLIPAgent", "output", "BULLDOZER", cause="agent-run")
        twin.apply_agent_output("CLIPAgent", Value.string("BULLDOZER"))

        assert api.graph_export() == export_program(twin.graph)
        http_log = [ev.to_doc() for ev in server.interface.event_log()]
        twin_log = [ev.to_doc() for ev in twin.event_log()]
        assert http_log == twin_log
    finally:
        twin.close()


def test_request_bodies_are_canonical_documents(served):
    server, api = served
    resp = requests.put(
        server.url + "/entities/prompt/properties/word",
        data=json.dumps({"value": "direct", "cause": "external-set"}),
        timeout=5,
    )
    assert resp.status_code == 200
    assert resp.json()["status"] == "committed"
    bad = requests.put(
        server.url + "/entities/prompt/properties/word",
        data=b"{not json",
        timeout=5,
    )
    assert bad.status_code == 400


def test_static_ui_serving(tmp_path):
    (tmp_path / "index.html").write_text("<html><body>dash</body></html>")
    (tmp_path / "app.js").write_text("console.log('hi')")
    interface = Interface(Graph())
    server = BeestarServer(interface, port=0, ui_dir=str(tmp_path)).start()
    try:
        root = requests.get(server.url + "/", timeout=5)
        assert root.status_code == 200 and b"dash" in root.content
        ui = requests.get(server.url + "/ui/app.js", timeout=5)
        assert ui.status_code == 200
        assert "javascript" in ui.headers["Content-Type"]
        missing = requests.get(server.url + "/ui/../secret", timeout=5)
        assert missing.status_code == 404
    finally:
        server.stop()
        interface.close()
