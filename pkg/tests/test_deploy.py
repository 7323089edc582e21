import os
import signal
import time

import pytest

from beestar.deploy import DeployConfig, Deployer
from beestar.errors import UnknownAgent, ValidationError
from beestar.values import Value

from harness import listing_builder


@pytest.fixture
def offline_deployer():
    """Deployer over a direct interface, no HTTP server (simulated/container)."""
    from beestar.engine import Interface
    from beestar.registry import AgentRegistry, wire_triggers

    interface = Interface(listing_builder().graph)
    registry = AgentRegistry()
    wire_triggers(interface, registry)
    deployer = Deployer(DeployConfig(server_url="http://dummy:1"),
                        interface=interface, registry=registry)
    yield deployer, interface, registry
    deployer.stop_all()
    interface.close()


# -- manifests ---------------------------------------------------------------------

def test_manifest_install_lines_in_order(offline_deployer):
    deployer, interface, _ = offline_deployer
    interface.set_property(
        "CLIPAgent", "requirements",
        Value.array([Value.string("torch"), Value.string("pillow")]))
    manifest = deployer.generate_manifest("CLIPAgent")
    lines = manifest.splitlines()
    torch_at = lines.index("  - pip install 'torch'")
    pillow_at = lines.index("  - pip install 'pillow'")
    assert torch_at < pillow_at
    assert any(line.startswith("image: ") for line in lines)
    assert "command: python -m beestar.agent" in lines


def test_manifest_without_requirements_still_launches(offline_deployer):
    deployer, _, _ = offline_deployer
    manifest = deployer.generate_manifest("CLIPAgent")
    assert "pip install" not in manifest
    assert "command: python -m beestar.agent" in manifest
    assert "ports:" in manifest


def test_manifest_deterministic(offline_deployer):
    deployer, interface, _ = offline_deployer
    interface.set_property(
        "CLIPAgent", "requirements",
        Value.array([Value.string("a"), Value.string("b"), Value.string("c")]))
    assert deployer.generate_manifest("CLIPAgent") == \
        deployer.generate_manifest("CLIPAgent")


def test_manifest_unknown_agent(offline_deployer):
    deployer, _, _ = offline_deployer
    with pytest.raises(UnknownAgent):
        deployer.generate_manifest("nobody")


def test_container_target_writes_manifest(offline_deployer, tmp_path):
    deployer, _, _ = offline_deployer
    deployer.config.manifest_dir = str(tmp_path)
    handle = deployer.deploy("CLIPAgent", "container")
    assert handle.manifest_path == str(tmp_path / "CLIPAgent.yaml")
    assert os.path.exists(handle.manifest_path)
    assert deployer.status(handle) == ("unknown", None)


# -- simulated target ------------------------------------------------------------------

def test_simulated_deploy_and_idempotent_stop(offline_deployer):
    deployer, interface, registry = offline_deployer
    handle = deployer.deploy("CLIPAgent", "simulated")
    assert handle.worker.wait_idle(5.0)
    interface.drain()
    assert interface.graph.get_value("CLIPAgent", "status") == Value.string("idle")
    assert registry.endpoint_of("CLIPAgent") == handle.endpoint
    assert deployer.status(handle) == ("running", None)
    deployer.stop(handle)
    assert deployer.status(handle) == ("exited", 0)
    deployer.stop(handle)          # second stop is a no-op
    assert deployer.status(handle) == ("exited", 0)


def test_deploy_unknown_agent_spawns_nothing(offline_deployer):
    deployer, _, _ = offline_deployer
    with pytest.raises(UnknownAgent):
        deployer.deploy("nobody", "local")
    assert deployer.handles == {}


def test_deploy_rejects_unknown_target(offline_deployer):
    deployer, _, _ = offline_deployer
    with pytest.raises(ValidationError):
        deployer.deploy("CLIPAgent", "orbital")


# -- local target (real child processes) ---------------------------------------------------

def test_local_deploy_stop_and_crash(http_stack):
    server, deployer = http_stack
    handle = deployer.deploy("CLIPAgent", "local")
    assert handle.endpoint
    deadline = time.monotonic() + 10.0
    while time.monotonic() < deadline:
        if server.interface.graph.get_value("CLIPAgent", "status") == Value.string("idle"):
            break
        time.sleep(0.02)
    assert server.interface.graph.get_value("CLIPAgent", "status") == Value.string("idle")
    assert deployer.status(handle) == ("running", None)

    deployer.stop(handle)
    live, code = deployer.status(handle)
    assert live == "exited" and code == 0
    deployer.stop(handle)          # idempotent
    assert deployer.status(handle) == ("exited", 0)

    # crash: SIGKILL analog surfaces as nonzero exit
    second = deployer.deploy("CLIPAgent", "local")
    os.kill(second.process.pid, signal.SIGKILL)
    second.process.wait(timeout=5.0)
    live, code = deployer.status(second)
    assert live == "exited" and code != 0


def test_no_leaked_children_after_stop_all(http_stack):
    server, deployer = http_stack
    handle = deployer.deploy("CLIPAgent", "local")
    pid = handle.process.pid
    deployer.stop_all()
    assert handle.process.poll() is not None
    with pytest.raises(OSError):
        os.kill(pid, 0)            # no such process (already reaped)


def test_registration_timeout_reaps_the_child(http_stack, monkeypatch):
    server, deployer = http_stack
    deployer.config.registration_timeout = 0.3
    monkeypatch.setattr(deployer, "_registered_endpoint", lambda name: None)
    from beestar.errors import RegistrationTimeout

    with pytest.raises(RegistrationTimeout):
        deployer.deploy("CLIPAgent", "local")


def _scripted_http_run(target: str) -> str:
    """Same scripted interaction against a fresh server; returns the log."""
    from beestar.deploy import DeployConfig, Deployer
    from beestar.engine import Interface
    from beestar.server import BeestarServer
    from beestar.client import ServerClient

    interface = Interface(listing_builder().graph)
    server = BeestarServer(interface, port=0).start()
    deployer = Deployer(DeployConfig(server_url=server.url),
                        interface=interface, registry=server.registry)
    api = ServerClient(server.url)
    try:
        deployer.deploy("CLIPAgent", target)
        for word in ("bulldozer", "crane"):
            expected_version = interface.graph.property_of("CLIPAgent", "output").version + 1
            api.set_property("prompt", "word", word)
            deadline = time.monotonic() + 10.0
            while time.monotonic() < deadline:
                out = interface.graph.property_of("CLIPAgent", "output")
                status = interface.graph.get_value("CLIPAgent", "status")
                if out.version == expected_version and status == Value.string("idle"):
                    break
                time.sleep(0.01)
            interface.drain()
            time.sleep(0.05)       # let the idle mirror commit settle
        return interface.canonical_log()
    finally:
        deployer.stop_all()
        server.stop()
        interface.close()


def test_local_and_simulated_targets_equivalent():
    # target transparency: identical committed event logs for pure builtins
    local_log = _scripted_http_run("local")
    simulated_log = _scripted_http_run("simulated")
    assert local_log == simulated_log
    assert '"new":"BULLDOZER"' in local_log
