import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from harness import LocalStack, listing_builder  # noqa: E402

_acceptance_results: list[tuple[str, str]] = []


def record_acceptance(name: str, passed: bool = True) -> None:
    _acceptance_results.append((name, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        terminalreporter.write_line(f"  {outcome}  {name}")


@pytest.fixture
def listing_stack():
    stack = LocalStack(listing_builder().graph)
    yield stack
    stack.close()


@pytest.fixture
def stack_factory():
    stacks = []

    def make(graph=None, **kwargs):
        stack = LocalStack(graph, **kwargs)
        stacks.append(stack)
        return stack

    yield make
    for stack in stacks:
        stack.close()


@pytest.fixture
def http_stack():
    """A live HTTP server over a fresh listing graph, plus deployer."""
    from beestar.deploy import DeployConfig, Deployer
    from beestar.engine import Interface
    from beestar.server import BeestarServer

    interface = Interface(listing_builder().graph)
    server = BeestarServer(interface, port=0, heartbeat_interval=0.3).start()
    deployer = Deployer(DeployConfig(server_url=server.url),
                        interface=interface, registry=server.registry)
    yield server, deployer
    deployer.stop_all()
    server.stop()
    interface.close()
