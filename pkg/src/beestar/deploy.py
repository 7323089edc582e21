"""Launching and supervising agents: local processes, in-process threads,
or container manifests.

One parameter picks the target. ``local`` spawns ``python -m
beestar.agent`` with BEESTAR_SERVER/BEESTAR_AGENT in the environment and
waits for registration; ``simulated`` runs the identical AgentWorker as
threads in this process (same frame protocol, loopback transport), so the
two targets produce the same committed event logs; ``container`` renders
a deterministic manifest from the agent's requirements property and
writes it out — applying it to a cluster is out of scope.
"""

from __future__ import annotations

import logging
import os
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .agent import AgentWorker, DirectGraphClient
from .errors import (
    AgentUnreachable,
    RegistrationTimeout,
    SpawnFailure,
    UnknownAgent,
    ValidationError,
)

logger = logging.getLogger(__name__)

TARGET_LOCAL = "local"
TARGET_SIMULATED = "simulated"
TARGET_CONTAINER = "container"
TARGETS = (TARGET_LOCAL, TARGET_SIMULATED, TARGET_CONTAINER)

LIVE_RUNNING = "running"
LIVE_EXITED = "exited"
LIVE_UNKNOWN = "unknown"


@dataclass
class DeployConfig:
    server_url: str = ""
    base_image: str = "beestar/agent-base:latest"
    agent_port: int = 7400
    manifest_dir: str = "manifests"
    registration_timeout: float = 10.0
    stop_grace: float = 2.0


@dataclass
class AgentHandle:
    agent: str
    target: str
    process: subprocess.Popen | None = None
    worker: AgentWorker | None = None
    manifest_path: str | None = None
    endpoint: str = ""
    _exit_code: int | None = field(default=None, repr=False)

    def liveness(self) -> tuple[str, int | None]:
        if self.target == TARGET_LOCAL and self.process is not None:
            code = self.process.poll()
            if code is None:
                return LIVE_RUNNING, None
            return LIVE_EXITED, code
        if self.target == TARGET_SIMULATED and self.worker is not None:
            if self._exit_code is None:
                return LIVE_RUNNING, None
            return LIVE_EXITED, self._exit_code
        return LIVE_UNKNOWN, None


class Deployer:
    """Owns every handle it creates; ``stop_all`` leaves no children behind.

    For in-process graph access pass ``interface`` (and a registry);
    otherwise simulated workers talk to ``config.server_url`` over HTTP
    like local ones do.
    """

    def __init__(self, config: DeployConfig | None = None, *,
                 interface=None, registry=None):
        self.config = config or DeployConfig()
        self.interface = interface
        self.registry = registry
        self.handles: dict[str, AgentHandle] = {}

    # -- queries -----------------------------------------------------------------

    def _agent_dump(self, name: str) -> dict:
        if self.interface is not None:
            from .errors import UnknownEntity

            try:
                dump = self.interface.graph.entity_dump(name)
            except UnknownEntity as exc:
                raise UnknownAgent(str(exc)) from exc
        else:
            from .client import ServerClient

            try:
                dump = ServerClient(self.config.server_url).entity(name)
            except Exception as exc:
                raise UnknownAgent(f"cannot fetch {name!r}: {exc}") from exc
        if "AgentEntity" not in dump.get("chain", []):
            raise UnknownAgent(f"{name!r} is not an AgentEntity")
        return dump

    def _registered_endpoint(self, name: str) -> str | None:
        if self.registry is not None:
            return self.registry.endpoint_of(name)
        from .client import ServerClient

        try:
            info = ServerClient(self.config.server_url).agent_registration(name)
        except Exception:
            return None
        return info.get("endpoint") if info else None

    # -- deploy -------------------------------------------------------------------

    def deploy(self, name: str, target: str) -> AgentHandle:
        if target not in TARGETS:
            raise ValidationError(f"unknown deploy target {target!r}")
        self._agent_dump(name)
        if target == TARGET_LOCAL:
            handle = self._deploy_local(name)
        elif target == TARGET_SIMULATED:
            handle = self._deploy_simulated(name)
        else:
            handle = self._deploy_container(name)
        self.handles[name] = handle
        return handle

    def _deploy_local(self, name: str) -> AgentHandle:
        if not self.config.server_url:
            raise SpawnFailure("local deploys need config.server_url")
        env = dict(os.environ)
        env["BEESTAR_SERVER"] = self.config.server_url
        env["BEESTAR_AGENT"] = name
        try:
            proc = subprocess.Popen(
                [sys.executable, "-m", "beestar.agent"],
                env=env,
                stdin=subprocess.DEVNULL,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot spawn agent process: {exc}") from exc
        handle = AgentHandle(agent=name, target=TARGET_LOCAL, process=proc)
        deadline = time.monotonic() + self.config.registration_timeout
        while time.monotonic() < deadline:
            endpoint = self._registered_endpoint(name)
            if endpoint:
                handle.endpoint = endpoint
                return handle
            if proc.poll() is not None:
                stderr = (proc.stderr.read() or b"").decode("utf-8", "replace")
                raise SpawnFailure(
                    f"agent process for {name!r} exited {proc.returncode}: {stderr.strip()}"
                )
            time.sleep(0.02)
        proc.terminate()
        raise RegistrationTimeout(
            f"agent {name!r} did not register within {self.config.registration_timeout}s"
        )

    def _deploy_simulated(self, name: str) -> AgentHandle:
        if self.interface is not None:
            client = DirectGraphClient(self.interface, self.registry)
        else:
            from .client import HttpGraphClient

            client = HttpGraphClient(self.config.server_url)
        worker = AgentWorker(name, client, stop_grace=1.0).start()
        return AgentHandle(agent=name, target=TARGET_SIMULATED, worker=worker,
                           endpoint=worker.endpoint)

    def _deploy_container(self, name: str) -> AgentHandle:
        manifest = self.generate_manifest(name)
        directory = Path(self.config.manifest_dir)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{name}.yaml"
        path.write_text(manifest, encoding="utf-8")
        return AgentHandle(agent=name, target=TARGET_CONTAINER,
                           manifest_path=str(path))

    # -- manifests -----------------------------------------------------------------

    def generate_manifest(self, name: str) -> str:
        """Deterministic launch manifest from the agent's requirements."""
        dump = self._agent_dump(name)
        reqs_doc = dump["properties"].get("requirements", {}).get("value") or []
        requirements = []
        for item in reqs_doc:
            if not isinstance(item, str):
                raise ValidationError(
                    f"requirements entries must be strings, got {item!r}", locus=name
                )
            requirements.append(item)
        port = self.config.agent_port
        lines = [
            f"# deployment manifest for agent {name}",
            f"agent: {name}",
            f"image: {self.config.base_image}",
            "env:",
            f"  BEESTAR_AGENT: {name}",
            f"  BEESTAR_SERVER: {self.config.server_url or 'http://beestar:7311'}",
            "install:",
        ]
        lines.extend(f"  - pip install '{req}'" for req in requirements)
        lines.extend(
            [
                "command: python -m beestar.agent",
                "ports:",
                f"  - \"{port}:{port}\"",
            ]
        )
        return "\n".join(lines) + "\n"

    # -- supervision ------------------------------------------------------------------

    def stop(self, handle: AgentHandle) -> None:
        """Graceful stop: agent-level stop verb, then process teardown."""
        if handle.endpoint:
            try:
                from . import rpc

                rpc.request(handle.endpoint, {"id": 0, "verb": "stop"}, timeout=2.0)
            except (OSError, ConnectionError, ValueError, AgentUnreachable):
                pass
        if handle.target == TARGET_LOCAL and handle.process is not None:
            if handle.process.poll() is None:
                handle.process.terminate()
                try:
                    handle.process.wait(timeout=self.config.stop_grace)
                except subprocess.TimeoutExpired:
                    handle.process.kill()
                    handle.process.wait(timeout=5.0)
        elif handle.target == TARGET_SIMULATED and handle.worker is not None:
            if handle._exit_code is None:
                handle.worker.close()
                handle._exit_code = 0

    def status(self, handle: AgentHandle) -> tuple[str, int | None]:
        return handle.liveness()

    def stop_all(self) -> None:
        for handle in list(self.handles.values()):
            self.stop(handle)
