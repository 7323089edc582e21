"""Developer entry point.

Every command except ``serve``/``run`` is a thin HTTP client of a running
server. ``run`` loads a program, deploys its agents to the chosen target
and stays in the foreground supervising anything it hosts (simulated
workers are threads of this process; local agents are child processes).
Exit codes: 0 success, 1 user error, 2 server or agent failure.
"""

from __future__ import annotations

import json
import signal
import sys
import threading

import click
import requests

from .client import ApiError, ServerClient
from .deploy import DeployConfig, Deployer, TARGETS
from .engine import Interface
from .errors import BeestarError
from .graph import Graph
from .program import load_program
from .server import DEFAULT_PORT, BeestarServer

DEFAULT_SERVER = f"http://127.0.0.1:{DEFAULT_PORT}"


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, ApiError):
        return 1 if exc.status in (400, 404, 409, 422) else 2
    if isinstance(exc, (requests.ConnectionError, requests.Timeout)):
        return 2
    return 1 if isinstance(exc, BeestarError) else 2


def _client(ctx) -> ServerClient:
    return ServerClient(ctx.obj["server"])


@click.group()
@click.option("--server", envvar="BEESTAR_SERVER", default=DEFAULT_SERVER,
              show_default=True, help="Graph server address.")
@click.pass_context
def main(ctx, server):
    """Serve, run and steer declarative application graphs."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


def _build_server(host, port, load, ui, log_file, lax, max_chain_depth,
                  heartbeat) -> BeestarServer:
    graph = Graph(strict=not lax)
    if load is not None:
        with open(load, encoding="utf-8") as fh:
            load_program(json.load(fh), graph=graph)
    interface = Interface(graph, max_chain_depth=max_chain_depth, log_path=log_file)
    return BeestarServer(interface, host=host, port=port, ui_dir=ui,
                         heartbeat_interval=heartbeat).start()


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=DEFAULT_PORT, show_default=True)
@click.option("--load", type=click.Path(exists=True), default=None,
              help="Program document to load at startup.")
@click.option("--ui", type=click.Path(exists=True), default=None,
              help="Directory of dashboard assets to serve under /ui/.")
@click.option("--log-file", type=click.Path(), default=None,
              help="Append committed events to this file.")
@click.option("--lax", is_flag=True, help="Allow edges to missing properties.")
@click.option("--max-chain-depth", default=64, show_default=True)
@click.option("--heartbeat", default=15.0, show_default=True,
              help="Event stream heartbeat interval in seconds.")
def serve(host, port, load, ui, log_file, lax, max_chain_depth, heartbeat):
    """Start a graph server and block until interrupted."""
    try:
        server = _build_server(host, port, load, ui, log_file, lax,
                               max_chain_depth, heartbeat)
    except (BeestarError, OSError, json.JSONDecodeError) as exc:
        _fail(str(exc), 1)
        return
    click.echo(f"serving graph on {server.url}" +
               (f" (dashboard {server.url}/ui/)" if ui else ""))
    _block_forever(server, None)


def _block_forever(server: BeestarServer | None, deployer: Deployer | None) -> None:
    done = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: done.set())
    try:
        done.wait()
    except KeyboardInterrupt:
        pass
    finally:
        if deployer is not None:
            deployer.stop_all()
        if server is not None:
            server.stop()


@main.command()
@click.argument("program", type=click.Path(exists=True))
@click.option("--target", type=click.Choice(TARGETS), default="simulated",
              show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=DEFAULT_PORT, show_default=True)
@click.option("--ui", type=click.Path(exists=True), default=None)
@click.option("--log-file", type=click.Path(), default=None)
@click.option("--manifest-dir", type=click.Path(), default="manifests",
              show_default=True)
@click.option("--max-chain-depth", default=64, show_default=True)
@click.pass_context
def run(ctx, program, target, host, port, ui, log_file, manifest_dir,
        max_chain_depth):
    """Load PROGRAM, deploy its agents, print the dashboard address.

    Starts an embedded server unless --server points at a running one.
    """
    embedded = None
    source = ctx.get_parameter_source("server") if ctx.parent is None else \
        ctx.parent.get_parameter_source("server")
    use_remote = source is not None and source.name != "DEFAULT"
    try:
        with open(program, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read program: {exc}", 1)
        return

    try:
        if use_remote:
            server_url = ctx.obj["server"]
        else:
            embedded = _build_server(host, port, None, ui, log_file, False,
                                     max_chain_depth, 15.0)
            server_url = embedded.url
        api = ServerClient(server_url)
        api.graph_load(doc)
    except (BeestarError, OSError, requests.RequestException) as exc:
        if embedded is not None:
            embedded.stop()
        _fail(str(exc), _exit_code(exc))
        return

    config = DeployConfig(server_url=server_url, manifest_dir=manifest_dir)
    deployer = Deployer(
        config,
        interface=embedded.interface if embedded else None,
        registry=embedded.registry if embedded else None,
    )
    agent_names = [e["name"] for e in api.entities()
                   if "AgentEntity" in e.get("chain", [])]
    for name in agent_names:
        try:
            handle = deployer.deploy(name, target)
        except BeestarError as exc:
            deployer.stop_all()
            if embedded is not None:
                embedded.stop()
            _fail(f"deploying {name!r}: {exc}", 2)
            return
        where = handle.manifest_path or handle.endpoint or target
        click.echo(f"agent {name}: {target} ({where})")

    for dump in api.entities():
        click.echo(f"entity {dump['name']} [{dump['kind']}]")
    click.echo(f"server {server_url}")
    click.echo(f"dashboard {server_url}/ui/")

    if target == "container" and embedded is None:
        return
    _block_forever(embedded, deployer)


@main.command("set")
@click.argument("entity")
@click.argument("prop")
@click.argument("value_json")
@click.option("--cause", default="external-set", show_default=True)
@click.pass_context
def set_cmd(ctx, entity, prop, value_json, cause):
    """Assign a property; VALUE_JSON is a canonical document literal."""
    try:
        value = json.loads(value_json)
    except json.JSONDecodeError as exc:
        _fail(f"value is not valid JSON: {exc}", 1)
        return
    try:
        summary = _client(ctx).set_property(entity, prop, value, cause=cause)
    except Exception as exc:
        _fail(str(exc), _exit_code(exc))
        return
    click.echo(json.dumps(summary))


@main.command()
@click.argument("agent")
@click.argument("verb", type=click.Choice(["play", "stop", "debug"]))
@click.pass_context
def msg(ctx, agent, verb):
    """Send play/stop/debug to an agent."""
    try:
        reply = _client(ctx).message(agent, verb)
    except Exception as exc:
        _fail(str(exc), _exit_code(exc))
        return
    click.echo(json.dumps(reply))


@main.command()
@click.pass_context
def ls(ctx):
    """List entities with their kinds."""
    try:
        dumps = _client(ctx).entities()
    except Exception as exc:
        _fail(str(exc), _exit_code(exc))
        return
    for dump in dumps:
        click.echo(f"{dump['name']}\t{dump['kind']}")


@main.command()
@click.argument("entity")
@click.pass_context
def show(ctx, entity):
    """Dump one entity."""
    try:
        dump = _client(ctx).entity(entity)
    except Exception as exc:
        _fail(str(exc), _exit_code(exc))
        return
    click.echo(json.dumps(dump, indent=2, sort_keys=True))


@main.command()
@click.option("--since", default=-1, show_default=True)
@click.pass_context
def watch(ctx, since):
    """Stream events to stdout, one JSON line each."""
    try:
        for doc in _client(ctx).events(since=since):
            click.echo(json.dumps(doc, sort_keys=True))
    except KeyboardInterrupt:
        pass
    except Exception as exc:
        _fail(str(exc), _exit_code(exc))


@main.command()
@click.argument("path", type=click.Path())
@click.pass_context
def export(ctx, path):
    """Write the current graph as a program document."""
    try:
        doc = _client(ctx).graph_export()
    except Exception as exc:
        _fail(str(exc), _exit_code(exc))
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    click.echo(f"exported {len(doc['entities'])} entities, "
               f"{len(doc['edges'])} edges to {path}")


if __name__ == "__main__":  # pragma: no cover
    main()
