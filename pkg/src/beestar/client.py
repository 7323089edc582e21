"""Thin HTTP client for the graph server; everything the CLI, deployer
and remote agents do goes through here."""

from __future__ import annotations

import json
from urllib.parse import quote

import requests

from .errors import BeestarError
from .values import Value, canonical_dumps


class ApiError(BeestarError):
    def __init__(self, status: int, code: str, detail: str):
        super().__init__(f"{status} {code}: {detail}")
        self.status = status
        self.code = code
        self.detail = detail


class ServerClient:
    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def _url(self, *segments: str) -> str:
        return self.base_url + "/" + "/".join(quote(s, safe="") for s in segments)

    def _request(self, method: str, url: str, body: dict | None = None,
                 params: dict | None = None) -> dict:
        resp = self._session.request(
            method,
            url,
            data=None if body is None else canonical_dumps(body).encode("utf-8"),
            params=params,
            headers={"Content-Type": "application/json"},
            timeout=self.timeout,
        )
        if resp.status_code >= 400:
            try:
                doc = resp.json()
            except ValueError:
                doc = {}
            raise ApiError(resp.status_code, doc.get("error", "error"),
                           doc.get("detail", resp.text[:400]))
        if not resp.content:
            return {}
        return resp.json()

    # -- graph ---------------------------------------------------------------

    def graph_export(self) -> dict:
        return self._request("GET", self.base_url + "/graph")

    def graph_load(self, doc: dict) -> dict:
        return self._request("POST", self.base_url + "/graph", body=doc)

    def entities(self) -> list[dict]:
        return self._request("GET", self.base_url + "/entities")["entities"]

    def entity(self, name: str) -> dict:
        return self._request("GET", self._url("entities", name))

    def create_entity(self, doc: dict) -> dict:
        return self._request("POST", self.base_url + "/entities", body=doc)

    def delete_entity(self, name: str) -> dict:
        return self._request("DELETE", self._url("entities", name))

    def add_edge(self, from_name: str, to_name: str, label: str) -> dict:
        return self._request("POST", self.base_url + "/edges",
                             body={"from": from_name, "to": to_name, "label": label})

    def delete_edge(self, edge_id: str) -> dict:
        return self._request("DELETE", self._url("edges", edge_id))

    # -- properties -------------------------------------------------------------

    def set_property(self, name: str, prop: str, value, cause: str = "external-set",
                     chain: dict | None = None) -> dict:
        body = {"value": value.to_json() if isinstance(value, Value) else value,
                "cause": cause}
        if chain is not None:
            body["chain"] = chain
        return self._request("PUT", self._url("entities", name, "properties", prop),
                             body=body)

    # -- agents --------------------------------------------------------------------

    def message(self, agent: str, verb: str, chain: dict | None = None) -> dict:
        body: dict = {"verb": verb}
        if chain is not None:
            body["chain"] = chain
        return self._request("POST", self._url("agents", agent, "message"), body=body)

    def register_agent(self, agent: str, endpoint: str) -> dict:
        return self._request("POST", self._url("agents", agent, "register"),
                             body={"endpoint": endpoint})

    def unregister_agent(self, agent: str) -> dict:
        return self._request("DELETE", self._url("agents", agent, "register"))

    def agents(self) -> dict:
        return self._request("GET", self.base_url + "/agents")

    def agent_registration(self, agent: str) -> dict:
        return self._request("GET", self._url("agents", agent))

    # -- events ---------------------------------------------------------------------

    def events(self, since: int = -1, include_heartbeats: bool = False):
        """Yield stream event documents; blocks on the live tail."""
        resp = self._session.get(
            self.base_url + "/events",
            params={"since": since},
            stream=True,
            timeout=(self.timeout, None),
        )
        if resp.status_code >= 400:
            raise ApiError(resp.status_code, "error", resp.text[:400])
        for line in resp.iter_lines():
            if not line:
                continue
            doc = json.loads(line.decode("utf-8"))
            if doc.get("kind") == "heartbeat" and not include_heartbeats:
                continue
            yield doc


class HttpGraphClient:
    """Graph access for agent workers running against a remote server."""

    def __init__(self, base_url: str):
        self.api = ServerClient(base_url)

    def get_entity(self, name: str) -> dict:
        return self.api.entity(name)

    def get_value(self, name: str, prop: str) -> Value:
        dump = self.api.entity(name)
        props = dump.get("properties", {})
        if prop not in props:
            raise ApiError(404, "unknown_property", f"{name!r} has no property {prop!r}")
        return Value.from_json(props[prop]["value"])

    def set_property(self, name: str, prop: str, value: Value, cause: str) -> dict:
        return self.api.set_property(name, prop, value, cause)

    def apply_output(self, name: str, value: Value, chain: dict | None) -> dict:
        return self.api.set_property(name, "output", value, cause="agent-run",
                                     chain=chain)

    def register_agent(self, name: str, endpoint: str) -> None:
        self.api.register_agent(name, endpoint)

    def unregister_agent(self, name: str) -> None:
        try:
            self.api.unregister_agent(name)
        except ApiError:
            pass

    def log_watchers(self, name: str) -> list[str]:
        chains = {d["name"]: d.get("chain", []) for d in self.api.entities()}
        out = []
        for edge in self.api.graph_export().get("edges", []):
            if edge["to"] == name and edge["label"].startswith("watches ") \
                    and "LogEntity" in chains.get(edge["from"], []) \
                    and edge["from"] not in out:
                out.append(edge["from"])
        return out
