"""Serialized application documents: load, export, and structural diff.

A program document is UTF-8 JSON of the shape

    {"entities": [{"name": s, "kind": s,
                   "properties": {p: {"type": t, "value": v}}}, ...],
     "edges": [{"from": s, "to": s, "label": s}, ...]}

Entity order is creation order; edge order is ordinal order. Built-in
kind entities and "is a" edges never appear (the ``kind`` field encodes
them), so export(load(doc)) is the identity on canonicalized documents.
"""

from __future__ import annotations

from .errors import BeestarError, ValidationError
from .graph import LABEL_IS_A, EdgeLabel, Graph, is_identifier
from .values import Value, ValueType


def load_program(doc: dict, graph: Graph | None = None, strict: bool = True) -> Graph:
    """Materialize a document onto ``graph`` (a fresh one by default).

    Entities are created in list order, so custom kinds must precede
    their instances. Raises ValidationError with the offending locus.
    """
    if graph is None:
        graph = Graph(strict=strict)
    if not isinstance(doc, dict):
        raise ValidationError("program document must be a JSON object")
    entities = doc.get("entities", [])
    edges = doc.get("edges", [])
    if not isinstance(entities, list) or not isinstance(edges, list):
        raise ValidationError("'entities' and 'edges' must be lists")
    unknown = set(doc) - {"entities", "edges"}
    if unknown:
        raise ValidationError(f"unexpected top-level keys {sorted(unknown)}")

    for i, edoc in enumerate(entities):
        locus = f"entities[{i}]"
        if not isinstance(edoc, dict):
            raise ValidationError("entity must be an object", locus=locus)
        name = edoc.get("name")
        kind = edoc.get("kind")
        if not isinstance(name, str) or not name:
            raise ValidationError("entity needs a non-empty 'name'", locus=locus)
        locus = f"entities[{i}] ({name})"
        if not isinstance(kind, str) or not kind:
            raise ValidationError("entity needs a non-empty 'kind'", locus=locus)
        props = []
        raw_props = edoc.get("properties", {})
        if not isinstance(raw_props, dict):
            raise ValidationError("'properties' must be an object", locus=locus)
        for pname, pdoc in raw_props.items():
            if not isinstance(pdoc, dict) or "type" not in pdoc:
                raise ValidationError(
                    f"property {pname!r} needs {{'type', 'value'}}", locus=locus
                )
            if not is_identifier(pname):
                raise ValidationError(f"bad property identifier {pname!r}", locus=locus)
            try:
                declared = ValueType.parse(pdoc["type"])
                value = Value.from_json(pdoc.get("value"))
            except ValueError as exc:
                raise ValidationError(f"property {pname!r}: {exc}", locus=locus) from exc
            props.append((pname, declared, value))
        try:
            graph.create_entity(name, kind, props)
        except BeestarError as exc:
            raise ValidationError(str(exc), locus=locus) from exc

    for i, gdoc in enumerate(edges):
        locus = f"edges[{i}]"
        if not isinstance(gdoc, dict):
            raise ValidationError("edge must be an object", locus=locus)
        src, dst, label = gdoc.get("from"), gdoc.get("to"), gdoc.get("label")
        locus = f"edges[{i}] ({src} -[{label}]-> {dst})"
        if not all(isinstance(x, str) and x for x in (src, dst, label)):
            raise ValidationError("edge needs 'from', 'to' and 'label' strings", locus=locus)
        try:
            parsed = EdgeLabel.parse(label)
            if parsed.kind == LABEL_IS_A:
                raise ValidationError("'is a' edges are implied by 'kind'", locus=locus)
            graph.add_edge(src, dst, parsed)
        except ValidationError:
            raise
        except BeestarError as exc:
            raise ValidationError(str(exc), locus=locus) from exc
    return graph


def export_program(graph: Graph) -> dict:
    """The canonical document for the current graph state."""
    entities = []
    for ent in graph.entities(include_kinds=False):
        entities.append(
            {
                "name": ent.name,
                "kind": graph.kind_of(ent.name),
                "properties": {
                    p.name: {"type": p.declared_type.value, "value": p.value.to_json()}
                    for p in ent.properties.values()
                },
            }
        )
    edges = []
    for edge in graph.edges(include_is_a=False):
        src, dst = graph.edge_endpoints(edge)
        edges.append({"from": src, "to": dst, "label": edge.label.text()})
    return {"entities": entities, "edges": edges}


def diff_programs(left: dict, right: dict) -> list[dict]:
    """Structural differences between two documents, at spec granularity.

    One record per difference: {"path": s, "left": x, "right": y}.
    Entities match by name; property values compare atomically (a changed
    link is one differing value, not a diff inside the value object);
    edges compare by position.
    """
    out: list[dict] = []

    def leaf(path: str, a, b):
        if a != b:
            out.append({"path": path, "left": a, "right": b})

    def diff_entity(path: str, a: dict, b: dict):
        leaf(f"{path}.kind", a.get("kind"), b.get("kind"))
        aprops = a.get("properties", {})
        bprops = b.get("properties", {})
        for prop in list(aprops) + [p for p in bprops if p not in aprops]:
            if prop not in aprops or prop not in bprops:
                out.append({"path": f"{path}.properties.{prop}",
                            "left": aprops.get(prop), "right": bprops.get(prop)})
                continue
            leaf(f"{path}.properties.{prop}.type",
                 aprops[prop].get("type"), bprops[prop].get("type"))
            leaf(f"{path}.properties.{prop}.value",
                 aprops[prop].get("value"), bprops[prop].get("value"))

    lents = {e.get("name"): e for e in left.get("entities", [])}
    rents = {e.get("name"): e for e in right.get("entities", [])}
    for name in list(lents) + [n for n in rents if n not in lents]:
        a, b = lents.get(name), rents.get(name)
        if a is None or b is None:
            out.append({"path": f"entities[{name}]", "left": a, "right": b})
        else:
            diff_entity(f"entities[{name}]", a, b)

    ledges = left.get("edges", [])
    redges = right.get("edges", [])
    if len(ledges) != len(redges):
        out.append({"path": "edges.length", "left": len(ledges), "right": len(redges)})
    for i, (a, b) in enumerate(zip(ledges, redges)):
        leaf(f"edges[{i}]", a, b)
    return out
