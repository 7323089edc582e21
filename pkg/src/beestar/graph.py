"""The typed property graph: entities, kinds, edges, and the builder facade.

Entities are named nodes holding versioned, typed properties. Kinds are
themselves entities; every entity except the root kind ``Entity`` has
exactly one outgoing "is a" edge, and an entity's kind chain is the walk
from its declared kind up to ``Entity``. The built-in kinds (agents,
display widgets, inputs, buttons) ship with required-property schemas
that are auto-filled at creation.

Mutations are serialized behind one lock; reads take the same lock and
therefore always see a consistent graph. Property *values* are only
assigned through ``apply_assignment``, which the propagation engine
calls at wave commit — nothing else may bump a version.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass, field

from .errors import (
    BadLabelGrammar,
    DanglingProperty,
    DuplicateEdge,
    DuplicateName,
    PropertyTypeError,
    SchemaViolation,
    UnknownEdge,
    UnknownEntity,
    UnknownKind,
    UnknownProperty,
    ValidationError,
)
from .values import Value, ValueType

logger = logging.getLogger(__name__)

ROOT_KIND = "Entity"

_IDENTIFIER_RE = re.compile(r"^[A-Za-z0-9_](?:[A-Za-z0-9_ ]*[A-Za-z0-9_])?$")


def is_identifier(name: str) -> bool:
    """Property identifiers: letters/digits/underscore/space, non-empty,
    no leading or trailing space."""
    return isinstance(name, str) and bool(_IDENTIFIER_RE.match(name))


# -- edge labels ---------------------------------------------------------------

LABEL_IS_A = "is a"
LABEL_WATCHES = "watches"
LABEL_SETS = "sets"
LABEL_MESSAGES = "messages"


@dataclass(frozen=True)
class EdgeLabel:
    """One of: ``is a`` | ``watches <prop>`` | ``sets <prop>`` | ``messages``.

    The string grammar is bit-exact and round-trips through parse/text.
    """

    kind: str
    prop: str | None = None

    def __post_init__(self):
        if self.kind in (LABEL_IS_A, LABEL_MESSAGES):
            if self.prop is not None:
                raise BadLabelGrammar(f"label {self.kind!r} takes no property")
        elif self.kind in (LABEL_WATCHES, LABEL_SETS):
            if not is_identifier(self.prop or ""):
                raise BadLabelGrammar(f"label {self.kind!r} needs a property identifier")
        else:
            raise BadLabelGrammar(f"unknown label kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "EdgeLabel":
        if not isinstance(text, str):
            raise BadLabelGrammar(f"edge label must be a string, got {text!r}")
        if text == LABEL_IS_A:
            return cls(LABEL_IS_A)
        if text == LABEL_MESSAGES:
            return cls(LABEL_MESSAGES)
        for kind in (LABEL_WATCHES, LABEL_SETS):
            prefix = kind + " "
            if text.startswith(prefix):
                prop = text[len(prefix):]
                if not is_identifier(prop):
                    raise BadLabelGrammar(f"bad property name in edge label {text!r}")
                return cls(kind, prop)
        raise BadLabelGrammar(f"unparseable edge label {text!r}")

    def text(self) -> str:
        if self.prop is None:
            return self.kind
        return f"{self.kind} {self.prop}"


# -- graph elements ------------------------------------------------------------

@dataclass
class Property:
    name: str
    declared_type: ValueType
    value: Value
    version: int = 0


@dataclass
class Entity:
    id: str
    name: str
    properties: dict[str, Property] = field(default_factory=dict)
    builtin_kind: bool = False


@dataclass(frozen=True)
class Edge:
    id: str
    from_id: str
    to_id: str
    label: EdgeLabel
    ordinal: int


@dataclass(frozen=True)
class KindSchema:
    """Required properties (with defaults) contributed by a built-in kind."""

    name: str
    parent: str | None
    required: tuple[tuple[str, ValueType, Value], ...] = ()


_NULL = Value.null()

BUILTIN_KINDS: tuple[KindSchema, ...] = (
    KindSchema(ROOT_KIND, None),
    KindSchema(
        "AgentEntity",
        ROOT_KIND,
        (
            ("source code", ValueType.CODE, _NULL),
            ("input", ValueType.ANY, _NULL),
            ("output", ValueType.ANY, _NULL),
            ("requirements", ValueType.ARRAY, Value.array(())),
            ("status", ValueType.STRING, Value.string("idle")),
        ),
    ),
    KindSchema("DisplayEntity", ROOT_KIND),
    KindSchema(
        "GalleryEntity",
        "DisplayEntity",
        (
            ("background", ValueType.STRING, _NULL),
            ("border", ValueType.STRING, _NULL),
        ),
    ),
    KindSchema("GraphEntity", "DisplayEntity", (("title", ValueType.STRING, _NULL),)),
    KindSchema("StatusEntity", "DisplayEntity"),
    KindSchema("LogEntity", "DisplayEntity", (("lines", ValueType.ARRAY, Value.array(())),)),
    KindSchema("CodeEditorEntity", "DisplayEntity"),
    KindSchema(
        "InputEntity",
        ROOT_KIND,
        (
            ("label", ValueType.STRING, _NULL),
            ("value", ValueType.ANY, _NULL),
        ),
    ),
    KindSchema(
        "ButtonEntity",
        ROOT_KIND,
        (
            ("label", ValueType.STRING, _NULL),
            ("message", ValueType.STRING, Value.string("play")),
        ),
    ),
)

BUILTIN_KIND_NAMES = tuple(k.name for k in BUILTIN_KINDS)
_BUILTIN_BY_NAME = {k.name: k for k in BUILTIN_KINDS}


class Graph:
    """In-memory property graph with the kind system pre-seeded.

    ``strict`` controls dangling-property checking on watches/sets edges:
    strict raises, lax logs a warning and allows the edge.
    """

    def __init__(self, strict: bool = True):
        self.strict = strict
        self._lock = threading.RLock()
        self._entities: dict[str, Entity] = {}       # name -> entity, insertion order
        self._by_id: dict[str, Entity] = {}
        self._edges: dict[str, Edge] = {}
        self._edge_order: list[str] = []
        self._out: dict[str, list[str]] = {}          # entity id -> edge ids
        self._in: dict[str, list[str]] = {}
        self._entity_seq = 0
        self._edge_seq = 0
        self._seed_kinds()

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    def _seed_kinds(self) -> None:
        for schema in BUILTIN_KINDS:
            ent = self._new_entity(schema.name, builtin_kind=True)
            if schema.parent is not None:
                self._link_is_a(ent, self._entities[schema.parent])

    # -- internals -------------------------------------------------------------

    def _new_entity(self, name: str, builtin_kind: bool = False) -> Entity:
        eid = f"e{self._entity_seq}"
        self._entity_seq += 1
        ent = Entity(id=eid, name=name, builtin_kind=builtin_kind)
        self._entities[name] = ent
        self._by_id[eid] = ent
        self._out[eid] = []
        self._in[eid] = []
        return ent

    def _store_edge(self, from_ent: Entity, to_ent: Entity, label: EdgeLabel) -> Edge:
        for eid in self._out[from_ent.id]:
            existing = self._edges[eid]
            if existing.to_id == to_ent.id and existing.label == label:
                raise DuplicateEdge(
                    f"edge {from_ent.name!r} -[{label.text()}]-> {to_ent.name!r} already exists"
                )
        edge = Edge(
            id=f"g{self._edge_seq}",
            from_id=from_ent.id,
            to_id=to_ent.id,
            label=label,
            ordinal=self._edge_seq,
        )
        self._edge_seq += 1
        self._edges[edge.id] = edge
        self._edge_order.append(edge.id)
        self._out[from_ent.id].append(edge.id)
        self._in[to_ent.id].append(edge.id)
        return edge

    def _link_is_a(self, ent: Entity, kind_ent: Entity) -> Edge:
        return self._store_edge(ent, kind_ent, EdgeLabel(LABEL_IS_A))

    def _entity(self, name: str) -> Entity:
        ent = self._entities.get(name)
        if ent is None:
            raise UnknownEntity(f"no entity named {name!r}")
        return ent

    def _is_a_target(self, ent: Entity) -> Entity | None:
        for eid in self._out[ent.id]:
            edge = self._edges[eid]
            if edge.label.kind == LABEL_IS_A:
                return self._by_id[edge.to_id]
        return None

    # -- entity operations -------------------------------------------------------

    def create_entity(self, name: str, kind: str, props=()) -> Entity:
        """Create a named entity of the given kind.

        ``props`` is an iterable of (name, declared type, initial value).
        Required properties from the kind chain's built-in schemas are
        auto-filled with their defaults when not supplied.
        """
        with self._lock:
            if not isinstance(name, str) or not name:
                raise ValidationError("entity name must be a non-empty string")
            if name in self._entities:
                raise DuplicateName(f"entity name {name!r} already in use")
            kind_ent = self._entities.get(kind)
            if kind_ent is None:
                raise UnknownKind(f"no kind named {kind!r}")

            required = self.required_schema(kind)
            resolved: list[Property] = []
            seen: set[str] = set()
            for raw_name, raw_type, raw_value in props:
                if not is_identifier(raw_name):
                    raise SchemaViolation(f"bad property identifier {raw_name!r}")
                if raw_name in seen:
                    raise SchemaViolation(f"duplicate property {raw_name!r}")
                seen.add(raw_name)
                declared = raw_type if isinstance(raw_type, ValueType) else ValueType.parse(raw_type)
                value = raw_value if isinstance(raw_value, Value) else Value.from_json(raw_value)
                if raw_name in required and declared is not required[raw_name][0]:
                    raise SchemaViolation(
                        f"property {raw_name!r} on kind {kind!r} must be declared "
                        f"{required[raw_name][0].value}, got {declared.value}"
                    )
                if not value.matches(declared):
                    raise SchemaViolation(
                        f"initial value for {raw_name!r} has tag {value.tag.value}, "
                        f"declared {declared.value}"
                    )
                resolved.append(Property(raw_name, declared, value))
            for prop_name, (declared, default) in required.items():
                if prop_name not in seen:
                    resolved.append(Property(prop_name, declared, default))

            ent = self._new_entity(name)
            for prop in resolved:
                ent.properties[prop.name] = prop
            self._link_is_a(ent, kind_ent)
            return ent

    def remove_entity(self, name: str) -> None:
        """Delete an entity and every incident edge. Kinds in use stay put."""
        with self._lock:
            ent = self._entity(name)
            if ent.builtin_kind:
                raise ValidationError(f"built-in kind {name!r} cannot be removed")
            for eid in self._in[ent.id]:
                if self._edges[eid].label.kind == LABEL_IS_A:
                    raise ValidationError(
                        f"{name!r} serves as a kind for other entities", locus=name
                    )
            for eid in list(self._in[ent.id]) + list(self._out[ent.id]):
                self._drop_edge(eid)
            del self._entities[name]
            del self._by_id[ent.id]
            del self._out[ent.id]
            del self._in[ent.id]

    def has_entity(self, name: str) -> bool:
        with self._lock:
            return name in self._entities

    def entity(self, name: str) -> Entity:
        with self._lock:
            return self._entity(name)

    def entities(self, include_kinds: bool = False) -> list[Entity]:
        with self._lock:
            return [
                e for e in self._entities.values() if include_kinds or not e.builtin_kind
            ]

    # -- edges -------------------------------------------------------------------

    def add_edge(self, from_name: str, to_name: str, label) -> Edge:
        """Add a watches/sets/messages edge between two named entities."""
        with self._lock:
            parsed = label if isinstance(label, EdgeLabel) else EdgeLabel.parse(label)
            src = self._entity(from_name)
            dst = self._entity(to_name)
            if parsed.kind == LABEL_IS_A:
                raise ValidationError("kind is fixed at creation; 'is a' edges cannot be added")
            if parsed.kind in (LABEL_WATCHES, LABEL_SETS) and parsed.prop not in dst.properties:
                message = (
                    f"edge {from_name!r} -[{parsed.text()}]-> {to_name!r}: "
                    f"{to_name!r} has no property {parsed.prop!r}"
                )
                if self.strict:
                    raise DanglingProperty(message)
                logger.warning("%s (lax mode, edge allowed)", message)
            return self._store_edge(src, dst, parsed)

    def remove_edge(self, edge_id: str) -> None:
        with self._lock:
            edge = self._edges.get(edge_id)
            if edge is None:
                raise UnknownEdge(f"no edge with id {edge_id!r}")
            if edge.label.kind == LABEL_IS_A:
                raise ValidationError("'is a' edges cannot be removed")
            self._drop_edge(edge_id)

    def _drop_edge(self, edge_id: str) -> None:
        edge = self._edges.pop(edge_id)
        self._edge_order.remove(edge_id)
        self._out[edge.from_id].remove(edge_id)
        self._in[edge.to_id].remove(edge_id)

    def edge(self, edge_id: str) -> Edge:
        with self._lock:
            edge = self._edges.get(edge_id)
            if edge is None:
                raise UnknownEdge(f"no edge with id {edge_id!r}")
            return edge

    def edges(self, include_is_a: bool = False) -> list[Edge]:
        with self._lock:
            out = [self._edges[eid] for eid in self._edge_order]
            if not include_is_a:
                out = [e for e in out if e.label.kind != LABEL_IS_A]
            return out

    def edge_endpoints(self, edge: Edge) -> tuple[str, str]:
        with self._lock:
            return self._by_id[edge.from_id].name, self._by_id[edge.to_id].name

    # -- kind system ---------------------------------------------------------------

    def kind_of(self, name: str) -> str:
        with self._lock:
            target = self._is_a_target(self._entity(name))
            if target is None:
                raise UnknownKind(f"{name!r} has no kind (root kind entity)")
            return target.name

    def kind_chain(self, name: str) -> list[str]:
        """Kind names from the declared kind up to ``Entity`` inclusive."""
        with self._lock:
            ent = self._entity(name)
            if ent.builtin_kind and ent.name == ROOT_KIND:
                return [ROOT_KIND]
            chain: list[str] = []
            cursor = self._is_a_target(ent)
            while cursor is not None:
                chain.append(cursor.name)
                if cursor.name == ROOT_KIND:
                    break
                cursor = self._is_a_target(cursor)
            return chain

    def has_kind(self, name: str, kind: str) -> bool:
        return kind in self.kind_chain(name)

    def required_schema(self, kind: str) -> dict[str, tuple[ValueType, Value]]:
        """Required properties for instances of ``kind``, walking built-in parents."""
        with self._lock:
            kind_ent = self._entities.get(kind)
            if kind_ent is None:
                raise UnknownKind(f"no kind named {kind!r}")
            names = [kind] + ([] if kind == ROOT_KIND else self.kind_chain(kind))
            merged: dict[str, tuple[ValueType, Value]] = {}
            for kname in reversed(names):        # parents first, children override
                schema = _BUILTIN_BY_NAME.get(kname)
                if schema is None:
                    continue
                for prop_name, declared, default in schema.required:
                    merged[prop_name] = (declared, default)
            return merged

    # -- relationship queries --------------------------------------------------------

    def watchers_of(self, name: str, prop: str) -> list[Entity]:
        """Entities holding a ``watches <prop>`` edge to ``name``, ordinal order."""
        with self._lock:
            ent = self._entity(name)
            out = []
            for eid in self._in[ent.id]:
                edge = self._edges[eid]
                if edge.label.kind == LABEL_WATCHES and edge.label.prop == prop:
                    out.append(self._by_id[edge.from_id])
            return out

    def set_targets_of(self, name: str) -> list[tuple[Entity, str]]:
        """Targets of outgoing ``sets`` edges, ordinal order."""
        with self._lock:
            ent = self._entity(name)
            out = []
            for eid in self._out[ent.id]:
                edge = self._edges[eid]
                if edge.label.kind == LABEL_SETS:
                    out.append((self._by_id[edge.to_id], edge.label.prop))
            return out

    def message_targets_of(self, name: str) -> list[Entity]:
        with self._lock:
            ent = self._entity(name)
            return [
                self._by_id[self._edges[eid].to_id]
                for eid in self._out[ent.id]
                if self._edges[eid].label.kind == LABEL_MESSAGES
            ]

    # -- property access ---------------------------------------------------------------

    def property_of(self, name: str, prop: str) -> Property:
        with self._lock:
            ent = self._entity(name)
            p = ent.properties.get(prop)
            if p is None:
                raise UnknownProperty(f"{name!r} has no property {prop!r}")
            return p

    def get_value(self, name: str, prop: str) -> Value:
        return self.property_of(name, prop).value

    def check_assignable(self, name: str, prop: str, value: Value) -> Property:
        """Validate an assignment without performing it."""
        p = self.property_of(name, prop)
        if not value.matches(p.declared_type):
            raise PropertyTypeError(
                f"{name}.{prop} is declared {p.declared_type.value}, "
                f"got a {value.tag.value} value"
            )
        return p

    def apply_assignment(self, name: str, prop: str, value: Value) -> tuple[Value, int]:
        """Assign and bump the version. Only the propagation engine calls this."""
        with self._lock:
            p = self.check_assignable(name, prop, value)
            old = p.value
            p.value = value
            p.version += 1
            return old, p.version

    def force_assignment(self, name: str, prop: str, value: Value, version: int) -> None:
        """Replay path: set value and version exactly as recorded."""
        with self._lock:
            p = self.property_of(name, prop)
            if version != p.version + 1:
                raise ValidationError(
                    f"replay version gap on {name}.{prop}: have {p.version}, event {version}"
                )
            p.value = value
            p.version = version

    # -- snapshots ---------------------------------------------------------------------

    def snapshot_values(self) -> dict[tuple[str, str], tuple[Value, int]]:
        """Bit-exact copy of every (entity, prop) -> (value, version)."""
        with self._lock:
            return {
                (ent.name, p.name): (p.value, p.version)
                for ent in self._entities.values()
                for p in ent.properties.values()
            }

    def entity_dump(self, name: str) -> dict:
        """JSON-compatible dump of one entity, including kind chain and versions."""
        with self._lock:
            ent = self._entity(name)
            kind = None if (ent.builtin_kind and name == ROOT_KIND) else self.kind_of(name)
            return {
                "name": ent.name,
                "kind": kind,
                "chain": self.kind_chain(name),
                "properties": {
                    p.name: {
                        "type": p.declared_type.value,
                        "value": p.value.to_json(),
                        "version": p.version,
                    }
                    for p in ent.properties.values()
                },
            }


class Builder:
    """Declarative sugar over a Graph, mirroring the six-line style of
    building an application: create entities, then wire sets/watches.

    ``sets``/``watch`` auto-declare the named property (type ``any``,
    value null) on targets that lack it, so a prompt does not need its
    slot declared up front; the raw ``add_edge`` stays strict.
    """

    def __init__(self, graph: Graph | None = None):
        self.graph = graph if graph is not None else Graph()

    def _name(self, ref) -> str:
        return ref.name if isinstance(ref, Entity) else ref

    @staticmethod
    def _props(props: dict | None) -> list[tuple[str, ValueType, Value]]:
        out = []
        for name, spec in (props or {}).items():
            if isinstance(spec, tuple):
                declared, value = spec
                declared = declared if isinstance(declared, ValueType) else ValueType.parse(declared)
                value = value if isinstance(value, Value) else Value.from_json(value)
            else:
                value = spec if isinstance(spec, Value) else Value.from_json(spec)
                declared = ValueType.ANY if value.is_null else value.tag
            out.append((name, declared, value))
        return out

    def entity(self, name: str, props: dict | None = None, kind: str = ROOT_KIND) -> Entity:
        return self.graph.create_entity(name, kind, self._props(props))

    def input(self, name: str, label: str | None = None) -> Entity:
        props = {"label": Value.string(label)} if label else None
        return self.graph.create_entity(name, "InputEntity", self._props(props))

    def button(self, name: str, label: str, message: str = "play", target=None) -> Entity:
        ent = self.graph.create_entity(
            name,
            "ButtonEntity",
            [
                ("label", ValueType.STRING, Value.string(label)),
                ("message", ValueType.STRING, Value.string(message)),
            ],
        )
        if target is not None:
            self.graph.add_edge(ent.name, self._name(target), EdgeLabel(LABEL_MESSAGES))
        return ent

    def agent(self, name: str, func: str | None = None, code: Value | None = None,
              requirements=()) -> Entity:
        """An AgentEntity; ``func`` names a builtin, ``code`` overrides it."""
        if code is None and func is not None:
            code = Value.code("builtin", "main", func)
        props: list[tuple[str, ValueType, Value]] = []
        if code is not None:
            props.append(("source code", ValueType.CODE, code))
        if requirements:
            props.append(
                ("requirements", ValueType.ARRAY,
                 Value.array(Value.string(r) for r in requirements))
            )
        return self.graph.create_entity(name, "AgentEntity", props)

    def display(self, name: str, kind: str = "GalleryEntity",
                props: dict | None = None) -> Entity:
        return self.graph.create_entity(name, kind, self._props(props))

    def _ensure_property(self, target_name: str, prop: str) -> None:
        ent = self.graph.entity(target_name)
        with self.graph.lock:
            if prop not in ent.properties:
                if not is_identifier(prop):
                    raise SchemaViolation(f"bad property identifier {prop!r}")
                ent.properties[prop] = Property(prop, ValueType.ANY, Value.null())

    def sets(self, source, prop: str, targets) -> list[Edge]:
        """One ``sets <prop>`` edge per target, in the given order."""
        src = self._name(source)
        out = []
        for target in targets:
            tname = self._name(target)
            self._ensure_property(tname, prop)
            out.append(self.graph.add_edge(src, tname, EdgeLabel(LABEL_SETS, prop)))
        return out

    def watch(self, watcher, prop: str, targets) -> list[Edge]:
        """One ``watches <prop>`` edge per watched target, in the given order."""
        src = self._name(watcher)
        out = []
        for target in targets:
            tname = self._name(target)
            self._ensure_property(tname, prop)
            out.append(self.graph.add_edge(src, tname, EdgeLabel(LABEL_WATCHES, prop)))
        return out
