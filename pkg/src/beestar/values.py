"""Tagged values and their canonical JSON encoding.

Every property on the graph holds a ``Value``: a tag from the closed
primitive type system plus a payload. The JSON encoding is the wire
contract shared by the document format, the HTTP API, the event log and
the agent executor protocol, so it has to be injective: objects shaped
exactly like ``{"link": s}``, ``{"shape": [...], "data": [...]}`` or
``{"language": s, "entrypoint": s, "text": s}`` always mean link, tensor
and code respectively, and record payloads with exactly those key sets
are rejected at construction time.

Numbers are IEEE-754 doubles; integers coerce to float on the way in so
that canonical re-encoding is stable. NaN and infinities are rejected
(they have no JSON form).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any


class ValueType(str, Enum):
    STRING = "string"
    NUMBER = "number"
    BOOLEAN = "boolean"
    ARRAY = "array"
    RECORD = "record"
    LINK = "link"
    TENSOR = "tensor"
    CODE = "code"
    NULL = "null"
    ANY = "any"

    @classmethod
    def parse(cls, tag: str) -> "ValueType":
        try:
            return cls(tag)
        except ValueError:
            raise ValueError(f"unknown value type {tag!r}") from None


# JSON object key sets with a reserved meaning in the encoding.
_LINK_KEYS = frozenset({"link"})
_TENSOR_KEYS = frozenset({"shape", "data"})
_CODE_KEYS = frozenset({"language", "entrypoint", "text"})
_RESERVED_SHAPES = (_LINK_KEYS, _TENSOR_KEYS, _CODE_KEYS)


@dataclass(frozen=True)
class Tensor:
    """Dense numeric payload: a shape and a flat row-major data list.

    An empty shape means a scalar (one data element). Large tensors
    should live behind a link value instead; everything here is inline.
    """

    shape: tuple[int, ...]
    data: tuple[float, ...]

    def __post_init__(self):
        shape = tuple(self.shape)
        for dim in shape:
            if not isinstance(dim, int) or isinstance(dim, bool) or dim < 0:
                raise ValueError(f"tensor shape dims must be non-negative ints, got {dim!r}")
        data = tuple(_as_double(x, "tensor data") for x in self.data)
        if math.prod(shape) != len(data):
            raise ValueError(
                f"tensor shape {list(shape)} implies {math.prod(shape)} elements, got {len(data)}"
            )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class Code:
    """A runnable function: language selects the executor, text is the body."""

    language: str
    entrypoint: str
    text: str

    def __post_init__(self):
        if not isinstance(self.language, str) or not self.language:
            raise ValueError("code.language must be a non-empty string")
        if not isinstance(self.text, str) or not self.text:
            raise ValueError("code.text must be a non-empty string")
        if not isinstance(self.entrypoint, str):
            raise ValueError("code.entrypoint must be a string")


def _as_double(x: Any, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"{what} must be a number, got {x!r}")
    f = float(x)
    if not math.isfinite(f):
        raise ValueError(f"{what} must be finite, got {x!r}")
    return f


@dataclass(frozen=True)
class Value:
    """A runtime value: tag plus payload. The tag is never ``any``."""

    tag: ValueType
    payload: Any = None

    def __post_init__(self):
        tag, payload = self.tag, self.payload
        if tag is ValueType.ANY:
            raise ValueError("'any' is a declared type, not a runtime value tag")
        if tag is ValueType.STRING:
            if not isinstance(payload, str):
                raise ValueError(f"string value needs str payload, got {payload!r}")
        elif tag is ValueType.NUMBER:
            object.__setattr__(self, "payload", _as_double(payload, "number value"))
        elif tag is ValueType.BOOLEAN:
            if not isinstance(payload, bool):
                raise ValueError(f"boolean value needs bool payload, got {payload!r}")
        elif tag is ValueType.ARRAY:
            items = tuple(payload)
            for item in items:
                if not isinstance(item, Value):
                    raise ValueError(f"array elements must be Values, got {item!r}")
            object.__setattr__(self, "payload", items)
        elif tag is ValueType.RECORD:
            if not isinstance(payload, dict):
                raise ValueError("record value needs a dict payload")
            for k, v in payload.items():
                if not isinstance(k, str) or not k:
                    raise ValueError(f"record keys must be non-empty strings, got {k!r}")
                if not isinstance(v, Value):
                    raise ValueError(f"record fields must be Values, got {v!r}")
            if frozenset(payload) in _RESERVED_SHAPES:
                raise ValueError(
                    f"record key set {sorted(payload)} is reserved by the encoding; "
                    "use the dedicated value kind instead"
                )
            object.__setattr__(self, "payload", dict(payload))
        elif tag is ValueType.LINK:
            if not isinstance(payload, str) or not payload:
                raise ValueError("link value needs a non-empty locator string")
        elif tag is ValueType.TENSOR:
            if not isinstance(payload, Tensor):
                raise ValueError("tensor value needs a Tensor payload")
        elif tag is ValueType.CODE:
            if not isinstance(payload, Code):
                raise ValueError("code value needs a Code payload")
        elif tag is ValueType.NULL:
            if payload is not None:
                raise ValueError("null value carries no payload")
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unhandled tag {tag!r}")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def string(cls, s: str) -> "Value":
        return cls(ValueType.STRING, s)

    @classmethod
    def number(cls, x: float) -> "Value":
        return cls(ValueType.NUMBER, x)

    @classmethod
    def boolean(cls, b: bool) -> "Value":
        return cls(ValueType.BOOLEAN, b)

    @classmethod
    def array(cls, items) -> "Value":
        return cls(ValueType.ARRAY, tuple(items))

    @classmethod
    def record(cls, fields: dict) -> "Value":
        return cls(ValueType.RECORD, dict(fields))

    @classmethod
    def link(cls, locator: str) -> "Value":
        return cls(ValueType.LINK, locator)

    @classmethod
    def tensor(cls, shape, data) -> "Value":
        return cls(ValueType.TENSOR, Tensor(tuple(shape), tuple(data)))

    @classmethod
    def code(cls, language: str, entrypoint: str, text: str) -> "Value":
        return cls(ValueType.CODE, Code(language, entrypoint, text))

    @classmethod
    def null(cls) -> "Value":
        return cls(ValueType.NULL, None)

    # -- predicates -----------------------------------------------------------

    @property
    def is_null(self) -> bool:
        return self.tag is ValueType.NULL

    def matches(self, declared: ValueType) -> bool:
        """True when this value may sit in a slot of the declared type.

        Links are indirections ("names where the value is stored"), so a
        link may sit in a slot of any declared type, like null.
        """
        return (
            declared is ValueType.ANY
            or self.is_null
            or self.tag is ValueType.LINK
            or self.tag is declared
        )

    # -- encoding -------------------------------------------------------------

    def to_json(self) -> Any:
        tag, payload = self.tag, self.payload
        if tag is ValueType.NULL:
            return None
        if tag in (ValueType.STRING, ValueType.NUMBER, ValueType.BOOLEAN):
            return payload
        if tag is ValueType.ARRAY:
            return [item.to_json() for item in payload]
        if tag is ValueType.RECORD:
            return {k: v.to_json() for k, v in payload.items()}
        if tag is ValueType.LINK:
            return {"link": payload}
        if tag is ValueType.TENSOR:
            return {"shape": list(payload.shape), "data": list(payload.data)}
        if tag is ValueType.CODE:
            return {
                "language": payload.language,
                "entrypoint": payload.entrypoint,
                "text": payload.text,
            }
        raise AssertionError(tag)  # pragma: no cover

    @classmethod
    def from_json(cls, obj: Any) -> "Value":
        """Decode a JSON-compatible object; the tag is inferred structurally."""
        if obj is None:
            return cls.null()
        if isinstance(obj, bool):
            return cls.boolean(obj)
        if isinstance(obj, (int, float)):
            return cls.number(obj)
        if isinstance(obj, str):
            return cls.string(obj)
        if isinstance(obj, (list, tuple)):
            return cls.array(cls.from_json(item) for item in obj)
        if isinstance(obj, dict):
            keys = frozenset(obj)
            if keys == _LINK_KEYS:
                return cls.link(obj["link"])
            if keys == _TENSOR_KEYS:
                if not isinstance(obj["shape"], (list, tuple)) or not isinstance(
                    obj["data"], (list, tuple)
                ):
                    raise ValueError(f"malformed tensor value: {obj!r}")
                return cls.tensor(obj["shape"], obj["data"])
            if keys == _CODE_KEYS:
                return cls.code(obj["language"], obj["entrypoint"], obj["text"])
            return cls.record({k: cls.from_json(v) for k, v in obj.items()})
        raise ValueError(f"cannot decode {type(obj).__name__} as a value")

    def canonical(self) -> str:
        return canonical_dumps(self.to_json())


def canonical_dumps(doc: Any) -> str:
    """The one JSON serialization used everywhere byte-equality matters."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False)
