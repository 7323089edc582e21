import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from beestar.values import Code, Tensor, Value, ValueType, canonical_dumps


def test_value_type_closed_set():
    assert ValueType.parse("tensor") is ValueType.TENSOR
    with pytest.raises(ValueError):
        ValueType.parse("float32")


def test_any_is_not_a_runtime_tag():
    with pytest.raises(ValueError):
        Value(ValueType.ANY, 1)


def test_number_coerces_to_double_and_rejects_nonfinite():
    assert Value.number(42).payload == 42.0
    assert isinstance(Value.number(42).payload, float)
    with pytest.raises(ValueError):
        Value.number(math.inf)
    with pytest.raises(ValueError):
        Value.number(math.nan)
    with pytest.raises(ValueError):
        Value.number(True)


def test_tensor_shape_data_product():
    v = Value.tensor([2, 3], [1, 2, 3, 4, 5, 6])
    assert v.payload.shape == (2, 3)
    with pytest.raises(ValueError):
        Value.tensor([2, 3], [1, 2, 3])
    # empty shape means scalar
    assert Value.tensor([], [7]).payload.data == (7.0,)
    with pytest.raises(ValueError):
        Value.tensor([], [])
    # zero-sized dimension means no data
    assert Value.tensor([0, 4], []).payload.data == ()
    with pytest.raises(ValueError):
        Tensor((-1,), ())


def test_link_and_code_invariants():
    assert Value.link("file:train.v0").payload == "file:train.v0"
    with pytest.raises(ValueError):
        Value.link("")
    with pytest.raises(ValueError):
        Code("", "main", "x = 1")
    with pytest.raises(ValueError):
        Code("python", "main", "")
    assert Value.code("python", "", "x = 1").payload.entrypoint == ""


def test_reserved_record_shapes_rejected():
    with pytest.raises(ValueError):
        Value.record({"link": Value.string("x")})
    with pytest.raises(ValueError):
        Value.record({"shape": Value.array(()), "data": Value.array(())})
    with pytest.raises(ValueError):
        Value.record({"language": Value.string("a"), "entrypoint": Value.string("b"),
                      "text": Value.string("c")})
    # supersets are plain records
    rec = Value.record({"link": Value.string("x"), "label": Value.string("y")})
    assert rec.tag is ValueType.RECORD


def test_structural_decoding():
    assert Value.from_json({"link": "file:x"}).tag is ValueType.LINK
    assert Value.from_json({"shape": [1], "data": [2]}).tag is ValueType.TENSOR
    code = Value.from_json({"language": "sh", "entrypoint": "", "text": "cat"})
    assert code.tag is ValueType.CODE
    assert Value.from_json({"a": 1}).tag is ValueType.RECORD
    assert Value.from_json(None).tag is ValueType.NULL
    assert Value.from_json(True).tag is ValueType.BOOLEAN
    with pytest.raises(ValueError):
        Value.from_json({"link": 5})


def test_matches_declared_types():
    assert Value.null().matches(ValueType.STRING)
    assert Value.string("x").matches(ValueType.ANY)
    assert Value.string("x").matches(ValueType.STRING)
    assert not Value.string("x").matches(ValueType.NUMBER)
    # links are indirections, assignable anywhere
    assert Value.link("file:z").matches(ValueType.ARRAY)


def test_canonical_is_sorted_and_compact():
    v = Value.record({"b": Value.number(1), "a": Value.string("x")})
    assert v.canonical() == '{"a":"x","b":1.0}'
    assert canonical_dumps({"z": 1, "a": 2}) == '{"a":2,"z":1}'


# -- encode/decode round trip -----------------------------------------------------

_scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.integers(min_value=-(2**53), max_value=2**53),
    st.text(max_size=12),
)


def _records(children):
    keys = st.text(
        alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")),
        min_size=1, max_size=6,
    )
    return st.dictionaries(keys, children, max_size=4)


json_values = st.recursive(
    _scalars, lambda ch: st.one_of(st.lists(ch, max_size=4), _records(ch)), max_leaves=20
)


@given(json_values)
def test_round_trip_through_canonical_encoding(obj):
    value = Value.from_json(obj)
    line = value.canonical()
    again = Value.from_json(json.loads(line))
    assert again == value
    assert again.canonical() == line


@given(st.lists(st.integers(min_value=0, max_value=4), max_size=3))
def test_tensor_round_trip(shape):
    count = math.prod(shape)
    value = Value.tensor(shape, [float(i) for i in range(count)])
    assert Value.from_json(json.loads(value.canonical())) == value
