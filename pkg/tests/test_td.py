import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS
from oracles import conforms
from wotusage.errors import TdError
from wotusage.td import conforms_to, default_value, parse_td, validate

IOT = "http://iotschema.org/"


def lamp(**over):
    doc = json.loads((CORPUS / "lamp-http.jsonld").read_text())
    doc.update(over)
    return doc


def test_lamp_listing():
    td = parse_td((CORPUS / "lamp-http.jsonld").read_text())
    assert td.name == "emergency_light"
    assert td.scheme == "http"
    assert IOT + "Light" in td.type_iris
    assert [i.name for i in td.properties] == ["Switch State"]
    assert [i.name for i in td.actions] == ["Switch On", "Switch Off"]
    on = td.interaction("Switch On")
    assert on.input_schema.type == "boolean"
    assert on.forms[0].href == "/switchOn"
    assert td.interaction("Switch State").value_schema.type == "boolean"
    assert validate(td) == []


def test_coap_twin_differs_only_in_base():
    http = parse_td((CORPUS / "lamp-http.jsonld").read_text())
    coap = parse_td((CORPUS / "lamp-coap.jsonld").read_text())
    assert coap.scheme == "coap"
    assert coap.interactions == http.interactions


def test_no_interactions():
    with pytest.raises(TdError, match="no interactions"):
        parse_td(lamp(interaction=[]))


@pytest.mark.parametrize("key", ["td:name", "td:base"])
def test_missing_identity(key):
    doc = lamp()
    del doc[key]
    with pytest.raises(TdError, match=key):
        parse_td(doc)


def test_not_json():
    with pytest.raises(TdError):
        parse_td("{nope")


def test_unknown_interaction_kind():
    doc = lamp()
    doc["interaction"][0]["@type"] = ["iot:SwitchStatus"]
    with pytest.raises(TdError, match="kind"):
        parse_td(doc)


def test_unknown_members_are_warnings():
    td = parse_td(lamp(extra=1))
    assert any("extra" in w for w in td.warnings)


def test_unsupported_schema_type():
    doc = lamp()
    doc["interaction"][1]["inputSchema"] = {"type": "integer"}
    with pytest.raises(TdError, match="integer"):
        parse_td(doc)


def test_duplicate_names_are_reported():
    doc = lamp()
    doc["interaction"][2]["td:name"] = "Switch On"
    diags = validate(parse_td(doc))
    assert any("duplicate" in d.message for d in diags)


def test_default_input_values():
    td = parse_td(lamp())
    assert default_value(td.interaction("Switch On").input_schema) is True
    assert default_value(None) is None


# -- schema conformance against a reference checker --

scalar_schemas = st.sampled_from([{"type": "boolean"}, {"type": "number"}, {"type": "string"}])
schemas = st.recursive(
    scalar_schemas,
    lambda inner: st.one_of(
        st.builds(lambda i: {"type": "array", "items": i}, inner),
        st.dictionaries(st.sampled_from("abc"), inner, min_size=1, max_size=2).map(
            lambda f: {"type": "object", "properties": f}
        ),
    ),
    max_leaves=4,
)
values = st.recursive(
    st.one_of(st.booleans(), st.integers(-3, 3), st.floats(allow_nan=False, width=16), st.text(max_size=2), st.none()),
    lambda inner: st.one_of(st.lists(inner, max_size=2), st.dictionaries(st.sampled_from("abc"), inner, max_size=2)),
    max_leaves=4,
)


def _with_schema(schema):
    doc = lamp()
    doc["interaction"][1]["inputSchema"] = schema
    return parse_td(doc).interaction("Switch On").input_schema


@settings(max_examples=300, deadline=None)
@given(schemas, values)
def test_conformance_agrees_with_reference(schema, value):
    assert conforms_to(value, _with_schema(schema)) == conforms(value, schema)


@given(schemas)
def test_default_value_conforms(schema):
    s = _with_schema(schema)
    assert conforms_to(default_value(s), s)
