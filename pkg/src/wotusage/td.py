"""Thing Description model, parser and structural validation.

Only the compact key names used by early TD drafts are understood; the JSON-LD
``@context`` is not expanded.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

from . import vocab
from .errors import TdError

KINDS = {"td:Property": "Property", "td:Action": "Action", "td:Event": "Event"}
SCHEMA_TYPES = ("boolean", "number", "string", "object", "array")

_TOP_KEYS = {"@context", "@type", "td:base", "td:name", "interaction"}
_INTERACTION_KEYS = {
    "@type", "td:name", "td:schema", "inputSchema", "outputSchema", "td:form",
    "writable", "td:writable", "observable", "td:observable",
}
_FORM_KEYS = {"href", "rel", "mediaType"}

_SCHEME = re.compile(r"^([A-Za-z][A-Za-z0-9+.-]*):")


@dataclass(frozen=True)
class DataSchema:
    type: str
    semantic_types: tuple[str, ...] = ()
    fields: dict[str, "DataSchema"] | None = None
    items: "DataSchema | None" = None

    def __hash__(self):
        return hash((self.type, self.semantic_types))


@dataclass(frozen=True)
class Form:
    href: str
    rel: tuple[str, ...] = ()
    media_type: str = "application/json"


@dataclass(frozen=True)
class Interaction:
    name: str
    kind: str  # Property | Action | Event
    semantic_types: tuple[str, ...] = ()
    forms: tuple[Form, ...] = ()
    input_schema: DataSchema | None = None
    output_schema: DataSchema | None = None
    writable: bool = False
    observable: bool = True

    @property
    def value_schema(self) -> DataSchema | None:
        """Schema of a property's value (what a read returns / a write sends)."""
        return self.output_schema or self.input_schema


@dataclass(frozen=True)
class ThingDescription:
    name: str
    base: str
    types: tuple[str, ...]
    interactions: tuple[Interaction, ...]
    warnings: tuple[str, ...] = ()
    text: str | None = field(default=None, compare=False, repr=False)
    prefixes: dict[str, str] = field(default_factory=dict, compare=False, repr=False, hash=False)

    def expand(self, name: str) -> str:
        """Expand a compact name (``iot:Light``) with the document's
        @context prefixes, falling back to the well-known namespaces."""
        if ":" in name:
            pfx, local = name.split(":", 1)
            if pfx in self.prefixes and not local.startswith("//"):
                return self.prefixes[pfx] + local
        return vocab.expand(name)

    @property
    def type_iris(self) -> frozenset[str]:
        return frozenset(self.expand(t) for t in self.types)

    @property
    def scheme(self) -> str:
        m = _SCHEME.match(self.base)
        return m.group(1).lower() if m else ""

    def _of_kind(self, kind):
        return [i for i in self.interactions if i.kind == kind]

    @property
    def properties(self) -> list[Interaction]:
        return self._of_kind("Property")

    @property
    def actions(self) -> list[Interaction]:
        return self._of_kind("Action")

    @property
    def events(self) -> list[Interaction]:
        return self._of_kind("Event")

    def interaction(self, name: str) -> Interaction | None:
        for i in self.interactions:
            if i.name == name:
                return i
        return None


def _as_list(v) -> list:
    if v is None:
        return []
    return list(v) if isinstance(v, list) else [v]


def _parse_schema(raw: Any, path: str) -> DataSchema:
    if not isinstance(raw, dict):
        raise TdError(f"{path}: schema must be an object")
    typ = raw.get("type")
    if typ not in SCHEMA_TYPES:
        raise TdError(f"{path}: unsupported schema type {typ!r}")
    fields = None
    if "properties" in raw or "fields" in raw:
        members = raw.get("properties", raw.get("fields"))
        if not isinstance(members, dict):
            raise TdError(f"{path}: object members must be a map")
        fields = {k: _parse_schema(v, f"{path}.{k}") for k, v in members.items()}
    items = _parse_schema(raw["items"], f"{path}[]") if "items" in raw else None
    return DataSchema(typ, tuple(_as_list(raw.get("@type"))), fields, items)


def _parse_interaction(raw: Any, idx: int, warnings: list[str]) -> Interaction:
    path = f"interaction[{idx}]"
    if not isinstance(raw, dict):
        raise TdError(f"{path}: interaction must be an object")
    name = raw.get("td:name")
    if not isinstance(name, str) or not name:
        raise TdError(f"{path}: missing td:name")
    path = f"interaction[{name!r}]"
    types = _as_list(raw.get("@type"))
    kinds = [KINDS[t] for t in types if t in KINDS]
    if len(kinds) != 1:
        raise TdError(f"{path}: unknown interaction kind (types {types})")
    kind = kinds[0]
    for k in sorted(set(raw) - _INTERACTION_KEYS):
        warnings.append(f"{path}: ignored member {k!r}")

    forms = []
    for j, f in enumerate(_as_list(raw.get("td:form"))):
        if not isinstance(f, dict):
            raise TdError(f"{path}.form[{j}]: form must be an object")
        for k in sorted(set(f) - _FORM_KEYS):
            warnings.append(f"{path}.form[{j}]: ignored member {k!r}")
        forms.append(
            Form(str(f.get("href", "")), tuple(_as_list(f.get("rel"))), f.get("mediaType", "application/json"))
        )
    if not forms:
        raise TdError(f"{path}: interaction without form")

    td_schema = _parse_schema(raw["td:schema"], f"{path}.td:schema") if "td:schema" in raw else None
    inp = _parse_schema(raw["inputSchema"], f"{path}.inputSchema") if "inputSchema" in raw else None
    out = _parse_schema(raw["outputSchema"], f"{path}.outputSchema") if "outputSchema" in raw else None
    if td_schema is not None:
        # td:schema is the action input, or the value of a property/event
        if kind == "Action":
            inp = inp or td_schema
        else:
            out = out or td_schema

    writable = raw.get("writable", raw.get("td:writable", False))
    observable = raw.get("observable", raw.get("td:observable", True))
    return Interaction(
        name=name,
        kind=kind,
        semantic_types=tuple(t for t in types if t not in KINDS),
        forms=tuple(forms),
        input_schema=inp,
        output_schema=out,
        writable=bool(writable),
        observable=bool(observable),
    )


def parse_td(text: str | dict) -> ThingDescription:
    """Parse a TD document (JSON text or an already decoded object)."""
    if isinstance(text, dict):
        doc, raw_text = text, json.dumps(text)
    else:
        raw_text = text
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise TdError(f"not a JSON document: {e}") from e
    if not isinstance(doc, dict):
        raise TdError("TD must be a JSON object")
    warnings: list[str] = []
    name = doc.get("td:name")
    if not isinstance(name, str) or not name:
        raise TdError("missing td:name")
    base = doc.get("td:base")
    if not isinstance(base, str) or not base:
        raise TdError("missing td:base")
    for k in sorted(set(doc) - _TOP_KEYS):
        warnings.append(f"ignored member {k!r}")
    raw_inter = _as_list(doc.get("interaction"))
    if not raw_inter:
        raise TdError("no interactions")
    inter = tuple(_parse_interaction(r, i, warnings) for i, r in enumerate(raw_inter))
    prefixes = {}
    for entry in _as_list(doc.get("@context")):
        if isinstance(entry, dict):
            prefixes.update({k: v for k, v in entry.items() if isinstance(v, str)})
    return ThingDescription(
        name, base, tuple(_as_list(doc.get("@type"))), inter, tuple(warnings), raw_text, prefixes
    )


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    path: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.path}: {self.message}"


def _check_schema(s: DataSchema, path: str, out: list[Diagnostic]):
    if s.type not in SCHEMA_TYPES:
        out.append(Diagnostic("error", path, f"unsupported schema type {s.type!r}"))
    if (s.fields is not None) != (s.type == "object"):
        out.append(Diagnostic("error", path, "fields are required for, and only allowed on, object schemas"))
    for k, sub in (s.fields or {}).items():
        _check_schema(sub, f"{path}.{k}", out)
    if s.items is not None:
        _check_schema(s.items, f"{path}[]", out)


def validate(td: ThingDescription) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    if not td.name:
        out.append(Diagnostic("error", "td:name", "name is empty"))
    if not td.scheme:
        out.append(Diagnostic("error", "td:base", f"base {td.base!r} has no scheme"))
    seen = set()
    for i in td.interactions:
        path = f"interaction[{i.name!r}]"
        if i.name in seen:
            out.append(Diagnostic("error", path, "duplicate interaction name"))
        seen.add(i.name)
        if i.kind not in KINDS.values():
            out.append(Diagnostic("error", path, f"unknown kind {i.kind!r}"))
        if not i.forms:
            out.append(Diagnostic("error", path, "interaction has no form"))
        for j, f in enumerate(i.forms):
            if not f.href:
                out.append(Diagnostic("error", f"{path}.form[{j}]", "empty href"))
        if i.kind == "Property" and not i.writable and not i.observable:
            out.append(
                Diagnostic("warning", path, "property neither readable-observed nor writable is unusable")
            )
        for label, s in (("inputSchema", i.input_schema), ("outputSchema", i.output_schema)):
            if s is not None:
                _check_schema(s, f"{path}.{label}", out)
    return out


def conforms_to(v: Any, s: DataSchema) -> bool:
    t = s.type
    if t == "boolean":
        return isinstance(v, bool)
    if t == "number":
        return isinstance(v, (int, float)) and not isinstance(v, bool)
    if t == "string":
        return isinstance(v, str)
    if t == "array":
        if not isinstance(v, list):
            return False
        return s.items is None or all(conforms_to(x, s.items) for x in v)
    if t == "object":
        if not isinstance(v, dict):
            return False
        if s.fields is None:
            return True
        if set(v) != set(s.fields):
            return False
        return all(conforms_to(v[k], s.fields[k]) for k in s.fields)
    return False


def default_value(s: DataSchema | None):
    """Value sent when an operation needs input but the caller gave none."""
    if s is None:
        return None
    return {
        "boolean": True,
        "number": 0,
        "string": "",
        "array": [],
        "object": {k: default_value(f) for k, f in (s.fields or {}).items()},
    }[s.type]
