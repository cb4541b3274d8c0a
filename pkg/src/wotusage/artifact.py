"""The generic artifact: any Thing Description becomes an instance with a
uniform interface (observable properties, an operation map keyed by action
name, an event map), kept in a registry that supports hot replacement."""

from __future__ import annotations

import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .binding import BindingRegistry, Verb, decode, dispatch, resolve
from .errors import (
    ArtifactError,
    InstantiationError,
    NameMismatch,
    NotReadable,
    SchemaMismatch,
    TdError,
    TransportError,
    UnknownArtifact,
    UnknownEvent,
    UnknownOperation,
    UnknownProperty,
    WotError,
)
from .rdf import IRI, Graph, Literal, Triple
from .td import Form, Interaction, ThingDescription, conforms_to, validate
from .vocab import IOT, expand

log = logging.getLogger(__name__)


# -- predicate table --------------------------------------------------------


@dataclass(frozen=True)
class PredicateRule:
    predicate: str
    true_literal: str | None = None
    false_literal: str | None = None

    def render(self, value: Any) -> Literal:
        if isinstance(value, bool) and self.true_literal is not None:
            return Literal(self.true_literal if value else self.false_literal)
        return Literal.of(value)

    def parse(self, lit: Literal) -> Any:
        if self.true_literal is not None and lit.datatype == "string":
            if lit.value == self.true_literal:
                return True
            if lit.value == self.false_literal:
                return False
        return lit.to_python()


class PredicateTable:
    """Maps a property's semantic type to the predicate used for it in
    context graphs, plus the literals that stand for true/false.

    File format, one rule per line::

        semanticTypeIRI predicateIRI trueLiteral falseLiteral

    Compact ``iot:`` names are accepted; ``-`` leaves the literals unset.
    """

    def __init__(self, rules: dict[str, PredicateRule] | None = None):
        self.rules = dict(rules or {})

    @classmethod
    def parse(cls, text: str) -> "PredicateTable":
        rules = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 4):
                raise ValueError(f"predicate table line {n}: expected 2 or 4 fields, got {len(parts)}")
            t, p = expand(parts[0]), expand(parts[1])
            tl = fl = None
            if len(parts) == 4 and parts[2] != "-":
                tl, fl = parts[2], parts[3]
            rules[t] = PredicateRule(p, tl, fl)
        return cls(rules)

    @classmethod
    def load(cls, path: str | Path) -> "PredicateTable":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "PredicateTable":
        return cls.load(Path(__file__).parent / "fixtures" / "predicates.txt")

    def rule_for(self, td: ThingDescription, prop: Interaction) -> PredicateRule | None:
        # first iot: semantic type that has a rule
        for t in prop.semantic_types:
            iri = td.expand(t)
            if iri.startswith(IOT) and iri in self.rules:
                return self.rules[iri]
        return None


# -- runtime entities -------------------------------------------------------


@dataclass
class ObservableProperty:
    interaction: Interaction
    value: Any = None
    stale: bool = True

    @property
    def observable(self):
        return self.interaction.observable

    @property
    def writable(self):
        return self.interaction.writable


@dataclass(frozen=True)
class OperationHandle:
    interaction: Interaction
    form: Form


@dataclass(frozen=True)
class EventRecord:
    event_name: str
    payload: Any = None
    timestamp: float = 0.0


class EventChannel:
    """Thread-safe FIFO of EventRecords; many producers, one draining consumer."""

    def __init__(self, interaction: Interaction):
        self.interaction = interaction
        self._q: deque[EventRecord] = deque()
        self._lock = threading.Lock()

    def put(self, rec: EventRecord):
        with self._lock:
            self._q.append(rec)

    def drain(self) -> list[EventRecord]:
        with self._lock:
            out = list(self._q)
            self._q.clear()
        return out


@dataclass
class ArtifactInstance:
    td: ThingDescription
    bindings: BindingRegistry
    source_iri: str
    observable_props: dict[str, ObservableProperty] = field(default_factory=dict)
    operations: dict[str, OperationHandle] = field(default_factory=dict)
    events: dict[str, EventChannel] = field(default_factory=dict)
    generation: int = 1

    @property
    def name(self) -> str:
        return self.td.name

    @property
    def type_iris(self) -> frozenset[str]:
        return self.td.type_iris

    @property
    def binding(self):
        return self.bindings.get(self.td.scheme)

    def operation_for(self, semantic_type: str) -> str | None:
        """Name of the first action annotated with `semantic_type` (full IRI)."""
        for name, h in self.operations.items():
            if any(self.td.expand(t) == semantic_type for t in h.interaction.semantic_types):
                return name
        return None

    def summary(self) -> str:
        lines = [f"artifact {self.name} (generation {self.generation})", f"  source: {self.source_iri}"]
        lines.append(f"  types: {', '.join(sorted(self.td.types))}")
        lines.append(f"  operations: {', '.join(self.operations) or '-'}")
        lines.append(f"  properties: {', '.join(self.observable_props) or '-'}")
        lines.append(f"  events: {', '.join(self.events) or '-'}")
        return "\n".join(lines)


def _read(inst: ArtifactInstance, prop: Interaction):
    req = resolve(inst.td.base, prop, verb=Verb.READ)
    return dispatch(inst.bindings, req, prop.value_schema)


def instantiate(td: ThingDescription, bindings: BindingRegistry, source_iri: str | None = None) -> ArtifactInstance:
    """Project `td` onto a new artifact instance.

    Observable properties get an initial read. If any of them fails, an
    InstantiationError is raised that still carries the (usable) instance,
    with the failed properties left stale.
    """
    errors = [d for d in validate(td) if d.severity == "error"]
    if errors:
        raise TdError("; ".join(str(d) for d in errors))
    bindings.get(td.scheme)  # NoBindingError early
    inst = ArtifactInstance(td, bindings, source_iri or td.base)
    for i in td.interactions:
        if i.kind == "Property":
            inst.observable_props[i.name] = ObservableProperty(i)
        elif i.kind == "Action":
            inst.operations[i.name] = OperationHandle(i, i.forms[0])
        else:
            inst.events[i.name] = EventChannel(i)
    failures: dict[str, Exception] = {}
    for name, op in inst.observable_props.items():
        if not op.observable:
            continue
        try:
            op.value = _read(inst, op.interaction)
            op.stale = False
        except WotError as e:
            failures[name] = e
    if failures:
        raise InstantiationError(inst, failures)
    return inst


class Registry:
    """Artifact instances by name.

    Mutations (add/replace/remove) are serialized; calls on instances take a
    snapshot of the current instance first, so an invocation that races a
    replace finishes against the device it started with.
    """

    def __init__(self):
        self._items: dict[str, ArtifactInstance] = {}
        self._lock = threading.RLock()

    def __contains__(self, name):
        return name in self._items

    def __len__(self):
        return len(self._items)

    def names(self) -> list[str]:
        return sorted(self._items)

    def instances(self) -> list[ArtifactInstance]:
        with self._lock:
            return [self._items[n] for n in sorted(self._items)]

    def get(self, name: str) -> ArtifactInstance:
        try:
            return self._items[name]
        except KeyError:
            raise UnknownArtifact(f"no artifact named {name!r}") from None

    def by_source(self, iri: str) -> ArtifactInstance | None:
        for inst in self.instances():
            if inst.source_iri == iri:
                return inst
        return None

    def generation(self, name: str) -> int:
        return self.get(name).generation

    def add(self, inst: ArtifactInstance) -> ArtifactInstance:
        with self._lock:
            if inst.name in self._items:
                raise ArtifactError(f"artifact {inst.name!r} already exists; use replace")
            self._items[inst.name] = inst
        return inst

    def ingest(self, td: ThingDescription, bindings: BindingRegistry, source_iri: str | None = None) -> ArtifactInstance:
        """instantiate + add. Failed initial reads only leave properties stale."""
        with self._lock:
            if td.name in self._items:
                raise ArtifactError(f"artifact {td.name!r} already exists; use replace")
            try:
                inst = instantiate(td, bindings, source_iri)
            except InstantiationError as e:
                log.warning("%s", e)
                inst = e.instance
            return self.add(inst)

    def remove(self, name: str) -> ArtifactInstance:
        with self._lock:
            inst = self.get(name)
            del self._items[name]
            return inst

    def replace(
        self, name: str, new_td: ThingDescription, bindings: BindingRegistry, source_iri: str | None = None
    ) -> ArtifactInstance:
        if new_td.name != name:
            raise NameMismatch(f"new TD is named {new_td.name!r}, expected {name!r}")
        with self._lock:
            old = self.get(name)
            try:
                inst = instantiate(new_td, bindings, source_iri or old.source_iri)
            except InstantiationError as e:
                log.warning("%s", e)
                inst = e.instance
            inst.generation = old.generation + 1
            self._items[name] = inst
            return inst

    # -- uniform usage interface --

    def act(self, artifact: str, action: str, value: Any = None):
        inst = self.get(artifact)
        handle = inst.operations.get(action)
        if handle is None:
            raise UnknownOperation(artifact, action, list(inst.operations))
        schema = handle.interaction.input_schema
        if schema is not None and value is not None and not conforms_to(value, schema):
            raise SchemaMismatch(f"{artifact}.{action}: input {value!r} does not match {schema.type}")
        req = resolve(inst.td.base, handle.interaction, value, Verb.INVOKE)
        return dispatch(inst.bindings, req, handle.interaction.output_schema)

    def _prop(self, inst: ArtifactInstance, prop: str) -> ObservableProperty:
        op = inst.observable_props.get(prop)
        if op is None:
            raise UnknownProperty(f"{inst.name!r} has no property {prop!r}")
        return op

    def read_property(self, artifact: str, prop: str):
        inst = self.get(artifact)
        op = self._prop(inst, prop)
        if not op.observable:
            raise NotReadable(f"{artifact}.{prop} is not observable")
        try:
            value = _read(inst, op.interaction)
        except WotError:
            op.stale = True
            raise
        op.value, op.stale = value, False
        return value

    def write_property(self, artifact: str, prop: str, value: Any):
        inst = self.get(artifact)
        op = self._prop(inst, prop)
        if not op.writable:
            raise ArtifactError(f"{artifact}.{prop} is not writable")
        schema = op.interaction.value_schema
        if schema is not None and not conforms_to(value, schema):
            raise SchemaMismatch(f"{artifact}.{prop}: value {value!r} does not match {schema.type}")
        req = resolve(inst.td.base, op.interaction, value, Verb.WRITE)
        return dispatch(inst.bindings, req)

    def poll_events(self, artifact: str, event: str) -> list[EventRecord]:
        inst = self.get(artifact)
        ch = inst.events.get(event)
        if ch is None:
            raise UnknownEvent(f"{artifact!r} has no event {event!r}")
        req = resolve(inst.td.base, ch.interaction, verb=Verb.READ)
        status, body = inst.bindings.get(req.scheme).invoke(req.target, req.verb, None, req.media_type)
        if not 200 <= status < 300:
            raise TransportError(status, req.target)
        for item in decode(body, req.media_type) or []:
            ch.put(EventRecord(event, item.get("payload"), float(item.get("timestamp", 0.0))))
        return ch.drain()


def export_context(
    reg: Registry, table: PredicateTable | None = None, refresh: bool = True, warnings: list[str] | None = None
) -> Graph:
    """Context graph of everything the registry can observe: one triple per
    readable property, subject = the IRI the artifact's TD came from."""
    table = table or PredicateTable.default()
    warnings = warnings if warnings is not None else []
    triples = []
    for inst in reg.instances():
        for name, op in inst.observable_props.items():
            if not op.observable:
                continue
            rule = table.rule_for(inst.td, op.interaction)
            if rule is None:
                continue
            if refresh:
                try:
                    reg.read_property(inst.name, name)
                except WotError as e:
                    warnings.append(f"{inst.name}.{name}: {e}")
            if op.stale:
                warnings.append(f"{inst.name}.{name}: stale, omitted")
                continue
            triples.append(Triple(IRI(inst.source_iri), IRI(rule.predicate), rule.render(op.value)))
    for w in warnings:
        log.debug("export_context: %s", w)
    return Graph(triples)


def describe(inst: ArtifactInstance) -> dict:
    return {
        "name": inst.name,
        "generation": inst.generation,
        "source": inst.source_iri,
        "operations": list(inst.operations),
        "properties": {k: v.value for k, v in inst.observable_props.items()},
        "events": list(inst.events),
    }
