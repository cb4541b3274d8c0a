"""Usage knowledge base.

A usage says: operation type O of artifact type A, when the environment
matches the precondition context, leaves it matching the postcondition
context. Contexts are separate graph documents named by IRI. Blank nodes in
conditions that carry ``tools:referencedBy`` with the same target denote the
same thing across documents; that is how a status gets tied to the specific
instance whose operation is invoked.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from . import vocab
from .errors import FetchError, ParseError, TypeMismatch, ValidationError
from .rdf import EMPTY, IRI, BNode, Graph, Literal, Term, union_all
from .semdoc import fetch, parse_turtle
from .vocab import (
    CONTAINS_ZONE,
    FOR_ARTIFACT,
    FOR_OPERATION,
    HAS_ELEMENT,
    HAS_OPERATION,
    HAS_POSTCOND,
    HAS_PRECOND,
    RDF_TYPE,
    REFERENCED_BY,
    SKOLEM,
    USAGE,
)

log = logging.getLogger(__name__)


def term_label(t: Term) -> str:
    return f"_:{t.value}" if isinstance(t, BNode) else t.value


@dataclass(frozen=True)
class ContextRef:
    iri: IRI
    graph: Graph  # status statements only
    references: dict = field(default_factory=dict, compare=False, hash=False)  # BNode -> IRI

    def __hash__(self):
        return hash((self.iri, self.graph))


def split_references(g: Graph) -> tuple[Graph, dict]:
    """Separate ``tools:referencedBy`` annotations from status triples."""
    refs, statuses = {}, []
    for t in g:
        if t.p == REFERENCED_BY:
            if isinstance(t.s, BNode) and isinstance(t.o, IRI):
                refs[t.s] = t.o
        else:
            statuses.append(t)
    return Graph(statuses), refs


def context_from_graph(iri: IRI, g: Graph) -> ContextRef:
    statuses, refs = split_references(g)
    if not len(statuses):
        raise ValidationError("context-status", "a context needs at least one status statement", iri.value)
    return ContextRef(iri, statuses, refs)


@dataclass(frozen=True)
class UsageDecl:
    id: Term
    artifact_node: Term
    artifact_types: tuple[IRI, ...]
    operation_node: Term
    operation_types: tuple[IRI, ...]
    postcond: ContextRef
    precond: ContextRef | None = None
    artifact_ref: IRI | None = None

    @property
    def label(self) -> str:
        return term_label(self.id)

    @property
    def artifact_type(self) -> IRI:
        return self.artifact_types[0]

    @property
    def operation_type(self) -> IRI:
        return self.operation_types[0]

    def __str__(self):
        return self.label


Resolver = Callable[[IRI], Graph]


def _one(g: Graph, s: Term, p: IRI, axiom: str, what: str, required: bool = True) -> Term | None:
    objs = g.objects(s, p)
    if not objs:
        if required:
            raise ValidationError(axiom, f"{what} required", term_label(s))
        return None
    if len(objs) > 1:
        raise ValidationError(axiom, f"more than one {what}", term_label(s))
    return objs[0]


def _types(g: Graph, node: Term) -> tuple[IRI, ...]:
    return tuple(t for t in g.objects(node, RDF_TYPE) if isinstance(t, IRI))


def _context(g_iri: Term, resolver: Resolver, prop: str, usage: Term) -> ContextRef:
    if not isinstance(g_iri, IRI):
        raise ValidationError(f"range:{prop}", f"{prop} must name a context document by IRI", term_label(usage))
    try:
        graph = resolver(g_iri)
    except (KeyError, FetchError, ParseError, OSError) as e:
        raise ValidationError(f"range:{prop}", f"cannot resolve context {g_iri.value}: {e}", term_label(usage)) from e
    return context_from_graph(g_iri, graph)


def load_usages(g: Graph, resolver: Resolver) -> list[UsageDecl]:
    """Extract and validate every ``usg:Usage`` in `g`.

    Raises ValidationError naming the violated axiom: ``postcond``,
    ``forArtifact``, ``forOperation``, ``hasOperation``, ``context-status``,
    or a ``domain:``/``range:`` constraint of the usage vocabulary.
    """
    usage_nodes = set(g.subjects(RDF_TYPE, USAGE))
    # domain checks: only usages may carry usage links
    for p, name in ((HAS_PRECOND, "hasPrecond"), (HAS_POSTCOND, "hasPostcond"),
                    (FOR_ARTIFACT, "forArtifact"), (FOR_OPERATION, "forOperation")):
        for t in g.by_predicate(p):
            if t.s not in usage_nodes:
                raise ValidationError(f"domain:{name}", f"subject of {name} is not a usg:Usage", term_label(t.s))
            if isinstance(t.o, Literal):
                raise ValidationError(f"range:{name}", f"{name} cannot point at a literal", term_label(t.s))

    out = []
    for u in sorted(usage_nodes, key=lambda x: x.sort_key()):
        post_iri = _one(g, u, HAS_POSTCOND, "postcond", "postcond")
        art = _one(g, u, FOR_ARTIFACT, "forArtifact", "forArtifact")
        op = _one(g, u, FOR_OPERATION, "forOperation", "forOperation")
        art_types = _types(g, art)
        if not art_types:
            raise ValidationError("range:forArtifact", "artifact node has no rdf:type", term_label(u))
        op_types = _types(g, op)
        if not op_types:
            raise ValidationError("range:forOperation", "operation node has no rdf:type", term_label(u))
        if op not in g.objects(art, HAS_OPERATION):
            raise ValidationError(
                "hasOperation", "the artifact node must have the usage's operation (usg:hasOperation)", term_label(u)
            )
        pre_iri = _one(g, u, HAS_PRECOND, "precond", "precond", required=False)
        ref = g.value(art, REFERENCED_BY)
        out.append(
            UsageDecl(
                id=u,
                artifact_node=art,
                artifact_types=art_types,
                operation_node=op,
                operation_types=op_types,
                postcond=_context(post_iri, resolver, "hasPostcond", u),
                precond=_context(pre_iri, resolver, "hasPrecond", u) if pre_iri is not None else None,
                artifact_ref=ref if isinstance(ref, IRI) else None,
            )
        )
    return out


# -- context documents ------------------------------------------------------


class Manifest:
    """Context IRI -> document location. Text format: ``contextIRI<TAB>path``
    per line; prefixed IRIs (``tools:x``) and relative paths are allowed."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries = dict(entries or {})
        self._cache: dict[str, Graph] = {}

    @classmethod
    def parse(cls, text: str, base_dir: str | Path = ".") -> "Manifest":
        entries = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise ParseError("manifest lines are 'contextIRI<TAB>path'", n, 1)
            iri, loc = (p.strip() for p in parts)
            iri = vocab.expand(iri.strip("<>"))
            if "://" not in loc:
                loc = str(Path(base_dir) / loc)
            entries[iri] = loc
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), path.parent)

    def merge(self, other: "Manifest") -> "Manifest":
        return Manifest({**self.entries, **other.entries})

    def resolve(self, iri: IRI) -> Graph:
        if iri.value not in self._cache:
            loc = self.entries.get(iri.value)
            if loc is None:
                raise KeyError(f"context {iri.value} is not in the manifest")
            self._cache[iri.value] = parse_turtle(fetch(loc), vocab.PREFIXES)[0]
        return self._cache[iri.value]

    __call__ = resolve


def read_graph(ref: str | Path) -> Graph:
    """Turtle/N-Triples document with the well-known prefixes pre-declared."""
    return parse_turtle(fetch(str(ref)), vocab.PREFIXES)[0]


def load_usage_files(paths: Iterable[str | Path], resolver: Resolver) -> list[UsageDecl]:
    usages = []
    for p in paths:
        usages.extend(load_usages(read_graph(p), resolver))
    return usages


# -- grounding --------------------------------------------------------------


def skolem(usage: UsageDecl, key: str) -> IRI:
    h = hashlib.sha1(f"{usage.label}|{key}".encode()).hexdigest()[:16]
    return IRI(SKOLEM + h)


def is_skolem(t: Term) -> bool:
    return isinstance(t, IRI) and t.value.startswith(SKOLEM)


def grounding_map(u: UsageDecl, instance: IRI) -> dict:
    """Blank -> term replacements for both condition graphs (pre map, post map)."""
    pre_refs = u.precond.references if u.precond else {}
    post_refs = u.postcond.references
    shared = set(pre_refs.values()) & set(post_refs.values())

    def for_graph(refs: dict) -> dict:
        m = {}
        for b, target in refs.items():
            if u.artifact_ref is not None and target == u.artifact_ref:
                m[b] = instance
            elif target in shared:
                m[b] = skolem(u, target.value)
        return m

    return {"pre": for_graph(pre_refs), "post": for_graph(post_refs)}


def ground(
    u: UsageDecl, instance: IRI | str, instance_types: Iterable[IRI | str] | None = None, use_references: bool = True
) -> tuple[Graph, Graph]:
    """Grounded (precondition, postcondition) of `u` for `instance`.

    Blanks referenced like the usage's artifact become `instance`; blanks
    whose reference is shared by both conditions become one skolem IRI per
    reference; everything else is left as is. With `use_references` off the
    graphs come back untouched.
    """
    instance = IRI(instance) if isinstance(instance, str) else instance
    if instance_types is not None:
        types = {t.value if isinstance(t, IRI) else t for t in instance_types}
        if not any(a.value in types for a in u.artifact_types):
            raise TypeMismatch(f"{instance.value} is not a {u.artifact_type.value}")
    pre = u.precond.graph if u.precond else EMPTY
    post = u.postcond.graph
    if not use_references:
        return pre, post
    m = grounding_map(u, instance)
    return pre.map_terms(m["pre"]), post.map_terms(m["post"])


def self_subjects(u: UsageDecl) -> set[BNode]:
    """Post-condition blanks that stand for the instance itself."""
    if u.artifact_ref is None:
        return set()
    return {b for b, t in u.postcond.references.items() if t == u.artifact_ref}


# -- topology and instances -------------------------------------------------


class Topology:
    def __init__(self, graph: Graph = EMPTY):
        self.graph = graph
        self._check_acyclic()

    def _check_acyclic(self):
        children: dict = {}
        for t in self.graph.by_predicate(CONTAINS_ZONE):
            children.setdefault(t.s, []).append(t.o)
        state: dict = {}

        def visit(z, path):
            if state.get(z) == 1:
                raise ValidationError("topology", "bot:containsZone has a cycle", term_label(z))
            if state.get(z) == 2:
                return
            state[z] = 1
            for c in children.get(z, []):
                visit(c, path + [z])
            state[z] = 2

        for z in list(children):
            visit(z, [])

    @classmethod
    def load(cls, *refs) -> "Topology":
        return cls(union_all(read_graph(r) for r in refs))

    def elements(self) -> set[str]:
        return {t.o.value for t in self.graph.by_predicate(HAS_ELEMENT) if isinstance(t.o, IRI)}

    def zone_of(self, element: str) -> list[str]:
        return sorted(t.s.value for t in self.graph.by_predicate(HAS_ELEMENT) if t.o == IRI(element))


@dataclass(frozen=True)
class InstanceInfo:
    iri: str
    name: str
    types: frozenset[str]
    operations: dict = field(default_factory=dict, hash=False, compare=False)  # op type IRI -> op name
    inputs: dict = field(default_factory=dict, hash=False, compare=False)  # op name -> default input


def catalog(reg, topo: Topology | None) -> dict[str, InstanceInfo]:
    """Instances that are both registered and placed in the topology."""
    from .td import default_value

    # an empty topology places nothing, so it restricts nothing
    elements = topo.elements() if topo is not None else None
    elements = elements or None
    out = {}
    for inst in reg.instances():
        if elements is not None and inst.source_iri not in elements:
            continue
        ops, inputs = {}, {}
        for name, h in inst.operations.items():
            for t in h.interaction.semantic_types:
                ops.setdefault(inst.td.expand(t), name)
            inputs[name] = default_value(h.interaction.input_schema)
        out[inst.source_iri] = InstanceInfo(inst.source_iri, inst.name, inst.type_iris, ops, inputs)
    return dict(sorted(out.items()))


def instances_of(reg, topo: Topology | None, artifact_type: IRI | str) -> list[str]:
    t = artifact_type.value if isinstance(artifact_type, IRI) else artifact_type
    return sorted(iri for iri, info in catalog(reg, topo).items() if t in info.types)


def current_context(reg, topo: Topology | None = None, extra: Iterable[Graph] = (), table=None) -> Graph:
    from .artifact import export_context

    parts = [export_context(reg, table) if reg is not None else EMPTY]
    if topo is not None:
        parts.append(topo.graph)
    parts.extend(extra)
    return union_all(parts)


@dataclass
class KnowledgeBase:
    """Usages plus the topology they are applied in."""

    usages: list[UsageDecl] = field(default_factory=list)
    topology: Topology = field(default_factory=Topology)

    @classmethod
    def load(cls, usage_paths: Iterable, manifest: Manifest, topology_paths: Iterable = ()) -> "KnowledgeBase":
        tps = list(topology_paths)
        return cls(load_usage_files(usage_paths, manifest), Topology.load(*tps) if tps else Topology())

    def without(self, label: str) -> "KnowledgeBase":
        return KnowledgeBase([u for u in self.usages if u.label != label], self.topology)
