"""Minimal RDF substrate: terms, triples, immutable graphs, basic graph
pattern matching, simple entailment and DELETE/INSERT/WHERE updates.

Graphs here are small (tens of triples), so everything is plain backtracking
over a predicate index.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Union

from .errors import GraphError, PatternError, UpdateError

_WS = re.compile(r"\s")


@dataclass(frozen=True, slots=True)
class IRI:
    value: str

    def __post_init__(self):
        if not self.value or _WS.search(self.value):
            raise GraphError(f"invalid IRI {self.value!r}")

    def sort_key(self):
        return (0, self.value, "")

    def __str__(self):
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class BNode:
    value: str

    def sort_key(self):
        return (1, self.value, "")

    def __str__(self):
        return f"_:{self.value}"


@dataclass(frozen=True, slots=True)
class Literal:
    value: str
    datatype: str = "string"  # string | boolean | number

    def __post_init__(self):
        if self.datatype not in ("string", "boolean", "number"):
            raise GraphError(f"unknown literal datatype {self.datatype!r}")

    @classmethod
    def of(cls, v) -> "Literal":
        if isinstance(v, bool):
            return cls("true" if v else "false", "boolean")
        if isinstance(v, (int, float)):
            return cls(json.dumps(v), "number")
        if isinstance(v, str):
            return cls(v)
        raise TypeError(f"no literal form for {type(v).__name__}")

    def to_python(self):
        if self.datatype == "boolean":
            return self.value == "true"
        if self.datatype == "number":
            return json.loads(self.value)
        return self.value

    def sort_key(self):
        return (2, self.value, self.datatype)

    def __str__(self):
        if self.datatype == "string":
            return json.dumps(self.value, ensure_ascii=False)
        return self.value


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def sort_key(self):
        return (3, self.name, "")

    def __str__(self):
        return f"?{self.name}"


Term = Union[IRI, BNode, Literal, Variable]
Binding = dict  # variable name -> non-variable Term


class Triple(NamedTuple):
    s: Term
    p: Term
    o: Term

    def sort_key(self):
        return (self.s.sort_key(), self.p.sort_key(), self.o.sort_key())

    def __str__(self):
        return f"{self.s} {self.p} {self.o} ."


def is_legal(t: Triple) -> bool:
    """True when `t` is a well-formed RDF triple (variables not counted)."""
    return isinstance(t.s, (IRI, BNode, Variable)) and isinstance(t.p, (IRI, Variable))


def has_variable(t: Triple) -> bool:
    return isinstance(t.s, Variable) or isinstance(t.p, Variable) or isinstance(t.o, Variable)


class Graph:
    """Immutable set of variable-free triples."""

    __slots__ = ("_triples", "name", "_by_pred", "_hash")

    def __init__(self, triples: Iterable[Triple] = (), name: IRI | None = None):
        ts = frozenset(Triple(*t) for t in triples)
        for t in ts:
            if not is_legal(t):
                raise GraphError(f"illegal triple {t}")
            if has_variable(t):
                raise GraphError(f"variables are not allowed in a graph: {t}")
        self._triples = ts
        self.name = name
        self._by_pred = None
        self._hash = None

    @property
    def triples(self) -> frozenset:
        return self._triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __len__(self):
        return len(self._triples)

    def __contains__(self, t):
        return t in self._triples

    def __eq__(self, other):
        if isinstance(other, Graph):
            return self._triples == other._triples
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._triples)
        return self._hash

    def __or__(self, other: "Graph") -> "Graph":
        return union(self, other)

    def __repr__(self):
        return f"Graph({len(self)} triples)"

    def sorted(self) -> list[Triple]:
        return sorted(self._triples, key=Triple.sort_key)

    def by_predicate(self, p: Term) -> list[Triple]:
        if self._by_pred is None:
            idx: dict = {}
            for t in self._triples:
                idx.setdefault(t.p, []).append(t)
            self._by_pred = idx
        return self._by_pred.get(p, [])

    def blank_nodes(self) -> set[BNode]:
        out = set()
        for t in self._triples:
            for term in t:
                if isinstance(term, BNode):
                    out.add(term)
        return out

    def terms(self) -> set:
        return {term for t in self._triples for term in t}

    def objects(self, s: Term, p: Term) -> list[Term]:
        return sorted((t.o for t in self.by_predicate(p) if t.s == s), key=lambda x: x.sort_key())

    def subjects(self, p: Term, o: Term) -> list[Term]:
        return sorted((t.s for t in self.by_predicate(p) if t.o == o), key=lambda x: x.sort_key())

    def value(self, s: Term, p: Term) -> Term | None:
        objs = self.objects(s, p)
        return objs[0] if objs else None

    def without(self, triples: Iterable[Triple]) -> "Graph":
        return Graph(self._triples - set(triples), self.name)

    def with_(self, triples: Iterable[Triple]) -> "Graph":
        return Graph(self._triples | set(triples), self.name)

    def map_terms(self, mapping: dict) -> "Graph":
        """Substitute terms (typically blank nodes) according to `mapping`."""
        return Graph((substitute(t, mapping) for t in self._triples), self.name)


EMPTY = Graph()


def substitute(t: Triple, mapping: dict) -> Triple:
    return Triple(mapping.get(t.s, t.s), mapping.get(t.p, t.p), mapping.get(t.o, t.o))


# -- matching ---------------------------------------------------------------


def _pattern_var(term: Term):
    """Key under which a pattern term is bound, or None for constants."""
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, BNode):
        return "_:" + term.value
    return None


def _check_pattern(pattern: Iterable[Triple]) -> list[Triple]:
    out = []
    for t in pattern:
        t = Triple(*t)
        if isinstance(t.s, Literal) or isinstance(t.p, Literal):
            raise PatternError(f"literal in subject or predicate position: {t}")
        out.append(t)
    return out


def _solve(pattern: list[Triple], data: Graph) -> Iterator[dict]:
    """Yield every full assignment (variables and pattern blanks) that maps
    each pattern triple onto a data triple."""

    def bound_count(t: Triple, asg: dict) -> int:
        n = 0
        for term in t:
            k = _pattern_var(term)
            if k is None or k in asg:
                n += 1
        return n

    def resolve(term, asg):
        k = _pattern_var(term)
        if k is None:
            return term
        return asg.get(k)

    def step(remaining: list[Triple], asg: dict):
        if not remaining:
            yield asg
            return
        # most constrained triple first
        best = max(range(len(remaining)), key=lambda i: bound_count(remaining[i], asg))
        t = remaining[best]
        rest = remaining[:best] + remaining[best + 1 :]
        s, p, o = (resolve(x, asg) for x in t)
        candidates = data.by_predicate(p) if p is not None else data.triples
        for d in candidates:
            if s is not None and d.s != s:
                continue
            if o is not None and d.o != o:
                continue
            new = asg
            ok = True
            for pt, dt in zip(t, d):
                k = _pattern_var(pt)
                if k is None:
                    continue
                cur = new.get(k)
                if cur is None:
                    if new is asg:
                        new = dict(asg)
                    new[k] = dt
                elif cur != dt:
                    ok = False
                    break
            if ok:
                yield from step(rest, new)

    yield from step(pattern, {})


def _binding_key(b: dict):
    return tuple((k, b[k].sort_key()) for k in sorted(b))


def match(pattern: Iterable[Triple], data: Graph) -> list[Binding]:
    """All solutions of a basic graph pattern over `data`.

    Blank nodes in the pattern act as variables that are not projected.
    An empty pattern has exactly one (empty) solution.
    """
    pat = _check_pattern(pattern)
    seen = {}
    for asg in _solve(pat, data):
        b = {k: v for k, v in asg.items() if not k.startswith("_:")}
        seen.setdefault(_binding_key(b), b)
    return [seen[k] for k in sorted(seen)]


def entailment_witness(premise: Graph, conclusion: Graph) -> dict | None:
    """A blank-node mapping that makes `conclusion` a subgraph of `premise`,
    or None when `premise` does not simply-entail `conclusion`."""
    ground, open_ = [], []
    for t in conclusion:
        (open_ if any(isinstance(x, BNode) for x in t) else ground).append(t)
    if any(t not in premise for t in ground):
        return None
    if not open_:
        return {}
    for asg in _solve(open_, premise):
        return {BNode(k[2:]): v for k, v in asg.items()}
    return None


def entails(premise: Graph, conclusion: Graph) -> bool:
    return entailment_witness(premise, conclusion) is not None


def _fresh_label(base: str, taken: set[str]) -> str:
    n = 1
    while f"{base}_{n}" in taken:
        n += 1
    return f"{base}_{n}"


def union(g1: Graph, g2: Graph) -> Graph:
    """Set union. Blank labels of `g2` that collide with `g1` are renamed."""
    if not len(g2):
        return g1
    if not len(g1):
        return g2
    taken = {b.value for b in g1.blank_nodes()}
    clash = [b for b in g2.blank_nodes() if b.value in taken]
    if clash:
        taken |= {b.value for b in g2.blank_nodes()}
        mapping = {}
        for b in sorted(clash, key=lambda x: x.value):
            label = _fresh_label(b.value, taken)
            taken.add(label)
            mapping[b] = BNode(label)
        g2 = g2.map_terms(mapping)
    return Graph(g1.triples | g2.triples, g1.name)


def union_all(graphs: Iterable[Graph]) -> Graph:
    out = EMPTY
    for g in graphs:
        out = union(out, g)
    return out


# -- updates ----------------------------------------------------------------


def instantiate(t: Triple, b: Binding, blank_map: dict | None = None) -> Triple | None:
    """Apply a solution to a template triple. Returns None when the result
    still has an unbound variable or is not a legal RDF triple."""
    out = []
    for term in t:
        if isinstance(term, Variable):
            term = b.get(term.name)
            if term is None:
                return None
        elif isinstance(term, BNode) and blank_map is not None:
            term = blank_map[term]
        out.append(term)
    r = Triple(*out)
    return r if is_legal(r) else None


def apply_update(
    state: Graph,
    delete: Iterable[Triple] = (),
    insert: Iterable[Triple] = (),
    where: Iterable[Triple] = (),
) -> Graph:
    """DELETE {delete} INSERT {insert} WHERE {where} over `state`.

    Every solution of `where` is computed against the input graph; the union
    of instantiated delete triples is removed, then the union of instantiated
    insert triples is added. Template triples that end up with an unbound
    variable or an illegal shape are skipped. Blank nodes in the insert
    template become fresh blank nodes per solution.
    """
    delete = [Triple(*t) for t in delete]
    insert = [Triple(*t) for t in insert]
    for t in delete:
        if any(isinstance(x, BNode) for x in t):
            raise UpdateError(f"blank nodes are not allowed in a DELETE template: {t}")
    solutions = match(where, state)

    insert_blanks = sorted({x for t in insert for x in t if isinstance(x, BNode)}, key=lambda b: b.value)
    taken = {b.value for b in state.blank_nodes()}

    removed, added = set(), set()
    for b in solutions:
        for t in delete:
            r = instantiate(t, b)
            if r is not None:
                removed.add(r)
        blank_map = {}
        for bn in insert_blanks:
            label = _fresh_label(bn.value, taken)
            taken.add(label)
            blank_map[bn] = BNode(label)
        for t in insert:
            r = instantiate(t, b, blank_map)
            if r is not None:
                added.add(r)
    return Graph((state.triples - removed) | added, state.name)
