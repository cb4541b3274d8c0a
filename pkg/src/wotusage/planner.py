"""Achievability checks and staged plan search over context graphs.

A stage applies one grounded usage to the current context: the grounded
precondition becomes the WHERE and DELETE templates, the grounded
postcondition the INSERT template. Searching over stages finds a sequence of
operation invocations whose projected context entails the goal.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .errors import ExecutionError, LimitExceeded, NoPlanFound, NotApplicable, WotError
from .rdf import (
    EMPTY,
    IRI,
    BNode,
    Graph,
    Triple,
    Variable,
    apply_update,
    entails,
    instantiate,
    match,
    union,
)
from .semdoc import serialize_ntriples
from .usage import InstanceInfo, KnowledgeBase, UsageDecl, catalog, ground, is_skolem, skolem
from .vocab import IOT

log = logging.getLogger(__name__)

STRATEGIES = ("bfs", "greedy", "subgoal")
DEFAULT_FUNCTIONAL = frozenset(IOT + p for p in ("switchstatus", "status", "currentStatus", "brightness"))


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "bfs"
    max_depth: int = 6
    max_expansions: int = 10000
    functional_predicates: frozenset = DEFAULT_FUNCTIONAL
    use_references: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if self.max_depth < 1 or self.max_expansions < 1:
            raise ValueError("search limits must be positive")
        object.__setattr__(
            self, "functional_predicates", frozenset(p.value if isinstance(p, IRI) else p for p in self.functional_predicates)
        )


@dataclass(frozen=True)
class PlanStep:
    usage_id: str
    instance: str
    artifact_name: str
    operation_name: str
    grounded_pre: Graph
    grounded_post: Graph
    input: Any = None


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]
    projected_final: Graph
    initial: Graph = field(default=EMPTY, compare=False, repr=False)

    def __len__(self):
        return len(self.steps)


@dataclass
class _Action:
    """A usage grounded for one instance, compiled into update templates."""

    usage: UsageDecl
    instance: str
    info: InstanceInfo
    operation: str
    pre: Graph
    post: Graph
    where: list
    insert: list

    @property
    def key(self):
        return (self.usage.label, self.instance)

    def step(self) -> PlanStep:
        return PlanStep(
            self.usage.label, self.instance, self.info.name, self.operation,
            self.pre, self.post, self.info.inputs.get(self.operation),
        )


def _compile(u: UsageDecl, instance: str, use_references: bool) -> tuple[Graph, Graph, list, list]:
    pre, post = ground(u, instance, None, use_references)
    var_of: dict = {}

    def templ(term):
        if isinstance(term, BNode) or is_skolem(term):
            if term not in var_of:
                var_of[term] = Variable(f"v{len(var_of)}")
            return var_of[term]
        return term

    where = [Triple(*(templ(x) for x in t)) for t in pre.sorted()]

    def ins(term):
        if term in var_of:
            return var_of[term]
        if isinstance(term, BNode):
            # side-effect subject with no counterpart in the precondition
            return skolem(u, f"{instance}|{term.value}")
        return term

    insert = [Triple(*(ins(x) for x in t)) for t in post.sorted()]
    return pre, post, where, insert


class Domain:
    """Everything the search needs: usages, placed instances, topology."""

    def __init__(self, usages: Sequence[UsageDecl], instances: dict[str, InstanceInfo], topology: Graph = EMPTY):
        self.usages = sorted(usages, key=lambda u: u.label)
        self.instances = dict(sorted(instances.items()))
        self.topology = topology
        self._compiled: dict = {}

    @classmethod
    def from_registry(cls, reg, kb: KnowledgeBase) -> "Domain":
        return cls(kb.usages, catalog(reg, kb.topology), kb.topology.graph)

    def instances_of(self, u: UsageDecl) -> list[str]:
        types = {a.value for a in u.artifact_types}
        return [iri for iri, info in self.instances.items() if types & info.types]

    def actions(self, use_references: bool = True) -> list[_Action]:
        if use_references not in self._compiled:
            out = []
            for u in self.usages:
                for iri in self.instances_of(u):
                    info = self.instances[iri]
                    op = next((info.operations[t.value] for t in u.operation_types if t.value in info.operations), None)
                    if op is None:
                        log.debug("%s has no operation for %s", iri, u.operation_type.value)
                        continue
                    pre, post, where, insert = _compile(u, iri, use_references)
                    out.append(_Action(u, iri, info, op, pre, post, where, insert))
            self._compiled[use_references] = out
        return self._compiled[use_references]

    def action(self, usage_label: str, instance: str, use_references: bool = True) -> _Action:
        for a in self.actions(use_references):
            if a.key == (usage_label, instance):
                return a
        raise KeyError((usage_label, instance))


# -- single stages ----------------------------------------------------------


def _solutions(state: Graph, where: list) -> list:
    return match(where, state) if where else [{}]


def _transition(state: Graph, where: list, insert: list, functional: frozenset) -> Graph | None:
    sols = _solutions(state, where)
    if not sols:
        return None
    new = apply_update(state, where, insert, where)
    if not functional:
        return new
    # a functional predicate keeps only the freshly inserted value(s)
    fresh: dict = {}
    for b in sols:
        for t in insert:
            r = instantiate(t, b)
            if r is not None and isinstance(r.p, IRI) and r.p.value in functional:
                fresh.setdefault((r.s, r.p), set()).add(r.o)
    stale = [t for t in new if (t.s, t.p) in fresh and t.o not in fresh[(t.s, t.p)]]
    return new.without(stale) if stale else new


def applicable(state: Graph, u: UsageDecl, instance: str, use_references: bool = True) -> bool:
    """The usage has no precondition, or the grounded precondition holds.

    Skolemized shared blanks are matched like blanks, i.e. existentially.
    """
    if u.precond is None:
        return True
    _, _, where, _ = _compile(u, instance, use_references)
    return bool(_solutions(state, where))


def stage_transition(state: Graph, u: UsageDecl, instance: str, cfg: SearchConfig | None = None) -> Graph:
    """Provisional context after invoking `u` on `instance`."""
    cfg = cfg or SearchConfig()
    _, _, where, insert = _compile(u, instance, cfg.use_references)
    new = _transition(state, where, insert, cfg.functional_predicates)
    if new is None:
        raise NotApplicable(f"{u.label} is not applicable to {instance} in this context")
    return new


def replay(initial: Graph, steps: Iterable[PlanStep], usages: Sequence[UsageDecl], cfg: SearchConfig | None = None) -> Graph:
    by_label = {u.label: u for u in usages}
    state = initial
    for s in steps:
        state = stage_transition(state, by_label[s.usage_id], s.instance, cfg)
    return state


# -- goals ------------------------------------------------------------------


def goal_components(goal: Graph) -> list[Graph]:
    """Split a goal into parts that share no blank node."""
    triples = goal.sorted()
    parent = list(range(len(triples)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict = {}
    for i, t in enumerate(triples):
        for x in t:
            if isinstance(x, BNode):
                if x in owner:
                    parent[find(i)] = find(owner[x])
                else:
                    owner[x] = i
    groups: dict = {}
    for i, t in enumerate(triples):
        groups.setdefault(find(i), []).append(t)
    return [Graph(ts) for _, ts in sorted(groups.items())]


def coverage(state: Graph, goal: Graph) -> int:
    """Number of goal triples that hold on their own in `state`."""
    return sum(1 for t in goal if entails(state, Graph([t])))


def directly_achievable(
    goal: Graph, domain: Domain, use_references: bool = True
) -> list[tuple[UsageDecl, str]]:
    """(usage, instance) pairs that can establish some part of the goal,
    preconditions ignored.

    A status tied to the instance (grounded to its IRI) counts when the
    grounded postcondition plus the topology entails a goal part. An untied
    status (blank subject) counts for every instance of the artifact type
    as soon as a goal statement about such an artifact has the same
    predicate and value.
    """
    parts = [c for c in goal_components(goal) if not entails(domain.topology, c)]
    out = []
    for a in domain.actions(use_references):
        premise = union(a.post, domain.topology)
        if any(entails(premise, c) for c in parts) or _untied_match(a, parts, domain):
            out.append((a.usage, a.instance))
    return out


def _untied_match(a: _Action, parts: list[Graph], domain: Domain) -> bool:
    types = {t.value for t in a.usage.artifact_types}
    for t in a.post:
        if not isinstance(t.s, BNode):
            continue
        for part in parts:
            for g in part:
                if g.p != t.p or not (isinstance(t.o, BNode) or g.o == t.o):
                    continue
                if isinstance(g.s, BNode):
                    return True
                info = domain.instances.get(g.s.value) if isinstance(g.s, IRI) else None
                if info is not None and types & info.types:
                    return True
    return False


def _key(state: Graph) -> str:
    return serialize_ntriples(state)


def _plan_from(path: Sequence[_Action], final: Graph, initial: Graph) -> Plan:
    return Plan(tuple(a.step() for a in path), final, initial)


def _bfs(initial: Graph, goal: Graph, domain: Domain, cfg: SearchConfig) -> Plan:
    actions = domain.actions(cfg.use_references)
    frontier = deque([(initial, ())])
    seen = {_key(initial)}
    explored, best = 0, coverage(initial, goal)
    while frontier:
        state, path = frontier.popleft()
        if len(path) >= cfg.max_depth:
            continue
        explored += 1
        if explored > cfg.max_expansions:
            raise LimitExceeded(explored - 1, cfg.max_expansions)
        for a in actions:
            nxt = _transition(state, a.where, a.insert, cfg.functional_predicates)
            if nxt is None:
                continue
            k = _key(nxt)
            if k in seen:
                continue
            seen.add(k)
            if entails(nxt, goal):
                return _plan_from(path + (a,), nxt, initial)
            best = max(best, coverage(nxt, goal))
            frontier.append((nxt, path + (a,)))
    raise NoPlanFound(explored, (best, len(goal)))


def _greedy(initial: Graph, goal: Graph, domain: Domain, cfg: SearchConfig) -> Plan:
    actions = domain.actions(cfg.use_references)
    tie = itertools.count()
    heap = [(-coverage(initial, goal), 0, next(tie), initial, ())]
    seen = {_key(initial)}
    explored, best = 0, -heap[0][0]
    while heap:
        negcov, depth, _, state, path = heapq.heappop(heap)
        if entails(state, goal):
            return _plan_from(path, state, initial)
        if depth >= cfg.max_depth:
            continue
        explored += 1
        if explored > cfg.max_expansions:
            raise LimitExceeded(explored - 1, cfg.max_expansions)
        for a in actions:
            nxt = _transition(state, a.where, a.insert, cfg.functional_predicates)
            if nxt is None:
                continue
            k = _key(nxt)
            if k in seen:
                continue
            seen.add(k)
            cov = coverage(nxt, goal)
            best = max(best, cov)
            heapq.heappush(heap, (-cov, depth + 1, next(tie), nxt, path + (a,)))
    raise NoPlanFound(explored, (best, len(goal)))


def _as_goal(pre: Graph) -> Graph:
    """Turn a grounded precondition into a goal: skolems become blanks."""
    m = {t: BNode("sk" + t.value.rsplit(":", 1)[-1]) for t in pre.terms() if is_skolem(t)}
    return pre.map_terms(m) if m else pre


class _Subgoals:
    def __init__(self, domain: Domain, cfg: SearchConfig):
        self.domain = domain
        self.cfg = cfg
        self.explored = 0

    def achieve(self, state: Graph, part: Graph, budget: int, stack: tuple) -> tuple[Graph, list] | None:
        if entails(state, part):
            return state, []
        if budget <= 0:
            return None
        self.explored += 1
        if self.explored > self.cfg.max_expansions:
            raise LimitExceeded(self.explored - 1, self.cfg.max_expansions)
        fp = self.cfg.functional_predicates
        for u, iri in directly_achievable(part, self.domain, self.cfg.use_references):
            a = self.domain.action(u.label, iri, self.cfg.use_references)
            if a.key in stack:
                continue
            s, steps = state, []
            if not _solutions(s, a.where):
                # chain: first establish this usage's precondition
                r = self.achieve(s, _as_goal(a.pre), budget - 1, stack + (a.key,))
                if r is None:
                    continue
                s, steps = r
            if len(steps) + 1 > budget:
                continue
            s2 = _transition(s, a.where, a.insert, fp)
            if s2 is None:
                continue
            steps = steps + [a]
            if entails(s2, part):
                return s2, steps
            r = self.achieve(s2, part, budget - len(steps), stack + (a.key,))
            if r is not None:
                return r[0], steps + r[1]
        return None


def _subgoal(initial: Graph, goal: Graph, domain: Domain, cfg: SearchConfig) -> Plan:
    solver = _Subgoals(domain, cfg)
    parts = goal_components(goal)
    state, path = initial, []
    for _ in range(cfg.max_depth):
        progressed = False
        for part in parts:
            if entails(state, part):
                continue
            r = solver.achieve(state, part, cfg.max_depth - len(path), ())
            if r is None or not r[1]:
                continue
            state, steps = r
            path.extend(steps)
            progressed = True
        if entails(state, goal) or not progressed:
            break
    # verify the concatenation by replaying it from scratch
    final = initial
    for a in path:
        final = _transition(final, a.where, a.insert, cfg.functional_predicates)
        if final is None:
            break
    if final is None or not entails(final, goal):
        raise NoPlanFound(solver.explored, (coverage(state, goal), len(goal)))
    return _plan_from(path, final, initial)


_SEARCH = {"bfs": _bfs, "greedy": _greedy, "subgoal": _subgoal}


def plan(initial: Graph, goal: Graph, domain: Domain, cfg: SearchConfig | None = None) -> Plan:
    """Find steps that take `initial` to a context entailing `goal`."""
    cfg = cfg or SearchConfig()
    goal = getattr(goal, "graph", goal)
    if not len(goal):
        raise ValueError("goal is empty")
    if entails(initial, goal):
        return Plan((), initial, initial)
    return _SEARCH[cfg.strategy](initial, goal, domain, cfg)


def plan_sequence(initial: Graph, goals: Sequence[Graph], domain: Domain, cfg: SearchConfig | None = None) -> list[Plan]:
    """Plan each goal from the projected end state of the previous one."""
    plans, state = [], initial
    for idx, g in enumerate(goals):
        try:
            p = plan(state, g, domain, cfg)
        except NoPlanFound as e:
            raise NoPlanFound(e.explored, e.coverage, at_index=idx) from e
        plans.append(p)
        state = p.projected_final
    return plans


# -- execution and output ---------------------------------------------------


def execute(p: Plan, reg, on_step=None) -> list:
    """Invoke each step through the artifact registry. Stops at the first
    failure with an ExecutionError naming the step."""
    results = []
    for idx, s in enumerate(p.steps):
        try:
            r = reg.act(s.artifact_name, s.operation_name, s.input)
        except WotError as e:
            raise ExecutionError(f"step {idx + 1} ({s.artifact_name}.{s.operation_name}) failed: {e}", idx, e) from e
        results.append(r)
        if on_step is not None:
            on_step(idx, s, r)
    return results


def format_plan(p: Plan, show_final: bool = False) -> str:
    lines = [
        f"step {n}: usage {s.usage_id} instance {s.instance} operation {s.operation_name}"
        for n, s in enumerate(p.steps, 1)
    ]
    if not lines:
        lines.append("goal already holds; nothing to do")
    out = "\n".join(lines) + "\n"
    if show_final:
        out += "# projected final context\n" + serialize_ntriples(p.projected_final)
    return out
