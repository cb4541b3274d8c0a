"""Random small smart homes for checking the planner against brute force.

Usages are drawn from a pool that is faithful to the simulator: the
postcondition of each one is exactly what the device does when the
operation is invoked, so an executed plan must reach its goal. Every
condition blank carries the artifact's reference marker, so grounding
always ties it to the invoked instance.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from wotusage.artifact import PredicateTable
from wotusage.planner import DEFAULT_FUNCTIONAL, SearchConfig
from wotusage.rdf import IRI, BNode, Graph, Literal, Triple
from wotusage.sim import World
from wotusage.usage import KnowledgeBase, Topology, load_usages
from wotusage.vocab import IOT

from oracles import brute_entails

BOT = "http://www.w3id.org/bot#"
USG = "http://www.emse.fr/ci/ontologies/2018/wot_usage#"
RDF_TYPE = IRI("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")
REF = IRI("http://localhost/tools/referencedBy")
ZONE = IRI("http://localhost/rand#zone")
HAS_ELEMENT = IRI(BOT + "hasElement")

# kind -> (thing type, status property type, predicate, property schema,
#          {operation type: value after the operation})
KINDS = {
    "light": ("Light", "SwitchStatus", "switchstatus", "boolean", {"SwitchOn": "on", "SwitchOff": "off"}),
    "curtain": ("Curtain", "CurtainStatus", "currentStatus", "boolean", {"Open": "open", "Close": "closed"}),
    "thermal": (
        "Heater", "ThermalMode", "thermalMode", "string",
        {"StartHeating": "heating", "StartCooling": "cooling", "StopThermal": "idle"},
    ),
}
VALUES = {k: sorted(set(v[4].values())) for k, v in KINDS.items()}
SIM_VALUE = {"on": True, "off": False, "open": True, "closed": False}


def td_text(kind: str, idx: int) -> str:
    thing, status, _, schema, ops = KINDS[kind]
    inter = [{
        "td:name": "Status",
        "@type": ["td:Property", f"iot:{status}"],
        "td:schema": {"type": schema},
        "td:form": [{"href": "/status", "rel": ["readtd:Property"], "mediaType": "application/json"}],
    }]
    for op in ops:
        inter.append({
            "td:name": op,
            "@type": ["td:Action", f"iot:{op}"],
            "td:form": [{"href": f"/{op}", "rel": ["invoketd:Action"], "mediaType": "application/json"}],
        })
    return json.dumps({
        "@context": [{"iot": IOT}],
        "@type": ["td:Thing", f"iot:{thing}"],
        "td:base": f"http://rand.example/d{idx}",
        "td:name": f"d{idx}",
        "interaction": inter,
    })


@dataclass(frozen=True)
class UsageSpec:
    kind: str
    op: str
    pre_value: str | None  # required current status, if any


@dataclass
class Case:
    world: World
    kb: KnowledgeBase
    goal: Graph
    devices: dict = field(default_factory=dict)  # iri -> kind, placed devices only
    specs: list = field(default_factory=list)
    cfg: SearchConfig = None


def _status_graph(pred: str, value: str, marker: IRI) -> Graph:
    b = BNode("dev")
    return Graph([Triple(b, IRI(IOT + pred), Literal(value)), Triple(b, REF, marker)])


def usage_graph(specs: list[UsageSpec]) -> tuple[Graph, dict]:
    """The usage description graph and its context documents."""
    triples, docs = [], {}
    for n, s in enumerate(specs):
        thing, _, pred, _, ops = KINDS[s.kind]
        u, art, op = BNode(f"u{n}"), BNode(f"a{n}"), BNode(f"o{n}")
        marker = IRI(f"http://localhost/tools/artifact{n}")
        post = IRI(f"http://localhost/rand/post{n}")
        triples += [
            Triple(u, RDF_TYPE, IRI(USG + "Usage")),
            Triple(u, IRI(USG + "hasPostcond"), post),
            Triple(u, IRI(USG + "forArtifact"), art),
            Triple(u, IRI(USG + "forOperation"), op),
            Triple(art, RDF_TYPE, IRI(IOT + thing)),
            Triple(art, IRI(USG + "hasOperation"), op),
            Triple(art, REF, marker),
            Triple(op, RDF_TYPE, IRI(IOT + s.op)),
        ]
        docs[post] = _status_graph(pred, ops[s.op], marker)
        if s.pre_value is not None:
            pre = IRI(f"http://localhost/rand/pre{n}")
            triples.append(Triple(u, IRI(USG + "hasPrecond"), pre))
            docs[pre] = _status_graph(pred, s.pre_value, marker)
    return Graph(triples), docs


def make_case(rng: random.Random) -> Case:
    n_dev = rng.randint(1, 5)
    kinds = [rng.choice(sorted(KINDS)) for _ in range(n_dev)]
    world = World(PredicateTable.default())
    placed = {}
    topo = [Triple(ZONE, RDF_TYPE, IRI(BOT + "Zone"))]
    start = {}
    for i, kind in enumerate(kinds):
        iri = f"http://rand.example/td/d{i}"
        value = rng.choice(VALUES[kind])
        start[iri] = value
        world.add_device(f"d{i}", td_text(kind, i), iri, init={"Status": SIM_VALUE.get(value, value)})
        # most devices are placed in the zone; an unplaced one is invisible to planning
        if rng.random() < 0.85:
            placed[iri] = kind
            topo.append(Triple(ZONE, HAS_ELEMENT, IRI(iri)))
    if not placed:
        placed["http://rand.example/td/d0"] = kinds[0]
        topo.append(Triple(ZONE, HAS_ELEMENT, IRI("http://rand.example/td/d0")))

    pool = []
    for kind in sorted(set(kinds)):
        for op in KINDS[kind][4]:
            pool.append(UsageSpec(kind, op, None))
            for v in VALUES[kind]:
                if v != KINDS[kind][4][op]:
                    pool.append(UsageSpec(kind, op, v))
    specs = rng.sample(pool, min(len(pool), rng.randint(3, 8)))
    g, docs = usage_graph(specs)
    usages = load_usages(g, lambda iri: docs[iri])
    kb = KnowledgeBase(usages, Topology(Graph(topo)))

    goal = []
    chosen = rng.sample(sorted(set(placed) | {f"http://rand.example/td/d{i}" for i in range(n_dev)}),
                        k=min(n_dev, rng.randint(1, 3)))
    for k, iri in enumerate(chosen):
        kind = kinds[int(iri.rsplit("d", 1)[1])]
        pred = IRI(IOT + KINDS[kind][2])
        # mostly ask for a change, so that plans are not trivially empty
        others = [v for v in VALUES[kind] if v != start[iri]]
        value = Literal(rng.choice(others) if rng.random() < 0.8 else start[iri])
        if rng.random() < 0.25:
            b = BNode(f"g{k}")
            goal += [Triple(ZONE, HAS_ELEMENT, b), Triple(b, pred, value)]
        else:
            goal.append(Triple(IRI(iri), pred, value))
    cfg = SearchConfig(
        "bfs", max_depth=3, max_expansions=100000,
        functional_predicates=DEFAULT_FUNCTIONAL | {IOT + "thermalMode"},
    )
    return Case(world, kb, Graph(goal), placed, specs, cfg)


# -- independent search ----------------------------------------------------


def oracle_actions(case: Case) -> list[tuple[int, str]]:
    out = []
    for n, s in enumerate(case.specs):
        for iri, kind in sorted(case.devices.items()):
            if kind == s.kind:
                out.append((n, iri))
    return out


def oracle_step(state: frozenset, spec: UsageSpec, iri: str) -> frozenset | None:
    _, _, pred, _, ops = KINDS[spec.kind]
    s, p = IRI(iri), IRI(IOT + pred)
    if spec.pre_value is not None and Triple(s, p, Literal(spec.pre_value)) not in state:
        return None
    kept = {t for t in state if not (t.s == s and t.p == p)}
    return frozenset(kept | {Triple(s, p, Literal(ops[spec.op]))})


def oracle_min_length(case: Case, initial: Graph, depth: int = 3) -> int | None:
    """Length of the shortest plan by exhaustive enumeration, or None."""
    acts = oracle_actions(case)
    frontier = {frozenset(initial)}
    seen = set(frontier)
    for d in range(depth + 1):
        if any(brute_entails(Graph(s), case.goal) for s in frontier):
            return d
        nxt = set()
        for s in frontier:
            for n, iri in acts:
                r = oracle_step(s, case.specs[n], iri)
                if r is not None and r not in seen:
                    seen.add(r)
                    nxt.add(r)
        frontier = nxt
    return None
