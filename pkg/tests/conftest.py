from __future__ import annotations

from pathlib import Path

import pytest

from wotusage.artifact import PredicateTable, Registry
from wotusage.binding import BindingRegistry, sim_binding
from wotusage.sim import World, load_world_file
from wotusage.usage import KnowledgeBase, Manifest, Topology, load_usage_files

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "wotusage" / "fixtures"
CORPUS = FIXTURES / "paper"
SIMPLE = CORPUS / "simple"
SIDE = CORPUS / "sideeffect"
SOS = CORPUS / "sos"
WELCOME = CORPUS / "welcome"

SCHEMES = ("http", "https", "coap", "coaps", "mqtt")


def sim_bindings(world: World, fail_with: int | None = None) -> BindingRegistry:
    br = BindingRegistry()
    b = sim_binding(world, fail_with)
    for s in SCHEMES:
        br.register(s, b)
    return br


def live_registry(world: World) -> tuple[Registry, BindingRegistry]:
    """A registry holding every non-spare device of `world`."""
    br = sim_bindings(world)
    reg = Registry()
    for d in sorted(world.devices.values(), key=lambda d: d.id):
        if not d.spare:
            reg.ingest(d.td, br, d.source_iri)
    return reg, br


def open_world(path: Path, predicates: Path | None = None) -> World:
    table = PredicateTable.load(predicates) if predicates else PredicateTable.default()
    return load_world_file(path, table)


def knowledge(usages, manifest: Path, topology=()) -> KnowledgeBase:
    m = Manifest.load(manifest)
    return KnowledgeBase(load_usage_files(usages, m), Topology.load(*topology) if topology else Topology())


@pytest.fixture
def simple_world():
    return open_world(SIMPLE / "home.world")


@pytest.fixture
def side_world():
    return open_world(SIDE / "kitchen.world", SIDE / "predicates.txt")


# -- acceptance report ------------------------------------------------------

_REPORT: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def add(line: str):
        print(line)
        _REPORT.append(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
