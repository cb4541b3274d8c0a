import pytest

from conftest import SIDE, SIMPLE, live_registry
from wotusage import vocab
from wotusage.errors import TypeMismatch, ValidationError
from wotusage.rdf import IRI, BNode, Graph, Literal, Triple
from wotusage.usage import (
    KnowledgeBase, Manifest, Topology, catalog, current_context, ground, instances_of, is_skolem,
    load_usage_files, load_usages, read_graph,
)

IOT = "http://iotschema.org/"
USG = vocab.USG
CEILING = "http://localhost/TD/smart_home/kitchen/ceilingLight.jsonld"
EMERGENCY = "http://localhost/TD/smart_home/kitchen/emergencyLight.jsonld"
LIGHT1 = "http://localhost/TD/smart_home/kitchen/light1.jsonld"


def simple_usages(ref=True):
    suffix = "-ref" if ref else ""
    return load_usage_files([SIMPLE / f"usage{suffix}.ttl"], Manifest.load(SIMPLE / f"manifest{suffix}.tsv"))


def test_usage_declaration():
    (u,) = simple_usages()
    assert u.label == "_:switchOnUsage"
    assert u.artifact_type == IRI(IOT + "Light")
    assert u.operation_type == IRI(IOT + "SwitchOn")
    assert u.artifact_ref == IRI("http://localhost/tools/lightArtifact1")
    assert u.precond.graph == Graph([Triple(BNode("lightArtifact"), IRI(IOT + "switchstatus"), Literal("off"))])


def test_manifest_entries_are_expanded():
    m = Manifest.load(SIMPLE / "manifest.tsv")
    assert "http://localhost/tools/lightOnContext" in m.entries
    with pytest.raises(KeyError):
        m(IRI("http://localhost/tools/none"))


@pytest.mark.parametrize(
    "prop,axiom",
    [
        ("hasPostcond", "postcond"),
        ("forArtifact", "forArtifact"),
        ("forOperation", "forOperation"),
        ("hasOperation", "hasOperation"),
    ],
)
def test_missing_mandatory_link(prop, axiom):
    g = read_graph(SIMPLE / "usage.ttl")
    mutated = g.without(g.by_predicate(IRI(USG + prop)))
    with pytest.raises(ValidationError) as e:
        load_usages(mutated, Manifest.load(SIMPLE / "manifest.tsv"))
    assert e.value.axiom == axiom
    assert axiom in str(e.value)


def test_duplicate_postcond_is_rejected():
    g = read_graph(SIMPLE / "usage.ttl")
    u = BNode("switchOnUsage")
    extra = Triple(u, IRI(USG + "hasPostcond"), IRI("http://localhost/tools/lightOffContext"))
    with pytest.raises(ValidationError, match="more than one"):
        load_usages(g.with_([extra]), Manifest.load(SIMPLE / "manifest.tsv"))


def test_usage_link_on_non_usage_violates_domain():
    g = read_graph(SIMPLE / "usage.ttl")
    bad = Triple(IRI("http://e/x"), IRI(USG + "forArtifact"), BNode("lightArtifact"))
    with pytest.raises(ValidationError) as e:
        load_usages(g.with_([bad]), Manifest.load(SIMPLE / "manifest.tsv"))
    assert e.value.axiom == "domain:forArtifact"


def test_unresolvable_context_violates_range():
    with pytest.raises(ValidationError) as e:
        load_usages(read_graph(SIMPLE / "usage.ttl"), Manifest())
    assert e.value.axiom.startswith("range:")


def test_ground_ties_referenced_blanks_to_the_instance():
    (u,) = simple_usages()
    pre, post = ground(u, CEILING)
    on = Triple(IRI(CEILING), IRI(IOT + "switchstatus"), Literal("on"))
    assert post == Graph([on])
    assert not pre.blank_nodes()


def test_ground_without_references_is_identity():
    (u,) = simple_usages()
    pre, post = ground(u, CEILING, use_references=False)
    assert post == u.postcond.graph and pre == u.precond.graph


def test_ground_checks_the_artifact_type():
    (u,) = simple_usages()
    with pytest.raises(TypeMismatch):
        ground(u, CEILING, [IOT + "Curtain"])


def test_side_effect_blank_stays_blank():
    usages = load_usage_files([SIDE / "usages.ttl"], Manifest.load(SIDE / "manifest.tsv"))
    off = next(u for u in usages if u.label == "_:switchOffUsage")
    _, post = ground(off, LIGHT1)
    assert Triple(BNode("kitchen"), IRI(IOT + "brightness"), Literal("low")) in post
    assert Triple(IRI(LIGHT1), IRI(IOT + "switchstatus"), Literal("off")) in post


def test_shared_unrelated_reference_becomes_one_skolem():
    pre_doc = Graph([
        Triple(BNode("z"), IRI(IOT + "brightness"), Literal("low")),
        Triple(BNode("z"), vocab.REFERENCED_BY, IRI("http://localhost/tools/room")),
    ])
    post_doc = Graph([
        Triple(BNode("w"), IRI(IOT + "brightness"), Literal("high")),
        Triple(BNode("w"), vocab.REFERENCED_BY, IRI("http://localhost/tools/room")),
    ])
    g = read_graph(SIMPLE / "usage.ttl")
    docs = {"http://localhost/tools/lightOffContext": pre_doc, "http://localhost/tools/lightOnContext": post_doc}
    (u,) = load_usages(g, lambda iri: docs[iri.value])
    pre, post = ground(u, CEILING)
    (sp,) = pre
    (sq,) = post
    assert is_skolem(sp.s) and sp.s == sq.s


def test_instances_follow_the_topology(simple_world):
    reg, _ = live_registry(simple_world)
    one = Topology.load(SIMPLE / "topology.ttl")
    two = Topology.load(SIMPLE / "topology-two.ttl")
    assert instances_of(reg, one, IOT + "Light") == [CEILING]
    assert instances_of(reg, two, IOT + "Light") == [CEILING, EMERGENCY]
    assert set(instances_of(reg, Topology(), IOT + "Light")) >= {CEILING, EMERGENCY}
    info = catalog(reg, one)[CEILING]
    assert info.operations[IOT + "SwitchOn"] == "Switch On"
    assert info.inputs["Switch On"] is True


def test_topology_cycle_is_invalid():
    a, b = IRI("http://e/a"), IRI("http://e/b")
    with pytest.raises(ValidationError):
        Topology(Graph([Triple(a, vocab.CONTAINS_ZONE, b), Triple(b, vocab.CONTAINS_ZONE, a)]))


def test_current_context_reproduces_the_listing(simple_world):
    reg, _ = live_registry(simple_world)
    ctx = current_context(reg, None, [simple_world.ambient])
    assert ctx == read_graph(SIMPLE / "context.ttl")


def test_knowledge_base_without():
    kb = KnowledgeBase.load([SIDE / "usages.ttl"], Manifest.load(SIDE / "manifest.tsv"), [SIDE / "topology.ttl"])
    assert len(kb.usages) == 3
    assert [u.label for u in kb.without("_:curtainOpenUsage").usages] == ["_:switchOffUsage", "_:switchOnUsage"]
