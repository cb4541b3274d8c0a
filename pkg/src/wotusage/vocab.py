"""Namespaces used across the package."""

from .rdf import IRI

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
IOT = "http://iotschema.org/"
USG = "http://www.emse.fr/ci/ontologies/2018/wot_usage#"
TOOLS = "http://localhost/tools/"
BOT = "http://www.w3id.org/bot#"
SH = "http://localhost/smart_home#"
SKOLEM = "urn:wotusage:skolem:"

PREFIXES = {"rdf": RDF, "iot": IOT, "usg": USG, "tools": TOOLS, "bot": BOT, "sh": SH}

RDF_TYPE = IRI(RDF + "type")

USAGE = IRI(USG + "Usage")
HAS_PRECOND = IRI(USG + "hasPrecond")
HAS_POSTCOND = IRI(USG + "hasPostcond")
FOR_ARTIFACT = IRI(USG + "forArtifact")
FOR_OPERATION = IRI(USG + "forOperation")
HAS_OPERATION = IRI(USG + "hasOperation")
REFERENCED_BY = IRI(TOOLS + "referencedBy")

BOT_ZONE = IRI(BOT + "Zone")
CONTAINS_ZONE = IRI(BOT + "containsZone")
HAS_ELEMENT = IRI(BOT + "hasElement")


def expand(name: str) -> str:
    """`iot:Light` -> full IRI; full IRIs pass through."""
    if ":" in name:
        pfx, local = name.split(":", 1)
        if pfx in PREFIXES and not local.startswith("//"):
            return PREFIXES[pfx] + local
    return name
