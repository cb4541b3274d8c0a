"""Goal-driven use of Web of Things devices through generic artifacts and
semantic usage descriptions."""

from .artifact import ArtifactInstance, PredicateTable, Registry, export_context, instantiate
from .binding import BindingRegistry, HttpBinding, SimBinding, Verb, dispatch, resolve
from .errors import WotError
from .planner import Domain, Plan, PlanStep, SearchConfig, applicable, directly_achievable, plan, plan_sequence
from .rdf import IRI, BNode, Graph, Literal, Triple, Variable, apply_update, entails, match, union
from .semdoc import parse_ntriples, parse_turtle, serialize_ntriples
from .sim import World, load_world, serve_http
from .td import ThingDescription, parse_td, validate
from .usage import KnowledgeBase, Manifest, Topology, UsageDecl, current_context, ground, load_usages

__version__ = "0.1.0"

__all__ = [
    "ArtifactInstance", "BNode", "BindingRegistry", "Domain", "Graph", "HttpBinding", "IRI",
    "KnowledgeBase", "Literal", "Manifest", "Plan", "PlanStep", "PredicateTable", "Registry",
    "SearchConfig", "SimBinding", "ThingDescription", "Topology", "Triple", "UsageDecl",
    "Variable", "Verb", "World", "WotError", "applicable", "apply_update", "current_context",
    "directly_achievable", "dispatch", "entails", "export_context", "ground", "instantiate",
    "load_usages", "load_world", "match", "parse_ntriples", "parse_td", "parse_turtle", "plan",
    "plan_sequence", "resolve", "serialize_ntriples", "serve_http", "union", "validate",
]
