"""Command-line entry point.

State that must survive between commands (ingested artifacts, loaded
usages, topology and context documents, the simulated world and its device
states) lives in a JSON workspace file, written only when a command
succeeds. Exit codes: 0 success, 2 no plan, 3 parse or validation error,
4 binding or transport error, 5 execution failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import vocab
from .artifact import PredicateTable, Registry, describe
from .binding import BindingRegistry, http_binding, sim_binding
from .errors import (
    ArtifactError,
    BindError,
    BindingError,
    ExecutionError,
    FetchError,
    GraphError,
    LimitExceeded,
    NoPlanFound,
    ParseError,
    PatternError,
    ScriptError,
    TdError,
    TypeMismatch,
    UnknownDevice,
    UpdateError,
    ValidationError,
    WorldSpecError,
    WotError,
)
from .planner import STRATEGIES, Domain, SearchConfig, execute, format_plan, plan
from .rdf import EMPTY, BNode, Graph, IRI, Literal, entails, union_all
from .scenario import Runtime, load_script, run_script
from .semdoc import fetch, serialize_ntriples
from .sim import World, documents_from_dir, load_world_file, serve_http
from .td import parse_td
from .usage import KnowledgeBase, Manifest, Topology, current_context, load_usage_files, read_graph

log = logging.getLogger("wotusage")

ENV_WORKSPACE = "WOTUSAGE_WORKSPACE"
ENV_MANIFEST = "WOTUSAGE_MANIFEST"
DEFAULT_WORKSPACE = ".wotusage.json"
SIM_SCHEMES = ("http", "https", "coap", "coaps", "mqtt")

EXIT_OK, EXIT_NO_PLAN, EXIT_INVALID, EXIT_BINDING, EXIT_EXECUTION = 0, 2, 3, 4, 5


def exit_code(e: Exception) -> int:
    if isinstance(e, ExecutionError):
        return EXIT_EXECUTION
    if isinstance(e, (NoPlanFound, LimitExceeded)):
        return EXIT_NO_PLAN
    if isinstance(e, (BindingError, FetchError, BindError)):
        return EXIT_BINDING
    if isinstance(
        e,
        (ParseError, TdError, ValidationError, WorldSpecError, UnknownDevice, TypeMismatch, ScriptError,
         GraphError, PatternError, UpdateError, ArtifactError),
    ):
        return EXIT_INVALID
    return 1


# -- workspace --------------------------------------------------------------


def _abs(ref: str | None) -> str | None:
    if ref is None or "://" in ref or ref.startswith("device:"):
        return ref
    return str(Path(ref).resolve())


@dataclass
class Workspace:
    path: Path | None = None
    world: str | None = None
    world_state: dict = field(default_factory=dict)
    clock: int = 0
    predicates: str | None = None
    authorities: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)  # {name, source, iri, generation}
    usages: list = field(default_factory=list)
    manifest: str | None = None
    topology: list = field(default_factory=list)
    context: list = field(default_factory=list)

    _FIELDS = ("world", "world_state", "clock", "predicates", "authorities", "artifacts",
               "usages", "manifest", "topology", "context")

    @classmethod
    def open(cls, path: str | None) -> "Workspace":
        p = Path(path or os.environ.get(ENV_WORKSPACE) or DEFAULT_WORKSPACE)
        ws = cls(p)
        if p.exists():
            try:
                data = json.loads(p.read_text(encoding="utf-8"))
            except ValueError as e:
                raise ParseError(f"workspace {p} is not JSON: {e}") from e
            for k in cls._FIELDS:
                if k in data:
                    setattr(ws, k, data[k])
        return ws

    def save(self):
        if self.path is None:
            return
        data = {k: getattr(self, k) for k in self._FIELDS}
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        tmp.replace(self.path)


class Session:
    """Live objects rebuilt from a workspace plus command-line overrides."""

    def __init__(self, ws: Workspace, args: argparse.Namespace | None = None):
        self.ws = ws
        over = vars(args) if args is not None else {}
        pred = over.get("predicates") or ws.predicates
        self.table = PredicateTable.load(pred) if pred else PredicateTable.default()
        world_ref = over.get("world") or ws.world
        self.world: World | None = None
        same_world = not over.get("world") or _abs(over["world"]) == ws.world
        if world_ref:
            self.world = load_world_file(world_ref, self.table)
            if same_world:
                self._restore_world()
        self.bindings = BindingRegistry()
        if self.world is not None:
            sim = sim_binding(self.world)
            schemes = set(SIM_SCHEMES) | {d.td.scheme for d in self.world.devices.values()}
            for s in sorted(schemes):
                self.bindings.register(s, sim)
        else:
            self.bindings.register("http", http_binding(authorities=ws.authorities))
            self.bindings.register("https", http_binding(authorities=ws.authorities))
        self.registry = Registry()
        for entry in ws.artifacts:
            if entry["source"].startswith("device:") and not same_world:
                log.warning("skipping %s: it names a device of another world", entry["name"])
                continue
            td, iri = self.load_td(entry["source"], entry.get("iri"))
            inst = self.registry.ingest(td, self.bindings, iri)
            inst.generation = entry.get("generation", 1)
        if self.world is not None:
            for d in sorted(self.world.devices.values(), key=lambda d: d.id):
                if not d.spare and d.td.name not in self.registry:
                    self.registry.ingest(d.td, self.bindings, d.source_iri)

        manifest_ref = over.get("manifest") or ws.manifest or os.environ.get(ENV_MANIFEST)
        self.manifest = Manifest.load(manifest_ref) if manifest_ref else Manifest()
        usage_refs = over.get("usages") or ws.usages
        topo_refs = over.get("topology") or ws.topology
        usages = load_usage_files(usage_refs, self.manifest) if usage_refs else []
        if topo_refs:
            topo = Topology.load(*topo_refs)
        elif self.world is not None:
            topo = Topology(self.world.topology)
        else:
            topo = Topology()
        self.kb = KnowledgeBase(usages, topo)
        ctx_refs = over.get("context") or ws.context
        self.extra = union_all(read_graph(r) for r in ctx_refs) if ctx_refs else EMPTY

    def _restore_world(self):
        for dev, state in self.ws.world_state.items():
            if dev in self.world.devices:
                self.world.devices[dev].state.update(state)
        self.world.clock = self.ws.clock

    def remember_world(self):
        if self.world is not None and self.ws.world is not None:
            self.ws.world_state = self.world.snapshot()
            self.ws.clock = self.world.clock

    def load_td(self, source: str, iri: str | None = None):
        if source.startswith("device:"):
            if self.world is None:
                raise WorldSpecError(f"{source} needs a simulated world (--world)")
            d = self.world.device(source[len("device:"):])
            return d.td, iri or d.source_iri
        td = parse_td(fetch(source))
        if iri is None:
            iri = source if "://" in source else td.base
        return td, iri

    def context(self) -> Graph:
        extra = [self.extra]
        if self.world is not None:
            extra.append(self.world.ambient)
        return current_context(self.registry, self.kb.topology, extra, self.table)

    def search_config(self, args) -> SearchConfig:
        return SearchConfig(
            strategy=args.strategy,
            max_depth=args.max_depth,
            max_expansions=args.max_expansions,
            use_references=not args.no_references,
        )


# -- output helpers ---------------------------------------------------------


def _compact(term) -> str:
    if isinstance(term, IRI):
        for p, ns in sorted(vocab.PREFIXES.items(), key=lambda kv: -len(kv[1])):
            if term.value.startswith(ns) and term.value != ns:
                return f"{p}:{term.value[len(ns):]}"
        return f"<{term.value}>"
    if isinstance(term, BNode):
        return f"_:{term.value}"
    if isinstance(term, Literal):
        return str(term)
    return str(term)


def format_graph(g: Graph, fmt: str) -> str:
    if fmt == "ntriples":
        return serialize_ntriples(g)
    rows = [tuple(_compact(x) for x in t) for t in g.sorted()]
    if not rows:
        return "(empty graph)\n"
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "".join(f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]}\n" for r in rows)


def _print(out, text: str):
    out.write(text if text.endswith("\n") else text + "\n")


# -- commands ---------------------------------------------------------------


def cmd_ingest_td(s: Session, args, out) -> int:
    td, iri = s.load_td(args.source, args.iri)
    if td.name in s.registry and all(a["name"] != td.name for a in s.ws.artifacts):
        # only auto-ingested from the world so far; an explicit ingest takes over
        s.registry.remove(td.name)
    inst = s.registry.ingest(td, s.bindings, iri)
    s.ws.artifacts = [a for a in s.ws.artifacts if a["name"] != td.name]
    s.ws.artifacts.append({"name": td.name, "source": _abs(args.source), "iri": iri, "generation": 1})
    for w in td.warnings:
        log.warning("%s: %s", args.source, w)
    _print(out, inst.summary())
    return EXIT_OK


def cmd_replace_device(s: Session, args, out) -> int:
    td, iri = s.load_td(args.source, args.iri)
    old = s.registry.get(args.name)
    inst = s.registry.replace(args.name, td, s.bindings, iri if args.iri else old.source_iri)
    s.ws.artifacts = [a for a in s.ws.artifacts if a["name"] != args.name]
    s.ws.artifacts.append(
        {"name": args.name, "source": _abs(args.source), "iri": inst.source_iri, "generation": inst.generation}
    )
    _print(out, inst.summary())
    return EXIT_OK


def cmd_artifacts(s: Session, args, out) -> int:
    if args.format == "json":
        _print(out, json.dumps([describe(i) for i in s.registry.instances()], indent=2, default=str))
        return EXIT_OK
    for inst in s.registry.instances():
        _print(out, inst.summary())
    return EXIT_OK


def cmd_act(s: Session, args, out) -> int:
    value = json.loads(args.input) if args.input is not None else None
    result = s.registry.act(args.name, args.operation, value)
    _print(out, json.dumps(getattr(result, "status", result)))
    s.remember_world()
    return EXIT_OK


def cmd_read(s: Session, args, out) -> int:
    _print(out, json.dumps(s.registry.read_property(args.name, args.property)))
    return EXIT_OK


def cmd_context_load(s: Session, args, out) -> int:
    g = union_all(read_graph(r) for r in args.files)
    s.ws.context = s.ws.context + [_abs(r) for r in args.files]
    _print(out, f"loaded {len(g)} context triple(s)")
    return EXIT_OK


def cmd_context_show(s: Session, args, out) -> int:
    out.write(format_graph(s.context(), args.format))
    return EXIT_OK


def cmd_topology_load(s: Session, args, out) -> int:
    topo = Topology.load(*(s.ws.topology + args.files))
    s.ws.topology = s.ws.topology + [_abs(r) for r in args.files]
    _print(out, f"topology: {len(topo.elements())} element(s)")
    return EXIT_OK


def cmd_usages_load(s: Session, args, out) -> int:
    manifest = s.manifest
    if args.manifest:
        s.ws.manifest = _abs(args.manifest)
    usages = load_usage_files(args.files, manifest)
    s.ws.usages = s.ws.usages + [_abs(r) for r in args.files]
    for u in usages:
        _print(out, f"usage {u.label}: {_compact(u.operation_type)} on {_compact(u.artifact_type)}")
    return EXIT_OK


def cmd_plan(s: Session, args, out) -> int:
    goal = read_graph(args.goal)
    cfg = s.search_config(args)
    initial = s.context()
    domain = Domain.from_registry(s.registry, s.kb)
    p = plan(initial, goal, domain, cfg)
    out.write(format_plan(p, args.show_final))
    if args.execute:
        execute(p, s.registry, lambda i, st, r: _print(out, f"executed step {i + 1}"))
        final = s.context()
        s.remember_world()
        if not entails(final, goal):
            raise ExecutionError("plan executed but the goal does not hold in the observed context")
        _print(out, "goal holds after execution")
    return EXIT_OK


def cmd_scenario_run(s: Session, args, out) -> int:
    for pair in args.replace or []:
        name, _, dev = pair.partition("=")
        if not dev:
            raise ScriptError(f"--replace expects NAME=DEVICE, got {pair!r}")
        td, _ = s.load_td(f"device:{dev}")
        s.registry.replace(name, td, s.bindings)
    script = load_script(args.script)
    rt = Runtime(s.registry, s.kb, s.world, s.table, s.search_config(args), s.extra)
    runner = run_script(script, rt)
    for line in runner.trace:
        _print(out, line)
    s.remember_world()
    if runner.failures:
        raise ExecutionError(f"{len(runner.failures)} event handler run(s) failed")
    return EXIT_OK


def cmd_sim_serve(s: Session, args, out) -> int:
    if s.world is None:
        raise WorldSpecError("sim serve needs --world")
    docs = documents_from_dir(args.docs) if args.docs else {}
    with serve_http(s.world, args.port, docs, args.host) as srv:
        _print(out, f"serving {len(s.world.devices)} device(s) at {srv.url}")
        out.flush()
        try:
            if args.duration is not None:
                time.sleep(args.duration)
            else:
                while True:
                    time.sleep(3600)
        except KeyboardInterrupt:
            pass
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _search_flags(p: argparse.ArgumentParser):
    p.add_argument("--strategy", choices=STRATEGIES, default="bfs")
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--max-expansions", type=int, default=10000)
    p.add_argument("--no-references", action="store_true", help="ignore tools:referencedBy when grounding")


def _kb_flags(p: argparse.ArgumentParser):
    p.add_argument("--usages", nargs="+", metavar="FILE")
    p.add_argument("--topology", nargs="+", metavar="FILE")
    p.add_argument("--context", nargs="+", metavar="FILE")
    p.add_argument("--manifest", metavar="FILE", help=f"context manifest (default: ${ENV_MANIFEST})")
    p.add_argument("--world", metavar="FILE", help="run against a simulated world")
    p.add_argument("--predicates", metavar="FILE", help="property type -> predicate table")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wotusage", description="Goal-driven use of Web of Things devices.")
    ap.add_argument("--workspace", help=f"state file (default: ${ENV_WORKSPACE} or {DEFAULT_WORKSPACE})")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def world_flags(p):
        p.add_argument("--world", metavar="FILE")
        p.add_argument("--predicates", metavar="FILE")

    p = sub.add_parser("ingest-td", help="instantiate an artifact from a TD")
    p.add_argument("source", help="TD file, URL, or device:<id> of the simulated world")
    p.add_argument("--iri", help="IRI the artifact is known by in topology and context")
    p.add_argument("--authority", action="append", metavar="HOST=HOST:PORT", help="redirect HTTP targets")
    world_flags(p)
    p.set_defaults(func=cmd_ingest_td)

    p = sub.add_parser("replace-device", help="hot-swap the TD behind an artifact")
    p.add_argument("name")
    p.add_argument("source")
    p.add_argument("--iri")
    world_flags(p)
    p.set_defaults(func=cmd_replace_device)

    p = sub.add_parser("artifacts", help="list artifacts")
    p.add_argument("--format", choices=("table", "json"), default="table")
    world_flags(p)
    p.set_defaults(func=cmd_artifacts)

    p = sub.add_parser("act", help="invoke an operation")
    p.add_argument("name")
    p.add_argument("operation")
    p.add_argument("--input", help="JSON input value")
    world_flags(p)
    p.set_defaults(func=cmd_act)

    p = sub.add_parser("read", help="read an observable property")
    p.add_argument("name")
    p.add_argument("property")
    world_flags(p)
    p.set_defaults(func=cmd_read)

    ctx = sub.add_parser("context", help="context documents").add_subparsers(dest="action", required=True)
    p = ctx.add_parser("load")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_context_load)
    p = ctx.add_parser("show")
    p.add_argument("--format", choices=("ntriples", "table"), default="ntriples")
    _kb_flags(p)
    p.set_defaults(func=cmd_context_show)

    topo = sub.add_parser("topology", help="building topology").add_subparsers(dest="action", required=True)
    p = topo.add_parser("load")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_topology_load)

    us = sub.add_parser("usages", help="usage descriptions").add_subparsers(dest="action", required=True)
    p = us.add_parser("load")
    p.add_argument("files", nargs="+")
    p.add_argument("--manifest", metavar="FILE")
    p.set_defaults(func=cmd_usages_load)

    p = sub.add_parser("plan", help="plan (and optionally execute) towards a goal")
    p.add_argument("goal", help="goal graph document")
    _search_flags(p)
    _kb_flags(p)
    p.add_argument("--execute", action="store_true")
    p.add_argument("--show-final", action="store_true", help="dump the projected final context")
    p.set_defaults(func=cmd_plan)

    sc = sub.add_parser("scenario", help="scenario scripts").add_subparsers(dest="action", required=True)
    p = sc.add_parser("run")
    p.add_argument("script", help="script file or URL")
    _kb_flags(p)
    _search_flags(p)
    p.add_argument("--replace", action="append", metavar="NAME=DEVICE", help="swap in a spare device first")
    p.set_defaults(func=cmd_scenario_run)

    sim = sub.add_parser("sim", help="simulated world").add_subparsers(dest="action", required=True)
    p = sim.add_parser("serve")
    p.add_argument("--world", required=True)
    p.add_argument("--predicates")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--docs", help="directory of documents to serve alongside the devices")
    p.add_argument("--duration", type=float, help="stop after this many seconds")
    p.set_defaults(func=cmd_sim_serve)
    return ap


# commands whose successful run changes the workspace
_MUTATING = {cmd_ingest_td, cmd_replace_device, cmd_act, cmd_context_load, cmd_topology_load,
             cmd_usages_load, cmd_plan, cmd_scenario_run}


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        ws = Workspace.open(args.workspace)
        if getattr(args, "authority", None):
            for a in args.authority:
                host, _, target = a.partition("=")
                ws.authorities[host] = target
        if args.func in (cmd_ingest_td, cmd_replace_device) and getattr(args, "world", None):
            ws.world = _abs(args.world)
        if getattr(args, "predicates", None) and args.func in (cmd_ingest_td, cmd_replace_device):
            ws.predicates = _abs(args.predicates)
        session = Session(ws, args)
        code = args.func(session, args, out)
    except NoPlanFound as e:
        err.write(f"error: {e}\n")
        return EXIT_NO_PLAN
    except WotError as e:
        err.write(f"error: {e}\n")
        return exit_code(e)
    except (OSError, ValueError) as e:
        err.write(f"error: {e}\n")
        return EXIT_INVALID
    if code == EXIT_OK and args.func in _MUTATING:
        ws.save()
    return code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
