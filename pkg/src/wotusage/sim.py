"""Simulated smart home: virtual devices behind their Thing Descriptions.

Devices keep a property-name -> value state and react to actions according
to the semantic type of the action (SwitchOn sets the SwitchStatus property,
and so on). Time is virtual and only moves on `tick`. The same world can be
reached in-process through `SimBinding` or over HTTP with `serve_http`.

World file format, one directive per line (shell-style quoting)::

    prefix ex: <http://example.org/>
    device lb1 td=lamp.jsonld iri=http://localhost/TD/lamp.jsonld init "Switch State=false"
    device lb2 td=lamp-coap.jsonld spare
    zone sh:my_home
    contains sh:my_home sh:kitchen
    element sh:kitchen <http://localhost/TD/lamp.jsonld>
    ambient
    sh:kitchen sh:light_outside true .
    end

Spare devices answer requests but are left out of the context projection;
they stand for hardware on the shelf, ready to replace a broken device.
"""

from __future__ import annotations

import json
import logging
import shlex
import threading
import urllib.parse
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from . import vocab
from .artifact import PredicateTable
from .binding import Verb, join_target
from .errors import BindError, ParseError, TdError, UnknownDevice, WorldSpecError
from .rdf import EMPTY, IRI, Graph, Triple, union_all
from .semdoc import parse_turtle
from .td import Interaction, ThingDescription, conforms_to, default_value, parse_td
from .vocab import BOT_ZONE, CONTAINS_ZONE, HAS_ELEMENT, IOT, RDF_TYPE

log = logging.getLogger(__name__)

THERMAL = IOT + "ThermalMode"

# action semantic type -> (property semantic type, new value given the input)
ACTION_RULES = {
    IOT + "SwitchOn": (IOT + "SwitchStatus", lambda inp: True),
    IOT + "SwitchOff": (IOT + "SwitchStatus", lambda inp: False),
    IOT + "Open": (IOT + "CurtainStatus", lambda inp: True),
    IOT + "Close": (IOT + "CurtainStatus", lambda inp: False),
    IOT + "StartHeating": (THERMAL, lambda inp: "heating"),
    IOT + "StartCooling": (THERMAL, lambda inp: "cooling"),
    IOT + "StopThermal": (THERMAL, lambda inp: "idle"),
    IOT + "SetTargetTemperature": (IOT + "TargetTemperature", lambda inp: inp),
}


@dataclass
class Device:
    id: str
    td: ThingDescription
    td_text: str
    source_iri: str
    state: dict[str, Any] = field(default_factory=dict)
    spare: bool = False
    events: dict[str, list] = field(default_factory=dict)

    def prop_by_type(self, semantic_type: str) -> Interaction | None:
        for p in self.td.properties:
            if any(self.td.expand(t) == semantic_type for t in p.semantic_types):
                return p
        return None


@dataclass(frozen=True)
class Invocation:
    time: int
    device: str
    verb: str
    interaction: str
    payload: Any = None
    status: int = 200


def _new_device(dev_id: str, td: ThingDescription, text: str, source_iri: str, spare: bool) -> Device:
    d = Device(dev_id, td, text, source_iri, spare=spare)
    for p in td.properties:
        d.state[p.name] = default_value(p.value_schema) if p.value_schema else None
        if p.value_schema is not None and p.value_schema.type == "boolean":
            d.state[p.name] = False
    for p in td.properties:
        if any(td.expand(t) == THERMAL for t in p.semantic_types):
            d.state[p.name] = "idle"
    for e in td.events:
        d.events[e.name] = []
    return d


class World:
    """Device states, topology and ambient facts, behind one lock."""

    def __init__(self, table: PredicateTable | None = None):
        self.devices: dict[str, Device] = {}
        self.topology: Graph = EMPTY
        self.ambient: Graph = EMPTY
        self.clock = 0
        self.log: list[Invocation] = []
        self.table = table or PredicateTable.default()
        self._lock = threading.RLock()

    # -- building --

    def add_device(
        self, dev_id: str, td_text: str, source_iri: str | None = None, spare: bool = False, init: dict | None = None
    ) -> Device:
        td = parse_td(td_text)
        with self._lock:
            if dev_id in self.devices:
                raise WorldSpecError(f"duplicate device {dev_id!r}")
            d = _new_device(dev_id, td, td_text, source_iri or td.base, spare)
            for k, v in (init or {}).items():
                prop = td.interaction(k)
                if prop is None or prop.kind != "Property":
                    raise WorldSpecError(f"device {dev_id!r} has no property {k!r}")
                if prop.value_schema is not None and not conforms_to(v, prop.value_schema):
                    raise WorldSpecError(f"initial value {v!r} for {dev_id}.{k} violates its schema")
                d.state[k] = v
            self.devices[dev_id] = d
            return d

    def device(self, dev_id: str) -> Device:
        try:
            return self.devices[dev_id]
        except KeyError:
            raise UnknownDevice(f"no device {dev_id!r}") from None

    def snapshot(self) -> dict[str, dict]:
        with self._lock:
            return {k: dict(d.state) for k, d in sorted(self.devices.items())}

    # -- dynamics --

    def tick(self, n: int = 1):
        """Advance virtual time; thermal devices move one unit per tick."""
        with self._lock:
            for _ in range(n):
                self.clock += 1
                for d in self.devices.values():
                    mode_p = d.prop_by_type(THERMAL)
                    temp_p = d.prop_by_type(IOT + "Temperature")
                    target_p = d.prop_by_type(IOT + "TargetTemperature")
                    if not (mode_p and temp_p and target_p):
                        continue
                    mode, temp, target = d.state[mode_p.name], d.state[temp_p.name], d.state[target_p.name]
                    if mode == "heating" and temp < target:
                        d.state[temp_p.name] = min(temp + 1, target)
                    elif mode == "cooling" and temp > target:
                        d.state[temp_p.name] = max(temp - 1, target)

    def emit(self, dev_id: str, event: str, payload: Any = None):
        with self._lock:
            d = self.device(dev_id)
            if event not in d.events:
                raise UnknownDevice(f"device {dev_id!r} has no event {event!r}")
            d.events[event].append({"payload": payload, "timestamp": float(self.clock)})

    # -- request handling --

    def route(self, target: str) -> tuple[Device, Interaction] | None:
        """Exact base+href match first, then a match on the path alone."""
        with self._lock:
            for d in self.devices.values():
                for i in d.td.interactions:
                    if any(join_target(d.td.base, f.href) == target for f in i.forms):
                        return d, i
            path = urllib.parse.urlsplit(target).path
            for _, d in sorted(self.devices.items(), key=lambda kv: (kv[1].td.scheme != "http", kv[0])):
                for i in d.td.interactions:
                    if any(urllib.parse.urlsplit(join_target(d.td.base, f.href)).path == path for f in i.forms):
                        return d, i
        return None

    def handle(self, target: str, verb: Verb, payload: bytes | None) -> tuple[int, bytes]:
        with self._lock:
            hit = self.route(target)
            if hit is None:
                return 404, b"no such resource"
            d, i = hit
            try:
                value = json.loads(payload.decode()) if payload else None
            except ValueError:
                return self._done(d, verb, i, None, 400, b"body is not JSON")
            if i.kind == "Property":
                if verb is Verb.READ:
                    return self._done(d, verb, i, None, 200, json.dumps(d.state[i.name]).encode())
                if verb is Verb.WRITE and i.writable:
                    if i.value_schema is not None and not conforms_to(value, i.value_schema):
                        return self._done(d, verb, i, value, 400, b"value does not match schema")
                    d.state[i.name] = value
                    return self._done(d, verb, i, value, 204, b"")
                return self._done(d, verb, i, value, 405, b"verb not allowed")
            if i.kind == "Event":
                if verb is not Verb.READ:
                    return self._done(d, verb, i, value, 405, b"verb not allowed")
                queued, d.events[i.name] = d.events[i.name], []
                return 200, json.dumps(queued).encode()
            if verb is not Verb.INVOKE:
                return self._done(d, verb, i, value, 405, b"verb not allowed")
            if i.input_schema is not None and not conforms_to(value, i.input_schema):
                return self._done(d, verb, i, value, 400, b"input does not match schema")
            self._apply(d, i, value)
            return self._done(d, verb, i, value, 200, b"")

    def _apply(self, d: Device, action: Interaction, value):
        for t in action.semantic_types:
            rule = ACTION_RULES.get(d.td.expand(t))
            if rule is None:
                continue
            prop = d.prop_by_type(rule[0])
            if prop is not None:
                d.state[prop.name] = rule[1](value)
            return
        log.debug("%s.%s has no state effect", d.id, action.name)

    def _done(self, d: Device, verb: Verb, i: Interaction, value, status: int, body: bytes):
        # event polling is not logged: it would drown the actuation history
        self.log.append(Invocation(self.clock, d.id, verb.name, i.name, value, status))
        return status, body

    # -- projections --

    def device_context(self) -> Graph:
        triples = []
        with self._lock:
            for d in self.devices.values():
                if d.spare:
                    continue
                for p in d.td.properties:
                    if not p.observable:
                        continue
                    rule = self.table.rule_for(d.td, p)
                    if rule is not None:
                        triples.append(Triple(IRI(d.source_iri), IRI(rule.predicate), rule.render(d.state[p.name])))
        return Graph(triples)

    def context(self) -> Graph:
        return union_all([self.device_context(), self.ambient])


# -- world files ------------------------------------------------------------


def _term(token: str, prefixes: dict[str, str], path: str, line: int) -> IRI:
    if token.startswith("<") and token.endswith(">"):
        return IRI(token[1:-1])
    if ":" in token:
        pfx, local = token.split(":", 1)
        if pfx in prefixes:
            return IRI(prefixes[pfx] + local)
        if local.startswith("//"):
            return IRI(token)
    raise WorldSpecError(f"cannot resolve {token!r} to an IRI", path, line)


def load_world(text: str, base_dir: str | Path = ".", path: str = "<world>", table: PredicateTable | None = None) -> World:
    world = World(table)
    prefixes = dict(vocab.PREFIXES)
    topo: list[Triple] = []
    lines = text.splitlines()
    n = 0
    while n < len(lines):
        raw = lines[n]
        n += 1
        try:
            words = shlex.split(raw, comments=True)
        except ValueError as e:
            raise WorldSpecError(str(e), path, n) from e
        if not words:
            continue
        head, args = words[0], words[1:]
        if head == "prefix":
            if len(args) != 2 or not args[0].endswith(":"):
                raise WorldSpecError("expected: prefix p: <iri>", path, n)
            prefixes[args[0][:-1]] = args[1].strip("<>")
        elif head == "device":
            _device_line(world, args, Path(base_dir), path, n)
        elif head == "zone":
            topo += [Triple(_term(a, prefixes, path, n), RDF_TYPE, BOT_ZONE) for a in args]
        elif head == "contains":
            if len(args) < 2:
                raise WorldSpecError("expected: contains ZONE SUBZONE...", path, n)
            z = _term(args[0], prefixes, path, n)
            topo += [Triple(z, CONTAINS_ZONE, _term(a, prefixes, path, n)) for a in args[1:]]
        elif head == "element":
            if len(args) < 2:
                raise WorldSpecError("expected: element ZONE IRI...", path, n)
            z = _term(args[0], prefixes, path, n)
            topo += [Triple(z, HAS_ELEMENT, _term(a, prefixes, path, n)) for a in args[1:]]
        elif head == "ambient":
            start = n
            body = []
            while n < len(lines) and lines[n].strip() != "end":
                body.append(lines[n])
                n += 1
            if n == len(lines):
                raise WorldSpecError("ambient block without 'end'", path, start)
            n += 1
            try:
                g, _ = parse_turtle("\n".join(body), prefixes)
            except ParseError as e:
                raise WorldSpecError(f"ambient block: {e}", path, start + e.line) from e
            world.ambient = union_all([world.ambient, g])
        else:
            raise WorldSpecError(f"unknown directive {head!r}", path, n)
    world.topology = Graph(topo)
    return world


def _device_line(world: World, args: list[str], base_dir: Path, path: str, n: int):
    if not args:
        raise WorldSpecError("device needs an id", path, n)
    dev_id, opts, init, spare = args[0], {}, {}, False
    rest = iter(args[1:])
    for a in rest:
        if a == "spare":
            spare = True
        elif a == "init":
            continue
        elif "=" in a:
            k, v = a.split("=", 1)
            if k in ("td", "iri"):
                opts[k] = v
            else:
                try:
                    init[k] = json.loads(v)
                except ValueError:
                    raise WorldSpecError(f"initial value for {k!r} is not JSON: {v!r}", path, n) from None
        else:
            raise WorldSpecError(f"unexpected token {a!r}", path, n)
    if "td" not in opts:
        raise WorldSpecError(f"device {dev_id!r} needs td=<path>", path, n)
    td_path = base_dir / opts["td"]
    try:
        text = td_path.read_text(encoding="utf-8")
    except OSError as e:
        raise WorldSpecError(f"cannot read {td_path}: {e.strerror}", path, n) from e
    try:
        world.add_device(dev_id, text, opts.get("iri"), spare, init)
    except TdError as e:
        raise WorldSpecError(f"device {dev_id!r}: {e}", path, n) from e
    except WorldSpecError as e:
        raise WorldSpecError(str(e).split(": ", 1)[-1], path, n) from e


def load_world_file(file: str | Path, table: PredicateTable | None = None) -> World:
    file = Path(file)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as e:
        raise WorldSpecError(f"cannot read world file: {e.strerror}", str(file), 0) from e
    return load_world(text, file.parent, str(file), table)


# -- HTTP facade ------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    server: "_Server"

    def log_message(self, fmt, *args):
        log.debug("sim http: " + fmt, *args)

    def _reply(self, status: int, body: bytes, ctype: str = "application/json"):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _serve(self, verb: Verb):
        path = urllib.parse.urlsplit(self.path).path
        size = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(size) if size else None
        world, docs = self.server.world, self.server.documents
        if verb is Verb.READ:
            if path.startswith("/td/"):
                dev = world.devices.get(path[len("/td/"):])
                if dev is None:
                    return self._reply(404, b"unknown device")
                return self._reply(200, dev.td_text.encode(), "application/td+json")
            if path in docs:
                text = docs[path]
                ctype = "text/turtle" if path.endswith(".ttl") else "application/json"
                return self._reply(200, text.encode(), ctype)
        status, out = world.handle(f"http://{self.headers.get('Host', 'localhost')}{path}", verb, body)
        self._reply(status, out)

    def do_GET(self):
        self._serve(Verb.READ)

    def do_POST(self):
        self._serve(Verb.INVOKE)

    def do_PUT(self):
        self._serve(Verb.WRITE)


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = False

    def __init__(self, addr, world: World, documents: dict[str, str]):
        self.world = world
        self.documents = documents
        super().__init__(addr, _Handler)


class SimServer:
    """Running HTTP facade. Use as a context manager or call `close`."""

    def __init__(self, world: World, port: int = 0, documents: dict[str, str] | None = None, host: str = "127.0.0.1"):
        try:
            self._httpd = _Server((host, port), world, dict(documents or {}))
        except OSError as e:
            raise BindError(f"cannot bind {host}:{port}: {e.strerror}") from e
        self.host = host
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="sim-http", daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def add_document(self, path: str, text: str):
        self._httpd.documents[path] = text

    def close(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve_http(world: World, port: int = 0, documents: dict[str, str] | None = None, host: str = "127.0.0.1") -> SimServer:
    return SimServer(world, port, documents, host)


def documents_from_dir(root: str | Path, prefix: str = "/") -> dict[str, str]:
    """URL path -> text for every file under `root`, for serving fixtures."""
    root = Path(root)
    return {
        prefix.rstrip("/") + "/" + p.relative_to(root).as_posix(): p.read_text(encoding="utf-8")
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }
