"""Protocol bindings: turn an interaction's form into a concrete request and
send it over whatever transport is registered for the IRI scheme."""

from __future__ import annotations

import enum
import json
import re
import socket
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from typing import Any, Protocol

from .errors import (
    MissingInput,
    NoBindingError,
    ResponseSchemaMismatch,
    TransportError,
    UnsupportedMediaType,
)
from .td import DataSchema, Interaction, conforms_to

JSON = "application/json"

_ABSOLUTE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")


class Verb(enum.Enum):
    READ = "READ"
    INVOKE = "INVOKE"
    WRITE = "WRITE"


@dataclass(frozen=True)
class Ack:
    """Returned by operations that have no output schema."""

    status: int = 200


@dataclass(frozen=True)
class ResolvedRequest:
    target: str
    verb: Verb
    media_type: str = JSON
    payload: bytes | None = None

    @property
    def scheme(self) -> str:
        m = _ABSOLUTE.match(self.target)
        return m.group(0)[:-1].lower() if m else ""


class ProtocolBinding(Protocol):
    verbs: frozenset

    def invoke(self, target: str, verb: Verb, payload: bytes | None, media_type: str) -> tuple[int, bytes]:
        ...


def verb_for_rel(rel: tuple[str, ...] | list[str]) -> Verb:
    """Map form rel values onto a verb by substring, which also copes with
    concatenated values such as ``invoketd:Action``."""
    for r in rel:
        low = r.lower()
        for word, verb in (("read", Verb.READ), ("invoke", Verb.INVOKE), ("write", Verb.WRITE)):
            if word in low:
                return verb
    raise ValueError(f"cannot derive a verb from rel {list(rel)!r}")


def join_target(base: str, href: str) -> str:
    if _ABSOLUTE.match(href):
        return href
    if not href:
        return base
    return base.rstrip("/") + "/" + href.lstrip("/")


def encode(value: Any, media_type: str) -> bytes:
    if media_type != JSON:
        raise UnsupportedMediaType(f"unsupported media type {media_type!r}")
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode()


def decode(payload: bytes, media_type: str) -> Any:
    if media_type != JSON:
        raise UnsupportedMediaType(f"unsupported media type {media_type!r}")
    return json.loads(payload.decode() or "null")


def resolve(base: str, interaction: Interaction, value: Any = None, verb: Verb | None = None) -> ResolvedRequest:
    """Build the request for `interaction`.

    The first form whose rel maps to `verb` is used; with no verb requested
    the first form decides. A payload is attached when the selected verb
    carries a schema (action input, or property value for writes).
    """
    if not interaction.forms:
        raise ValueError(f"interaction {interaction.name!r} has no form")
    form = interaction.forms[0]
    if verb is None:
        verb = verb_for_rel(form.rel)
    else:
        for f in interaction.forms:
            try:
                if verb_for_rel(f.rel) == verb:
                    form = f
                    break
            except ValueError:
                continue
    if form.media_type != JSON:
        raise UnsupportedMediaType(f"unsupported media type {form.media_type!r}")

    schema = None
    if verb is Verb.INVOKE:
        schema = interaction.input_schema
    elif verb is Verb.WRITE:
        schema = interaction.value_schema
    payload = None
    if schema is not None:
        if value is None:
            raise MissingInput(f"{interaction.name!r} requires an input of type {schema.type}")
        payload = encode(value, form.media_type)
    return ResolvedRequest(join_target(base, form.href), verb, form.media_type, payload)


class BindingRegistry:
    def __init__(self, bindings: dict[str, ProtocolBinding] | None = None):
        self._by_scheme: dict[str, ProtocolBinding] = {}
        for scheme, b in (bindings or {}).items():
            self.register(scheme, b)

    def register(self, scheme: str, binding: ProtocolBinding):
        self._by_scheme[scheme.lower()] = binding

    def get(self, scheme: str) -> ProtocolBinding:
        try:
            return self._by_scheme[scheme.lower()]
        except KeyError:
            raise NoBindingError(scheme.lower()) from None

    def __contains__(self, scheme: str):
        return scheme.lower() in self._by_scheme

    def schemes(self) -> list[str]:
        return sorted(self._by_scheme)


def dispatch(br: BindingRegistry, req: ResolvedRequest, out_schema: DataSchema | None = None):
    binding = br.get(req.scheme)
    status, body = binding.invoke(req.target, req.verb, req.payload, req.media_type)
    if not 200 <= status < 300:
        raise TransportError(status, body.decode(errors="replace")[:200])
    if out_schema is None:
        return Ack(status)
    try:
        value = decode(body, req.media_type)
    except ValueError as e:
        raise ResponseSchemaMismatch(f"undecodable response from {req.target}: {e}") from e
    if not conforms_to(value, out_schema):
        raise ResponseSchemaMismatch(f"response {value!r} from {req.target} does not match {out_schema.type}")
    return value


# -- transports -------------------------------------------------------------

_HTTP_METHOD = {Verb.READ: "GET", Verb.INVOKE: "POST", Verb.WRITE: "PUT"}


class HttpBinding:
    """READ -> GET, INVOKE -> POST, WRITE -> PUT.

    `authorities` rewrites host[:port] of targets before sending, so TDs that
    say ``http://localhost/TD`` can be pointed at a test server.
    """

    verbs = frozenset(Verb)

    def __init__(self, timeout: float = 5.0, authorities: dict[str, str] | None = None):
        self.timeout = timeout
        self.authorities = dict(authorities or {})

    def _rewrite(self, target: str) -> str:
        parts = urllib.parse.urlsplit(target)
        new = self.authorities.get(parts.netloc)
        if new is None:
            return target
        return urllib.parse.urlunsplit(parts._replace(netloc=new))

    def invoke(self, target, verb, payload, media_type):
        req = urllib.request.Request(self._rewrite(target), data=payload, method=_HTTP_METHOD[verb])
        req.add_header("Accept", media_type)
        if payload is not None:
            req.add_header("Content-Type", media_type)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.status, resp.read()
        except urllib.error.HTTPError as e:
            return e.code, e.read()
        except (socket.timeout, TimeoutError) as e:
            raise TransportError("timeout", target) from e
        except urllib.error.URLError as e:
            cause = "timeout" if isinstance(e.reason, (socket.timeout, TimeoutError)) else "connect"
            raise TransportError(cause, f"{target}: {e.reason}") from e
        except OSError as e:
            raise TransportError("connect", f"{target}: {e}") from e


def http_binding(timeout: float = 5.0, authorities: dict[str, str] | None = None) -> HttpBinding:
    return HttpBinding(timeout, authorities)


class SimBinding:
    """In-process transport onto a simulated world. Works under any scheme.

    `fail_with` forces every request to answer with that status.
    """

    verbs = frozenset(Verb)

    def __init__(self, world, fail_with: int | None = None):
        self.world = world
        self.fail_with = fail_with

    def invoke(self, target, verb, payload, media_type):
        if self.fail_with is not None:
            return self.fail_with, b"injected failure"
        return self.world.handle(target, verb, payload)


def sim_binding(world, fail_with: int | None = None) -> SimBinding:
    return SimBinding(world, fail_with)
