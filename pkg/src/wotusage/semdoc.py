"""Concrete document formats: a small Turtle subset, N-Triples output, and
fetching documents from files, HTTP or inline text.

The Turtle reader accepts exactly::

    @prefix p: <iri> .
    subject verb object (, object)* (; verb object (, object)*)* .

with IRIs, prefixed names, ``_:label`` blanks, ``a``, double-quoted strings,
bare booleans and bare integers/decimals. Anything else is a ParseError.
"""

from __future__ import annotations

import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .errors import FetchError, ParseError
from .rdf import IRI, BNode, Graph, Literal, Triple

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDF_TYPE = IRI(RDF + "type")

DEFAULT_PREFIXES = {"rdf": RDF}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<prefix>@prefix\b)
  | (?P<iri><[^<>"{}|^`\\\s]*>)
  | (?P<blank>_:[A-Za-z0-9_][\w.-]*(?<!\.))
  | (?P<longstring>"{3})
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>[+-]?(?:\d+\.\d+|\.\d+|\d+)(?![\w.]*[A-Za-z_]))
  | (?P<pname>(?:[A-Za-z][\w-]*)?:(?:[\w-](?:[\w.-]*[\w-])?)?)
  | (?P<word>[A-Za-z][\w-]*)
  | (?P<punct>[.;,])
    """,
    re.VERBOSE,
)

_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\", "'": "'", "b": "\b", "f": "\f"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unsupported construct {text[pos:pos + 12]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "longstring":
            raise ParseError("multi-line string literals are not supported", line, col)
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
        if kind == "string" and pos < len(text) and text[pos] in "@^":
            raise ParseError("language tags and datatypes are not supported", line, pos - line_start + 1)
    return toks


def _unescape(body: str, tok: _Tok) -> str:
    out, i = [], 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            nxt = body[i + 1]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
                i += 2
            elif nxt == "u":
                out.append(chr(int(body[i + 2 : i + 6], 16)))
                i += 6
            elif nxt == "U":
                out.append(chr(int(body[i + 2 : i + 10], 16)))
                i += 10
            else:
                raise ParseError(f"bad escape \\{nxt}", tok.line, tok.col + i)
        else:
            out.append(c)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, text: str, prefixes: dict[str, str] | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.prefixes = dict(DEFAULT_PREFIXES)
        if prefixes:
            self.prefixes.update(prefixes)
        self.triples: list[Triple] = []

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise ParseError(f"unexpected end of document, expected {what}", last.line, last.col + len(last.text))
        self.i += 1
        return tok

    def expect_punct(self, ch: str):
        tok = self.next(repr(ch))
        if tok.kind != "punct" or tok.text != ch:
            raise ParseError(f"expected {ch!r}, found {tok.text!r}", tok.line, tok.col)

    def run(self):
        while self.peek() is not None:
            if self.peek().kind == "prefix":
                self.directive()
            else:
                self.statement()
        return Graph(self.triples), self.prefixes

    def directive(self):
        self.next("@prefix")
        tok = self.next("prefix label")
        if tok.kind != "pname" or not tok.text.endswith(":"):
            raise ParseError(f"bad prefix label {tok.text!r}", tok.line, tok.col)
        iri = self.next("namespace IRI")
        if iri.kind != "iri":
            raise ParseError(f"expected namespace IRI, found {iri.text!r}", iri.line, iri.col)
        self.prefixes[tok.text[:-1]] = iri.text[1:-1]
        self.expect_punct(".")

    def term(self, tok: _Tok, position: str):
        if tok.kind == "iri":
            return IRI(tok.text[1:-1])
        if tok.kind == "pname":
            pfx, local = tok.text.split(":", 1)
            if pfx not in self.prefixes:
                raise ParseError(f"undeclared prefix {pfx!r}", tok.line, tok.col)
            return IRI(self.prefixes[pfx] + local)
        if tok.kind == "blank" and position != "predicate":
            return BNode(tok.text[2:])
        if position == "predicate" and tok.kind == "word" and tok.text == "a":
            return RDF_TYPE
        if position == "object":
            if tok.kind == "string":
                return Literal(_unescape(tok.text[1:-1], tok))
            if tok.kind == "number":
                return Literal(tok.text, "number")
            if tok.kind == "word" and tok.text in ("true", "false"):
                return Literal(tok.text, "boolean")
        raise ParseError(f"unexpected {tok.text!r} in {position} position", tok.line, tok.col)

    def statement(self):
        subj = self.term(self.next("subject"), "subject")
        while True:
            pred = self.term(self.next("predicate"), "predicate")
            while True:
                obj = self.term(self.next("object"), "object")
                self.triples.append(Triple(subj, pred, obj))
                tok = self.next("'.', ';' or ','")
                if tok.kind == "punct" and tok.text == ",":
                    continue
                break
            if tok.kind != "punct":
                raise ParseError(f"expected '.', ';' or ',', found {tok.text!r}", tok.line, tok.col)
            if tok.text == ".":
                return
            # ';' may be repeated and may precede the final '.'
            while self.peek() is not None and self.peek().kind == "punct" and self.peek().text == ";":
                self.i += 1
            nxt = self.peek()
            if nxt is not None and nxt.kind == "punct" and nxt.text == ".":
                self.i += 1
                return


def parse_turtle(text: str, prefixes: dict[str, str] | None = None) -> tuple[Graph, dict[str, str]]:
    """Parse the supported Turtle subset. Returns the graph and the prefix
    table in effect at the end of the document."""
    return _Parser(text, prefixes).run()


def parse_ntriples(text: str) -> Graph:
    return parse_turtle(text)[0]


def serialize_ntriples(g: Graph) -> str:
    """Canonical-ish dump: one triple per line, sorted, blanks renumbered
    ``_:b0, _:b1, ...`` by first appearance."""

    def masked(t: Triple):
        # order triples with blank labels pushed to a tiebreak slot
        return tuple(("_:" if isinstance(x, BNode) else str(x)) for x in t), tuple(str(x) for x in t)

    numbering: dict[BNode, str] = {}
    for t in sorted(g, key=masked):
        for x in t:
            if isinstance(x, BNode) and x not in numbering:
                numbering[x] = f"_:b{len(numbering)}"
    lines = sorted(
        " ".join(numbering[x] if isinstance(x, BNode) else str(x) for x in t) + " ." for t in g
    )
    return "".join(line + "\n" for line in lines)


def serialize_turtle(g: Graph, prefixes: dict[str, str] | None = None) -> str:
    """Human-friendly dump; output stays inside the accepted subset."""
    prefixes = prefixes or {}
    ns = sorted(prefixes.items(), key=lambda kv: -len(kv[1]))

    def show(x):
        if isinstance(x, IRI):
            for label, base in ns:
                local = x.value[len(base):]
                if x.value.startswith(base) and re.fullmatch(r"(?:[\w-](?:[\w.-]*[\w-])?)?", local):
                    return f"{label}:{local}"
        return str(x)

    head = "".join(f"@prefix {k}: <{v}> .\n" for k, v in sorted(prefixes.items()))
    body = "".join(f"{show(t.s)} {show(t.p)} {show(t.o)} .\n" for t in g.sorted())
    return head + ("\n" if head and body else "") + body


# -- document sources -------------------------------------------------------

_MEDIA_BY_EXT = {".ttl": "turtle", ".nt": "ntriples", ".jsonld": "td-json", ".json": "td-json"}


@dataclass(frozen=True)
class DocumentSource:
    origin: str
    kind: str = "file"  # file | http | inline
    media_hint: str | None = None

    def __post_init__(self):
        if self.media_hint is None and self.kind != "inline":
            ext = os.path.splitext(self.origin.split("?", 1)[0])[1].lower()
            object.__setattr__(self, "media_hint", _MEDIA_BY_EXT.get(ext))

    @classmethod
    def parse(cls, ref: str, media_hint: str | None = None) -> "DocumentSource":
        if re.match(r"https?://", ref):
            return cls(ref, "http", media_hint)
        if ref.startswith("file://"):
            ref = ref[len("file://"):]
        return cls(ref, "file", media_hint)

    @classmethod
    def inline(cls, text: str, media_hint: str) -> "DocumentSource":
        return cls(text, "inline", media_hint)


def fetch(src: DocumentSource | str, timeout: float = 5.0) -> str:
    if isinstance(src, str):
        src = DocumentSource.parse(src)
    if src.kind == "inline":
        return src.origin
    if src.kind == "file":
        try:
            return Path(src.origin).read_text(encoding="utf-8")
        except OSError as e:
            raise FetchError(src.origin, e.strerror or str(e)) from e
    try:
        with urllib.request.urlopen(src.origin, timeout=timeout) as resp:
            return resp.read().decode("utf-8")
    except urllib.error.HTTPError as e:
        raise FetchError(src.origin, f"status {e.code}") from e
    except (urllib.error.URLError, OSError) as e:
        reason = getattr(e, "reason", e)
        cause = "timeout" if "timed out" in str(reason) else "connect"
        raise FetchError(src.origin, cause) from e


def load_graph(ref: str | DocumentSource, prefixes: dict[str, str] | None = None) -> Graph:
    """Fetch and parse a Turtle or N-Triples document."""
    return parse_turtle(fetch(ref), prefixes)[0]
