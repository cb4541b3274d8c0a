"""Scenario scripts: small JSON programs run against a live registry.

Two shapes are accepted. A goal sequence::

    {"goals": ["warmup.ttl", "http://example.org/lighting.ttl"]}

and a step list::

    {"steps": [
        {"onEvent": {"artifact": "fire_detector", "event": "fireEvent", "steps": [
            {"loop": {"times": 3, "steps": [
                {"invoke": {"artifact": "emergency_light", "operation": "Switch On", "input": true}},
                {"wait": 2}]}}]}},
        {"emit": {"device": "fd", "event": "fireEvent"}},
        {"achieveGoal": "goal.ttl"}]}

Relative goal references are resolved against the script's own location.
`onEvent` arms a handler that runs once per event occurrence; events are
polled after every top-level step. `emit` injects an event into the
simulated world. Loops always carry an explicit bound.
"""

from __future__ import annotations

import json
import logging
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import vocab
from .artifact import PredicateTable, Registry
from .binding import join_target
from .errors import ExecutionError, ScriptError, WotError
from .planner import Domain, SearchConfig, plan
from .rdf import EMPTY, Graph, entails
from .semdoc import fetch, parse_turtle
from .usage import KnowledgeBase, current_context

log = logging.getLogger(__name__)

STEP_KINDS = ("invoke", "wait", "onEvent", "emit", "loop", "achieveGoal")
MAX_LOOP = 1000
MAX_EVENT_ROUNDS = 100


@dataclass
class Handler:
    artifact: str
    event: str
    steps: list


@dataclass
class Script:
    steps: list
    base: str = ""

    @property
    def is_empty(self) -> bool:
        return not self.steps


def _check_steps(steps: Any, where: str) -> list:
    if not isinstance(steps, list):
        raise ScriptError(f"{where}: steps must be a list")
    for n, s in enumerate(steps):
        at = f"{where}[{n}]"
        if not isinstance(s, dict) or len(s) != 1:
            raise ScriptError(f"{at}: a step is an object with exactly one of {', '.join(STEP_KINDS)}")
        kind, arg = next(iter(s.items()))
        if kind == "invoke":
            if not isinstance(arg, dict) or not {"artifact", "operation"} <= set(arg):
                raise ScriptError(f"{at}: invoke needs artifact and operation")
        elif kind == "wait":
            if not isinstance(arg, int) or isinstance(arg, bool) or arg < 0:
                raise ScriptError(f"{at}: wait takes a non-negative tick count")
        elif kind == "onEvent":
            if not isinstance(arg, dict) or not {"artifact", "event"} <= set(arg):
                raise ScriptError(f"{at}: onEvent needs artifact and event")
            _check_steps(arg.get("steps", []), f"{at}.onEvent.steps")
        elif kind == "emit":
            if not isinstance(arg, dict) or not {"device", "event"} <= set(arg):
                raise ScriptError(f"{at}: emit needs device and event")
        elif kind == "loop":
            times = arg.get("times") if isinstance(arg, dict) else None
            if not isinstance(times, int) or isinstance(times, bool) or not 0 <= times <= MAX_LOOP:
                raise ScriptError(f"{at}: loop needs times between 0 and {MAX_LOOP}")
            _check_steps(arg.get("steps", []), f"{at}.loop.steps")
        elif kind == "achieveGoal":
            if not isinstance(arg, str) or not arg:
                raise ScriptError(f"{at}: achieveGoal takes a goal reference")
        else:
            raise ScriptError(f"{at}: unknown step {kind!r}")
    return steps


def parse_script(text: str, base: str = "") -> Script:
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ScriptError(f"script is not JSON: {e}") from e
    if isinstance(doc, list):
        doc = {"steps": doc}
    if not isinstance(doc, dict):
        raise ScriptError("script must be a JSON object or list")
    unknown = set(doc) - {"goals", "steps"}
    if unknown:
        raise ScriptError(f"unknown script members: {', '.join(sorted(unknown))}")
    steps = list(_check_steps(doc.get("steps", []), "steps"))
    goals = doc.get("goals", [])
    if not isinstance(goals, list) or not all(isinstance(g, str) for g in goals):
        raise ScriptError("goals must be a list of references")
    steps += [{"achieveGoal": g} for g in goals]
    return Script(steps, base)


def load_script(ref: str) -> Script:
    base = ref if "://" in ref else str(Path(ref).resolve())
    return parse_script(fetch(ref), base)


def resolve_ref(base: str, ref: str) -> str:
    if "://" in ref or not base:
        return ref
    if "://" in base:
        return urllib.parse.urljoin(base, ref)
    return str(Path(base).parent / ref)


@dataclass
class Runtime:
    """What a script runs against."""

    registry: Registry
    kb: KnowledgeBase = field(default_factory=KnowledgeBase)
    world: Any = None  # sim.World, optional
    table: PredicateTable | None = None
    cfg: SearchConfig = field(default_factory=SearchConfig)
    extra_context: Graph = EMPTY

    def context(self) -> Graph:
        extra = [self.extra_context]
        if self.world is not None:
            extra.append(self.world.ambient)
        return current_context(self.registry, self.kb.topology, extra, self.table)


class Runner:
    def __init__(self, rt: Runtime):
        self.rt = rt
        self.trace: list[str] = []
        self.failures: list[str] = []
        self.handlers: list[Handler] = []

    def _t(self) -> str:
        return f"t={self.rt.world.clock if self.rt.world is not None else 0}"

    def _device_of_last_call(self, mark: int) -> str:
        w = self.rt.world
        if w is None or len(w.log) <= mark:
            return ""
        return f" [{w.log[-1].device}]"

    def invoke(self, artifact: str, operation: str, value=None):
        inst = self.rt.registry.get(artifact)
        handle = inst.operations.get(operation)
        target = ""
        if handle is not None:
            target = join_target(inst.td.base, handle.form.href)
        mark = len(self.rt.world.log) if self.rt.world is not None else 0
        self.rt.registry.act(artifact, operation, value)
        self.trace.append(
            f"{self._t()} invoke {artifact}.{operation} -> {target}{self._device_of_last_call(mark)} ok"
        )

    def achieve(self, ref: str, base: str):
        iri = resolve_ref(base, ref)
        goal, _ = parse_turtle(fetch(iri), vocab.PREFIXES)
        start = self.rt.context()
        domain = Domain.from_registry(self.rt.registry, self.rt.kb)
        p = plan(start, goal, domain, self.rt.cfg)
        self.trace.append(f"{self._t()} goal {ref}: plan of {len(p.steps)} step(s)")
        for s in p.steps:
            try:
                self.invoke(s.artifact_name, s.operation_name, s.input)
            except WotError as e:
                raise ExecutionError(f"goal {ref}: {s.artifact_name}.{s.operation_name} failed: {e}", cause=e) from e
        if not entails(self.rt.context(), goal):
            raise ExecutionError(f"goal {ref}: plan executed but the goal does not hold")
        self.trace.append(f"{self._t()} goal {ref}: achieved")

    def run_steps(self, steps: list, base: str, top: bool = False):
        for s in steps:
            kind, arg = next(iter(s.items()))
            if kind == "invoke":
                self.invoke(arg["artifact"], arg["operation"], arg.get("input"))
            elif kind == "wait":
                if self.rt.world is not None:
                    self.rt.world.tick(arg)
                self.trace.append(f"{self._t()} wait {arg}")
            elif kind == "onEvent":
                self.handlers.append(Handler(arg["artifact"], arg["event"], arg.get("steps", [])))
                self.trace.append(f"{self._t()} armed {arg['artifact']}.{arg['event']}")
            elif kind == "emit":
                if self.rt.world is None:
                    raise ScriptError("emit needs a simulated world")
                self.rt.world.emit(arg["device"], arg["event"], arg.get("payload"))
                self.trace.append(f"{self._t()} emit {arg['device']}.{arg['event']}")
            elif kind == "loop":
                for _ in range(arg["times"]):
                    self.run_steps(arg.get("steps", []), base)
            elif kind == "achieveGoal":
                self.achieve(arg, base)
            if top:
                self.dispatch_events(base)

    def dispatch_events(self, base: str):
        for _ in range(MAX_EVENT_ROUNDS):
            fired = False
            for h in list(self.handlers):
                for _ in self.rt.registry.poll_events(h.artifact, h.event):
                    fired = True
                    self.trace.append(f"{self._t()} event {h.artifact}.{h.event}")
                    try:
                        self.run_steps(h.steps, base)
                    except WotError as e:
                        msg = f"handler {h.artifact}.{h.event} failed: {e}"
                        self.failures.append(msg)
                        self.trace.append(f"{self._t()} {msg}")
            if not fired:
                return

    def run(self, script: Script) -> list[str]:
        self.run_steps(script.steps, script.base, top=True)
        return self.trace


def run_script(script: Script, rt: Runtime) -> Runner:
    r = Runner(rt)
    r.run(script)
    return r
