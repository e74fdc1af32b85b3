"""Scenario model and the line-based scenario file format.

Example::

    # three nodes in a line
    seed 7
    range 15
    hello_interval 1
    latency_per_unit 0.0001
    drop_prob 0
    node 0 0 0 02:00:00:00:00:00
    node 1 10 0 02:00:00:00:00:01
    node 2 20 0 02:00:00:00:00:02
    at 2 send 0 2 68656c6c6f

Times are seconds with at most microsecond resolution; internally every time
is an integer number of microseconds. ``latency_per_unit`` is seconds of
propagation delay per unit of distance.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Union

from .crypto import CryptoError, MacAddress
from .topology import Position

__all__ = [
    "ScenarioError",
    "NodeSpec",
    "SendAction",
    "JoinAction",
    "LeaveAction",
    "RouteAction",
    "Scenario",
    "parse_scenario",
    "serialize_scenario",
    "parse_seconds",
    "format_seconds",
]

US_PER_S = 1_000_000


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)


@dataclass(frozen=True)
class NodeSpec:
    id: int
    position: Position
    mac: MacAddress


@dataclass(frozen=True)
class SendAction:
    time: int
    src: int
    dst: int
    payload: bytes
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class JoinAction:
    time: int
    node: NodeSpec
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LeaveAction:
    time: int
    node: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RouteAction:
    time: int
    src: int
    dst: int
    line: int = field(default=0, compare=False)


Action = Union[SendAction, JoinAction, LeaveAction, RouteAction]


@dataclass
class Scenario:
    seed: int = 0
    range: float = 250.0
    hello_interval: int = US_PER_S
    latency_per_unit: float = 10.0  # microseconds per distance unit
    drop_prob: float = 0.0
    nodes: list = field(default_factory=list)
    script: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return max((a.time for a in self.script), default=0)

    def validate(self):
        """Check ids, MACs, parameters and the script; raise ScenarioError on the first problem."""
        if not (self.range > 0 and math.isfinite(self.range)):
            raise ScenarioError(f"range must be positive, got {self.range}")
        if self.hello_interval <= 0:
            raise ScenarioError("hello_interval must be positive")
        if not (self.latency_per_unit >= 0 and math.isfinite(self.latency_per_unit)):
            raise ScenarioError("latency_per_unit must be non-negative")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ScenarioError(f"drop_prob must be in [0, 1], got {self.drop_prob}")

        ids, macs = set(), set()

        def claim(spec: NodeSpec, line=None):
            if spec.id in ids:
                raise ScenarioError(f"duplicate node id {spec.id}", line)
            if spec.mac in macs:
                raise ScenarioError(f"duplicate MAC address {spec.mac}", line)
            if not all(math.isfinite(c) for c in spec.position):
                raise ScenarioError(f"node {spec.id} has a non-finite position", line)
            ids.add(spec.id)
            macs.add(spec.mac)

        for spec in self.nodes:
            claim(spec)
        alive = set(ids)
        last = 0
        for act in self.script:
            line = act.line or None
            if act.time < 0:
                raise ScenarioError("negative time", line)
            if act.time < last:
                raise ScenarioError("script actions must be ordered by time", line)
            last = act.time
            if isinstance(act, JoinAction):
                claim(act.node, line)
                alive.add(act.node.id)
            elif isinstance(act, LeaveAction):
                if act.node not in alive:
                    raise ScenarioError(f"leave of unknown or departed node {act.node}", line)
                alive.discard(act.node)
            else:
                for n in (act.src, act.dst):
                    if n not in alive:
                        raise ScenarioError(f"node {n} is not declared or alive at this point", line)
                if act.src == act.dst:
                    raise ScenarioError(f"source and destination are both {act.src}", line)


_TOKEN = re.compile(r"\S+")


def parse_seconds(text: str) -> int:
    """Seconds (decimal text) -> integer microseconds."""
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None
    if not value.is_finite():
        raise ValueError(f"not a finite time: {text!r}")
    us = value * US_PER_S
    if us != us.to_integral_value():
        raise ValueError(f"time {text} is finer than one microsecond")
    return int(us)


def format_seconds(us: int) -> str:
    d = (Decimal(us) / US_PER_S).normalize()
    text = format(d, "f")
    return text


def _fmt_number(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


class _Line:
    def __init__(self, lineno: int, text: str):
        self.lineno = lineno
        self.tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(text)]

    def fail(self, idx: int, message: str):
        col = self.tokens[idx][1] if idx < len(self.tokens) else None
        raise ScenarioError(message, self.lineno, col)

    def arity(self, n: int, usage: str):
        if len(self.tokens) != n:
            self.fail(min(n, len(self.tokens) - 1) if len(self.tokens) > n else 0,
                      f"expected `{usage}`")

    def int_(self, idx: int, what: str) -> int:
        tok = self.tokens[idx][0]
        if not re.fullmatch(r"\d+", tok):
            self.fail(idx, f"{what} must be a non-negative integer, got {tok!r}")
        return int(tok)

    def float_(self, idx: int, what: str) -> float:
        tok = self.tokens[idx][0]
        try:
            value = float(tok)
        except ValueError:
            self.fail(idx, f"{what} must be a number, got {tok!r}")
        if not math.isfinite(value):
            self.fail(idx, f"{what} must be finite, got {tok!r}")
        return value

    def time(self, idx: int, what: str = "time") -> int:
        tok = self.tokens[idx][0]
        try:
            us = parse_seconds(tok)
        except ValueError as exc:
            self.fail(idx, f"bad {what}: {exc}")
        if us < 0:
            self.fail(idx, f"negative {what} {tok}")
        return us

    def mac(self, idx: int) -> MacAddress:
        tok = self.tokens[idx][0]
        try:
            return MacAddress.parse(tok)
        except CryptoError:
            self.fail(idx, f"malformed MAC address {tok!r}")

    def node(self, start: int) -> NodeSpec:
        return NodeSpec(self.int_(start, "node id"),
                        Position(self.float_(start + 1, "x"), self.float_(start + 2, "y")),
                        self.mac(start + 3))


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    seen = {}
    script = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        ln = _Line(lineno, raw.split("#", 1)[0])
        if not ln.tokens:
            continue
        word = ln.tokens[0][0]
        if word in ("seed", "range", "hello_interval", "latency_per_unit", "drop_prob"):
            ln.arity(2, f"{word} <value>")
            if word in seen:
                ln.fail(0, f"duplicate `{word}` (first given on line {seen[word]})")
            seen[word] = lineno
            if word == "seed":
                sc.seed = ln.int_(1, "seed")
            elif word == "range":
                sc.range = ln.float_(1, "range")
                if sc.range <= 0:
                    ln.fail(1, "range must be positive")
            elif word == "hello_interval":
                sc.hello_interval = ln.time(1, "hello_interval")
                if sc.hello_interval <= 0:
                    ln.fail(1, "hello_interval must be positive")
            elif word == "latency_per_unit":
                tok = ln.tokens[1][0]
                try:
                    value = Decimal(tok)
                except InvalidOperation:
                    ln.fail(1, f"latency_per_unit must be a number, got {tok!r}")
                if not value.is_finite() or value < 0:
                    ln.fail(1, "latency_per_unit must be a non-negative number")
                sc.latency_per_unit = float(value * US_PER_S)
            else:
                sc.drop_prob = ln.float_(1, "drop_prob")
                if not 0.0 <= sc.drop_prob <= 1.0:
                    ln.fail(1, "drop_prob must be in [0, 1]")
        elif word == "node":
            ln.arity(5, "node <id> <x> <y> <mac>")
            spec = ln.node(1)
            if any(n.id == spec.id for n in sc.nodes):
                ln.fail(1, f"duplicate node id {spec.id}")
            if any(n.mac == spec.mac for n in sc.nodes):
                ln.fail(4, f"duplicate MAC address {spec.mac}")
            sc.nodes.append(spec)
        elif word == "at":
            if len(ln.tokens) < 3:
                ln.fail(0, "expected `at <time> <action> ...`")
            t = ln.time(1)
            verb = ln.tokens[2][0]
            if verb == "send":
                ln.arity(6, "at <time> send <src> <dst> <hex-payload>")
                tok = ln.tokens[5][0]
                try:
                    payload = bytes.fromhex(tok)
                except ValueError:
                    ln.fail(5, f"payload must be hex, got {tok!r}")
                script.append(SendAction(t, ln.int_(3, "src"), ln.int_(4, "dst"), payload, lineno))
            elif verb == "join":
                ln.arity(7, "at <time> join <id> <x> <y> <mac>")
                script.append(JoinAction(t, ln.node(3), lineno))
            elif verb == "leave":
                ln.arity(4, "at <time> leave <id>")
                script.append(LeaveAction(t, ln.int_(3, "node id"), lineno))
            elif verb == "route":
                ln.arity(5, "at <time> route <src> <dst>")
                script.append(RouteAction(t, ln.int_(3, "src"), ln.int_(4, "dst"), lineno))
            else:
                ln.fail(2, f"unknown action {verb!r}")
        else:
            ln.fail(0, f"unknown directive {word!r}")

    # stable: equal times keep file order
    sc.script = sorted(script, key=lambda a: a.time)
    sc.validate()
    return sc


def serialize_scenario(sc: Scenario) -> str:
    lat = (Decimal(repr(sc.latency_per_unit)) / US_PER_S).normalize()
    out = [
        f"seed {sc.seed}",
        f"range {_fmt_number(sc.range)}",
        f"hello_interval {format_seconds(sc.hello_interval)}",
        f"latency_per_unit {format(lat, 'f')}",
        f"drop_prob {_fmt_number(sc.drop_prob)}",
    ]
    for n in sc.nodes:
        out.append(f"node {n.id} {_fmt_number(n.position.x)} {_fmt_number(n.position.y)} {n.mac}")
    for a in sc.script:
        t = format_seconds(a.time)
        if isinstance(a, SendAction):
            out.append(f"at {t} send {a.src} {a.dst} {a.payload.hex()}")
        elif isinstance(a, JoinAction):
            n = a.node
            out.append(f"at {t} join {n.id} {_fmt_number(n.position.x)} {_fmt_number(n.position.y)} {n.mac}")
        elif isinstance(a, LeaveAction):
            out.append(f"at {t} leave {a.node}")
        else:
            out.append(f"at {t} route {a.src} {a.dst}")
    return "\n".join(out) + "\n"
