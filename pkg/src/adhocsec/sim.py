"""Deterministic discrete-event simulation of the secure overlay.

Time is an integer number of microseconds. Events are ordered by
``(time, insertion index)``, so equal-time events run in the order they were
scheduled and a scenario fully determines the trace.

Trace lines are ``time<TAB>kind<TAB>node<TAB>key=value...`` with the keys of
each kind always in the same order; global events use ``-`` as the node.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from . import protocol as proto
from .protocol import (
    Delivered,
    DiscoveryTimeout,
    Dropped,
    Forward,
    KeyUpdateMessage,
    NodeState,
    Packet,
    RouteReply,
    RouteRequest,
)
from .scenario import (
    US_PER_S,
    JoinAction,
    LeaveAction,
    NodeSpec,
    RouteAction,
    Scenario,
    ScenarioError,
    SendAction,
)
from .topology import (
    PartitionError,
    RadioGraph,
    SpanningTree,
    build_mst,
    build_radio_graph,
    euclidean_distance,
    neighbor_table,
)

__all__ = [
    "Metrics",
    "ThroughputRow",
    "Transmission",
    "KeyUpdateRecord",
    "ChurnRecord",
    "Delivery",
    "SimResult",
    "Simulation",
    "run",
    "throughput_series",
    "CHANNEL_LOSS",
]

log = logging.getLogger(__name__)

CHANNEL_LOSS = "channel-loss"

# event kinds
_HELLO_ROUND = "hello_round"
_HELLO_TX = "hello_tx"
_HELLO_RX = "hello_rx"
_KEY_UPDATE_RX = "key_update_rx"
_DELIVER = "deliver"
_ACTION = "action"


@dataclass
class Metrics:
    window: int = US_PER_S
    # (time, bytes, send id)
    sends: list = field(default_factory=list)
    receipts: list = field(default_factory=list)
    latencies: list = field(default_factory=list)
    drops: Counter = field(default_factory=Counter)
    end_time: int = 0

    @property
    def sent_count(self) -> int:
        return len(self.sends)

    @property
    def received_count(self) -> int:
        return len(self.receipts)


@dataclass(frozen=True)
class ThroughputRow:
    window_start: int
    sent_pkts: int
    recv_pkts: int
    sent_bytes: int
    recv_bytes: int


def throughput_series(metrics: Metrics, window: Optional[int] = None) -> list[ThroughputRow]:
    """Per-window packet and byte counts, from time 0 through the window of the last event."""
    window = window or metrics.window
    if window <= 0:
        raise ValueError("window must be positive")
    nrows = metrics.end_time // window + 1
    for t, _, _ in itertools.chain(metrics.sends, metrics.receipts):
        nrows = max(nrows, t // window + 1)
    sent = [[0, 0] for _ in range(nrows)]
    recv = [[0, 0] for _ in range(nrows)]
    for rows, samples in ((sent, metrics.sends), (recv, metrics.receipts)):
        for t, nbytes, _ in samples:
            cell = rows[t // window]
            cell[0] += 1
            cell[1] += nbytes
    return [ThroughputRow(k * window, sent[k][0], recv[k][0], sent[k][1], recv[k][1])
            for k in range(nrows)]


@dataclass(frozen=True)
class Transmission:
    step: int
    time: int
    sender: int
    packet: Packet
    send_id: int


@dataclass(frozen=True)
class KeyUpdateRecord:
    step: int
    time: int
    message: KeyUpdateMessage


@dataclass(frozen=True)
class ChurnRecord:
    step: int
    time: int
    kind: str
    node: int
    tree_before: SpanningTree
    tree_after: SpanningTree
    changed: frozenset
    # node -> neighborhood-key version created by this event
    new_versions: dict


@dataclass(frozen=True)
class Delivery:
    time: int
    node: int
    src: int
    seq: int
    plaintext: bytes
    send_id: int


@dataclass
class SimResult:
    scenario: Scenario
    trace: list
    metrics: Metrics
    nodes: dict
    departed: dict
    graph: RadioGraph
    tree: SpanningTree
    transmissions: list
    key_updates: list
    churn: list
    deliveries: list
    rejected: list

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)

    def summary(self) -> dict:
        return {
            "nodes": len(self.nodes),
            "departed": len(self.departed),
            "tree_edges": len(self.tree.edges),
            "sends": self.metrics.sent_count,
            "deliveries": self.metrics.received_count,
            "drops": sum(self.metrics.drops.values()),
        }


class Simulation:
    def __init__(self, scenario: Scenario, window: int = US_PER_S):
        scenario.validate()
        self.scenario = scenario
        self.rng = random.Random(scenario.seed)
        self.now = 0
        self.step = 0
        self._queue = []
        self._counter = itertools.count()
        self.trace: list[str] = []

        self.positions = {}
        self.macs = {}
        self.nodes: dict[int, NodeState] = {}
        self.departed: dict[int, NodeState] = {}
        self.graph: Optional[RadioGraph] = None
        self.tree: Optional[SpanningTree] = None

        self.metrics = Metrics(window=window)
        self.transmissions = []
        self.key_updates = []
        self.churn = []
        self.deliveries = []
        self.rejected = []
        self._send_times = {}
        self._packet_ids = {}
        self._next_send_id = 0
        self._started = False

    # -- plumbing -------------------------------------------------------------

    def schedule(self, time: int, kind: str, *args):
        heapq.heappush(self._queue, (time, next(self._counter), kind, args))

    def emit(self, kind: str, node, **details):
        parts = [str(self.now), kind, "-" if node is None else str(node)]
        parts.extend(f"{k}={v}" for k, v in details.items())
        self.trace.append("\t".join(parts))

    def latency(self, a: int, b: int) -> int:
        d = euclidean_distance(self.positions[a], self.positions[b])
        return int(round(self.scenario.latency_per_unit * d))

    def _tree_neighbors(self, tree: SpanningTree, node: int) -> set:
        if tree is None or node not in tree.nodes:
            return set()
        return set(neighbor_table(tree, node).neighbors)

    def _emit_tree(self):
        edges = ",".join(f"{i}-{j}" for i, j in self.tree.sorted_edges())
        self.emit("tree", None, edges=edges or "none", weight=f"{self.tree.total_weight:.6f}")

    # -- run ------------------------------------------------------------------

    def start(self):
        sc = self.scenario
        for spec in sc.nodes:
            self.positions[spec.id] = spec.position
            self.macs[spec.id] = spec.mac
        self.graph = build_radio_graph(self.positions, sc.range)
        self.tree = build_mst(self.graph)
        for spec in sc.nodes:
            state = NodeState.create(spec.id, spec.mac, sc.seed)
            state.tree_neighbors = self._tree_neighbors(self.tree, spec.id)
            self.nodes[spec.id] = state
        self._emit_tree()

        t = 0
        while t <= sc.horizon:
            self.schedule(t, _HELLO_ROUND)
            t += sc.hello_interval
        for action in sc.script:
            self.schedule(action.time, _ACTION, action)
        self._started = True

    def run(self) -> SimResult:
        if not self._started:
            self.start()
        while self._queue:
            time, _, kind, args = heapq.heappop(self._queue)
            self.now = time
            self.step += 1
            getattr(self, "_on_" + kind)(*args)
        self.metrics.end_time = self.now
        return SimResult(
            scenario=self.scenario, trace=self.trace, metrics=self.metrics,
            nodes=self.nodes, departed=self.departed, graph=self.graph, tree=self.tree,
            transmissions=self.transmissions, key_updates=self.key_updates,
            churn=self.churn, deliveries=self.deliveries, rejected=self.rejected,
        )

    # -- HELLO and key exchange ----------------------------------------------

    def _on_hello_round(self):
        for node in sorted(self.nodes):
            self._on_hello_tx(node)

    def _on_hello_tx(self, node: int):
        if node not in self.nodes:
            return
        state = self.nodes[node]
        msg = proto.make_hello(state, self.now)
        self.emit("hello", node, n=msg.public_key.n, e=msg.public_key.e)
        for nbr in sorted(self.graph.neighbors(node)):
            self.schedule(self.now + self.latency(node, nbr), _HELLO_RX, nbr, msg)

    def _on_hello_rx(self, node: int, msg):
        state = self.nodes.get(node)
        if state is None:
            return
        self.emit("hello_rx", node, sender=msg.sender)
        if not proto.handle_hello(state, msg):
            return
        peer = msg.sender
        self.emit("handshake", node, peer=peer)
        self._send_key_update(proto.make_key_update(state, peer))
        if peer not in state.neighbor_keys and peer in self.nodes:
            # unicast reply so the peer learns our public key without waiting a round
            reply = proto.make_hello(state, self.now)
            self.emit("hello", node, n=reply.public_key.n, e=reply.public_key.e, to=peer)
            self.schedule(self.now + self.latency(node, peer), _HELLO_RX, peer, reply)

    def _send_key_update(self, msg: KeyUpdateMessage):
        self.emit("key_update", msg.owner, to=msg.recipient, version=msg.version,
                  residues=len(msg.wrapped_key))
        self.key_updates.append(KeyUpdateRecord(self.step, self.now, msg))
        self.schedule(self.now + self.latency(msg.owner, msg.recipient), _KEY_UPDATE_RX, msg)

    def _on_key_update_rx(self, msg: KeyUpdateMessage):
        state = self.nodes.get(msg.recipient)
        if state is None:
            self.emit("key_update_lost", msg.recipient, owner=msg.owner, version=msg.version)
            return
        stored = proto.receive_key_update(state, msg)
        self.emit("key_update_rx", msg.recipient, owner=msg.owner, version=msg.version,
                  stored=int(stored))

    # -- data path -------------------------------------------------------------

    def _on_action(self, action):
        if isinstance(action, SendAction):
            self.send(action.src, action.dst, action.payload)
        elif isinstance(action, RouteAction):
            self.discover(action.src, action.dst)
        elif isinstance(action, JoinAction):
            try:
                self.apply_join(action.node)
            except (PartitionError, ScenarioError) as exc:
                self._reject("join", action.node.id, exc)
        elif isinstance(action, LeaveAction):
            try:
                self.apply_leave(action.node)
            except (PartitionError, ScenarioError) as exc:
                self._reject("leave", action.node, exc)

    def _reject(self, what: str, node: int, exc: Exception):
        reason = "partition" if isinstance(exc, PartitionError) else "invalid"
        self.emit("reject", node, action=what, reason=reason)
        self.rejected.append((self.now, what, node, str(exc)))
        log.info("t=%d %s of node %s rejected: %s", self.now, what, node, exc)

    def discover(self, src: int, dst: int) -> bool:
        if src not in self.nodes or dst not in self.nodes:
            self.emit("route_fail", src, target=dst)
            return False
        try:
            msgs = proto.route_discover(self.tree, src, dst, self.nodes)
        except DiscoveryTimeout:
            self.emit("route_fail", src, target=dst)
            return False
        for sender, receiver, m in msgs:
            kind = "rreq" if isinstance(m, RouteRequest) else "rrep"
            self.emit(kind, sender, to=receiver, origin=m.origin, target=m.target,
                      trace=",".join(map(str, m.hop_trace)))
        return True

    def _drop(self, node, reason: str, src, seq, send_id: int):
        self.emit("drop", node, reason=reason, src=src, seq=seq)
        self.metrics.drops[reason] += 1

    def send(self, src: int, dst: int, payload: bytes):
        send_id = self._next_send_id
        self._next_send_id += 1
        self.metrics.sends.append((self.now, len(payload), send_id))
        self._send_times[send_id] = self.now
        if src not in self.nodes:
            self._drop(src, "source-unavailable", src, "-", send_id)
            return
        if dst not in self.nodes:
            self._drop(src, "destination-unavailable", src, "-", send_id)
            return
        state = self.nodes[src]
        if dst not in state.routing and not self.discover(src, dst):
            self._drop(src, proto.ROUTE_MISSING, src, "-", send_id)
            return
        pkt = proto.encrypt_at_source(state, dst, payload)
        self._packet_ids[(src, pkt.header.seq)] = send_id
        self.emit("send", src, dest=dst, seq=pkt.header.seq, bytes=len(payload))
        self._transmit(src, pkt, send_id)

    def _transmit(self, sender: int, pkt: Packet, send_id: int):
        h = pkt.header
        self.emit("tx", sender, next_hop=h.next_hop, src=h.src, dest=h.dest, seq=h.seq,
                  wrap_owner=h.wrap_owner, wrap_version=h.wrap_version,
                  packet=proto.encode_packet(pkt).hex())
        self.transmissions.append(Transmission(self.step, self.now, sender, pkt, send_id))
        lost = self.rng.random() < self.scenario.drop_prob
        if lost:
            self._drop(sender, CHANNEL_LOSS, h.src, h.seq, send_id)
            return
        self.schedule(self.now + self.latency(sender, h.next_hop), _DELIVER, h.next_hop, pkt, send_id)

    def _on_deliver(self, node: int, pkt: Packet, send_id: int):
        h = pkt.header
        state = self.nodes.get(node)
        if state is None:
            self._drop(node, "node-departed", h.src, h.seq, send_id)
            return
        outcome = proto.handle_packet(state, pkt)
        if isinstance(outcome, Delivered):
            self.emit("deliver", node, src=h.src, seq=h.seq, plaintext=outcome.plaintext.hex())
            self.metrics.receipts.append((self.now, len(outcome.plaintext), send_id))
            self.metrics.latencies.append(self.now - self._send_times[send_id])
            self.deliveries.append(Delivery(self.now, node, h.src, h.seq, outcome.plaintext, send_id))
        elif isinstance(outcome, Forward):
            f = outcome.packet.header
            self.emit("forward", node, src=f.src, dest=f.dest, seq=f.seq, next_hop=f.next_hop,
                      wrap_owner=f.wrap_owner, wrap_version=f.wrap_version)
            self._transmit(node, outcome.packet, send_id)
        else:
            assert isinstance(outcome, Dropped)
            self._drop(node, outcome.reason, h.src, h.seq, send_id)

    # -- churn -----------------------------------------------------------------

    def apply_join(self, spec: NodeSpec):
        if spec.id in self.positions:
            raise ScenarioError(f"node id {spec.id} already used")
        if spec.mac in self.macs.values():
            raise ScenarioError(f"MAC address {spec.mac} already used")
        positions = {n: self.positions[n] for n in self.nodes}
        positions[spec.id] = spec.position
        graph = build_radio_graph(positions, self.scenario.range)
        if not graph.neighbors(spec.id):
            raise PartitionError([{spec.id}, set(self.nodes)])
        tree = build_mst(graph)

        self.positions[spec.id] = spec.position
        self.macs[spec.id] = spec.mac
        self.nodes[spec.id] = NodeState.create(spec.id, spec.mac, self.scenario.seed)
        self.emit("join", spec.id, x=spec.position.x, y=spec.position.y, mac=spec.mac)
        self._retopologize(graph, tree, "join", spec.id)
        # announce immediately instead of waiting for the next round
        self.schedule(self.now, _HELLO_TX, spec.id)

    def apply_leave(self, node: int):
        if node not in self.nodes:
            raise ScenarioError(f"node {node} is not alive")
        positions = {n: self.positions[n] for n in self.nodes if n != node}
        graph = build_radio_graph(positions, self.scenario.range)
        tree = build_mst(graph)

        # frozen, never advanced again: kept for secrecy checks
        self.departed[node] = self.nodes.pop(node)
        self.emit("leave", node)
        self._retopologize(graph, tree, "leave", node)

    def _retopologize(self, graph: RadioGraph, tree: SpanningTree, kind: str, subject: int):
        before = self.tree
        self.graph, self.tree = graph, tree
        changed = set()
        new_versions = {}
        pending = []
        for n in sorted(self.nodes):
            old = self._tree_neighbors(before, n)
            new = self._tree_neighbors(tree, n)
            if old == new:
                continue
            changed.add(n)
            state = self.nodes[n]
            if kind == "join" and n == subject:
                state.tree_neighbors = new
                new_versions[n] = state.own_key.version
                continue
            pending.extend(proto.rekey_on_membership_change(state, new))
            new_versions[n] = state.own_key.version
            self.emit("rekey", n, version=state.own_key.version,
                      neighbors=",".join(map(str, sorted(new))) or "none")
        for msg in pending:
            self._send_key_update(msg)
        for n in sorted(self.nodes):
            stale = proto.invalidate_routes(self.nodes[n], tree)
            if stale:
                self.emit("route_invalidate", n, dests=",".join(map(str, sorted(stale))))
        self._emit_tree()
        self.churn.append(ChurnRecord(self.step, self.now, kind, subject, before, tree,
                                      frozenset(changed), new_versions))


def run(scenario: Scenario, window: int = US_PER_S) -> SimResult:
    """Run a scenario to completion (the event queue drains once the script is done)."""
    return Simulation(scenario, window=window).run()

