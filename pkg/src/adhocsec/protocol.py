"""Per-node protocol logic.

A node encrypts a message once with a message-specific key (cipher A) and
wraps that key under its own neighborhood key (cipher B). Every relay unwraps
the message key with the previous hop's neighborhood key and re-wraps it with
its own; the body is never touched in flight. Neighborhood keys travel to
tree neighbors inside RSA-wrapped key updates, and are replaced whenever a
node's set of tree neighbors changes.

The functions here mutate ``NodeState`` in place and return the messages the
caller (normally the simulator) must transmit.
"""

from __future__ import annotations

import random
import struct
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

from .crypto import (
    MKEY_LEN,
    MacAddress,
    NeighborhoodKey,
    RsaKeyPair,
    RsaPublicKey,
    cipher_a_decrypt,
    cipher_a_encrypt,
    cipher_b_decrypt,
    cipher_b_encrypt,
    derive_message_key,
    generate_neighborhood_key,
    rsa_keygen,
    rsa_unwrap,
    rsa_wrap,
)
from .topology import SpanningTree, UnknownNodeError, neighbor_table, tree_path

__all__ = [
    "ProtocolError",
    "RouteMissingError",
    "LoopbackError",
    "HandshakeDeferred",
    "DiscoveryTimeout",
    "PacketHeader",
    "Packet",
    "KeyUpdateMessage",
    "HelloMessage",
    "RouteRequest",
    "RouteReply",
    "NodeState",
    "Delivered",
    "Forward",
    "Dropped",
    "NOT_ADDRESSED",
    "KEY_UNAVAILABLE",
    "ROUTE_MISSING",
    "encode_packet",
    "decode_packet",
    "encode_key_update",
    "decode_key_update",
    "encode_hello",
    "decode_hello",
    "encode_route_message",
    "decode_route_message",
    "encrypt_at_source",
    "handle_packet",
    "make_key_update",
    "receive_key_update",
    "handshake",
    "make_hello",
    "handle_hello",
    "route_discover",
    "invalidate_routes",
    "rekey_on_membership_change",
]

NOT_ADDRESSED = "not-addressed"
KEY_UNAVAILABLE = "key-unavailable"
ROUTE_MISSING = "route-missing"


class ProtocolError(Exception):
    pass


class RouteMissingError(ProtocolError):
    pass


class LoopbackError(ProtocolError):
    pass


class HandshakeDeferred(ProtocolError):
    """The peer's public key is not known yet; retry after its next HELLO."""


class DiscoveryTimeout(ProtocolError):
    pass


# -- messages -----------------------------------------------------------------

@dataclass(frozen=True)
class PacketHeader:
    src: int
    next_hop: int
    dest: int
    seq: int
    wrap_owner: int
    wrap_version: int


@dataclass(frozen=True)
class Packet:
    header: PacketHeader
    wrapped_mkey: bytes
    body: bytes


@dataclass(frozen=True)
class KeyUpdateMessage:
    owner: int
    version: int
    wrapped_key: tuple
    recipient: int


@dataclass(frozen=True)
class HelloMessage:
    sender: int
    public_key: RsaPublicKey
    timestamp: int


@dataclass(frozen=True)
class RouteRequest:
    origin: int
    target: int
    hop_trace: tuple


@dataclass(frozen=True)
class RouteReply:
    origin: int
    target: int
    hop_trace: tuple


# -- wire formats -------------------------------------------------------------

_HEADER = struct.Struct(">6I")
_HELLO = struct.Struct(">BIIIQ")
_KEY_UPDATE = struct.Struct(">BIIIH")
_ROUTE = struct.Struct(">BIIH")

TAG_HELLO = 0x01
TAG_KEY_UPDATE = 0x02
TAG_RREQ = 0x03
TAG_RREP = 0x04


def encode_packet(pkt: Packet) -> bytes:
    """src, next_hop, dest, seq, wrap_owner, wrap_version (u32 BE), wrapped key, body."""
    h = pkt.header
    if len(pkt.wrapped_mkey) != MKEY_LEN:
        raise ProtocolError(f"wrapped message key must be {MKEY_LEN} octets")
    return (_HEADER.pack(h.src, h.next_hop, h.dest, h.seq, h.wrap_owner, h.wrap_version)
            + pkt.wrapped_mkey + pkt.body)


def decode_packet(data: bytes) -> Packet:
    if len(data) < _HEADER.size + MKEY_LEN:
        raise ProtocolError(f"packet too short: {len(data)} octets")
    header = PacketHeader(*_HEADER.unpack_from(data))
    off = _HEADER.size
    return Packet(header, bytes(data[off:off + MKEY_LEN]), bytes(data[off + MKEY_LEN:]))


def encode_key_update(msg: KeyUpdateMessage) -> bytes:
    head = _KEY_UPDATE.pack(TAG_KEY_UPDATE, msg.owner, msg.recipient, msg.version, len(msg.wrapped_key))
    return head + struct.pack(f">{len(msg.wrapped_key)}I", *msg.wrapped_key)


def decode_key_update(data: bytes) -> KeyUpdateMessage:
    tag, owner, recipient, version, count = _KEY_UPDATE.unpack_from(data)
    if tag != TAG_KEY_UPDATE or len(data) != _KEY_UPDATE.size + 4 * count:
        raise ProtocolError("malformed key update")
    residues = struct.unpack_from(f">{count}I", data, _KEY_UPDATE.size)
    return KeyUpdateMessage(owner=owner, version=version, wrapped_key=tuple(residues), recipient=recipient)


def encode_hello(msg: HelloMessage) -> bytes:
    return _HELLO.pack(TAG_HELLO, msg.sender, msg.public_key.n, msg.public_key.e, msg.timestamp)


def decode_hello(data: bytes) -> HelloMessage:
    if len(data) != _HELLO.size:
        raise ProtocolError("malformed hello")
    tag, sender, n, e, ts = _HELLO.unpack(data)
    if tag != TAG_HELLO:
        raise ProtocolError("malformed hello")
    return HelloMessage(sender, RsaPublicKey(n, e), ts)


def encode_route_message(msg: Union[RouteRequest, RouteReply]) -> bytes:
    tag = TAG_RREQ if isinstance(msg, RouteRequest) else TAG_RREP
    trace = msg.hop_trace
    return _ROUTE.pack(tag, msg.origin, msg.target, len(trace)) + struct.pack(f">{len(trace)}I", *trace)


def decode_route_message(data: bytes) -> Union[RouteRequest, RouteReply]:
    tag, origin, target, count = _ROUTE.unpack_from(data)
    if tag not in (TAG_RREQ, TAG_RREP) or len(data) != _ROUTE.size + 4 * count:
        raise ProtocolError("malformed route message")
    trace = struct.unpack_from(f">{count}I", data, _ROUTE.size)
    cls = RouteRequest if tag == TAG_RREQ else RouteReply
    return cls(origin, target, tuple(trace))


# -- node state ---------------------------------------------------------------

@dataclass
class NodeState:
    id: int
    mac: MacAddress
    rsa: RsaKeyPair
    own_key: NeighborhoodKey
    seed: int = 0
    tree_neighbors: set = field(default_factory=set)
    neighbor_keys: dict = field(default_factory=dict)
    neighbor_pubkeys: dict = field(default_factory=dict)
    routing: dict = field(default_factory=dict)
    seq_counter: int = 0
    # neighbor -> version of own_key already sent to it
    keys_sent: dict = field(default_factory=dict)
    # every neighborhood key this node ever held or decrypted, by (owner, version)
    key_history: dict = field(default_factory=dict)
    inbox: list = field(default_factory=list)
    delivered: list = field(default_factory=list)

    @classmethod
    def create(cls, node_id: int, mac: MacAddress, seed: int = 0) -> "NodeState":
        rsa = rsa_keygen(random.Random(f"rsa/{seed}/{node_id}"))
        own = generate_neighborhood_key(node_id, 0, seed)
        state = cls(id=node_id, mac=mac, rsa=rsa, own_key=own, seed=seed)
        state.key_history[(node_id, 0)] = own
        return state

    @property
    def public_key(self) -> RsaPublicKey:
        return self.rsa.public


@dataclass(frozen=True)
class Delivered:
    plaintext: bytes
    packet: Packet


@dataclass(frozen=True)
class Forward:
    packet: Packet


@dataclass(frozen=True)
class Dropped:
    reason: str
    packet: Packet


# -- data path ----------------------------------------------------------------

def encrypt_at_source(state: NodeState, dest: int, plaintext: bytes) -> Packet:
    if dest == state.id:
        raise LoopbackError(f"node {state.id} cannot send to itself")
    next_hop = state.routing.get(dest)
    if next_hop is None:
        raise RouteMissingError(f"node {state.id} has no route to {dest}")
    seq = state.seq_counter
    mkey = derive_message_key(state.mac, seq).key
    body = cipher_a_encrypt(mkey, plaintext)
    wrapped = cipher_b_encrypt(state.own_key.key, mkey)
    header = PacketHeader(src=state.id, next_hop=next_hop, dest=dest, seq=seq,
                          wrap_owner=state.id, wrap_version=state.own_key.version)
    state.seq_counter += 1
    return Packet(header, wrapped, body)


def handle_packet(state: NodeState, pkt: Packet):
    """Process a received data packet; returns Delivered, Forward or Dropped."""
    h = pkt.header
    if h.next_hop != state.id:
        return Dropped(NOT_ADDRESSED, pkt)
    state.inbox.append(pkt)

    nkey = state.neighbor_keys.get(h.wrap_owner)
    if nkey is None or nkey.version != h.wrap_version:
        return Dropped(KEY_UNAVAILABLE, pkt)
    mkey = cipher_b_decrypt(nkey.key, pkt.wrapped_mkey)

    if h.dest == state.id:
        plaintext = cipher_a_decrypt(mkey, pkt.body)
        state.delivered.append((h.src, h.seq, plaintext))
        return Delivered(plaintext, pkt)

    next_hop = state.routing.get(h.dest)
    if next_hop is None:
        return Dropped(ROUTE_MISSING, pkt)
    header = replace(h, next_hop=next_hop, wrap_owner=state.id, wrap_version=state.own_key.version)
    return Forward(Packet(header, cipher_b_encrypt(state.own_key.key, mkey), pkt.body))


# -- key exchange -------------------------------------------------------------

def make_key_update(state: NodeState, recipient: int) -> KeyUpdateMessage:
    """Wrap the current neighborhood key under ``recipient``'s RSA public key."""
    pub = state.neighbor_pubkeys.get(recipient)
    if pub is None:
        raise HandshakeDeferred(f"node {state.id} has no public key for {recipient}")
    wrapped = tuple(rsa_wrap(pub, state.own_key.key))
    state.keys_sent[recipient] = state.own_key.version
    return KeyUpdateMessage(owner=state.id, version=state.own_key.version,
                            wrapped_key=wrapped, recipient=recipient)


def receive_key_update(state: NodeState, msg: KeyUpdateMessage) -> bool:
    """Unwrap a key update; store it if the owner is a current tree neighbor.

    Returns True when the key was stored. Stale versions are ignored.
    """
    if msg.recipient != state.id:
        raise ProtocolError(f"key update for {msg.recipient} delivered to {state.id}")
    key = NeighborhoodKey(msg.owner, msg.version, rsa_unwrap(state.rsa, msg.wrapped_key))
    state.key_history[(msg.owner, msg.version)] = key
    if msg.owner not in state.tree_neighbors:
        return False
    current = state.neighbor_keys.get(msg.owner)
    if current is not None and current.version > msg.version:
        return False
    state.neighbor_keys[msg.owner] = key
    return True


def handshake(a: NodeState, b: NodeState) -> tuple[KeyUpdateMessage, KeyUpdateMessage]:
    """Exchange neighborhood keys between two tree neighbors, both directions at once."""
    if b.id not in a.tree_neighbors or a.id not in b.tree_neighbors:
        raise ProtocolError(f"nodes {a.id} and {b.id} are not tree neighbors")
    if b.id not in a.neighbor_pubkeys or a.id not in b.neighbor_pubkeys:
        raise HandshakeDeferred(f"public keys of {a.id}/{b.id} not yet exchanged")
    ab = make_key_update(a, b.id)
    ba = make_key_update(b, a.id)
    receive_key_update(b, ab)
    receive_key_update(a, ba)
    return ab, ba


def make_hello(state: NodeState, timestamp: int) -> HelloMessage:
    return HelloMessage(sender=state.id, public_key=state.public_key, timestamp=timestamp)


def handle_hello(state: NodeState, msg: HelloMessage) -> bool:
    """Cache the sender's public key.

    Returns True when a handshake is due: the sender is a tree neighbor that
    has not yet been sent our current neighborhood key.
    """
    if msg.sender == state.id:
        return False
    state.neighbor_pubkeys[msg.sender] = msg.public_key
    if msg.sender not in state.tree_neighbors:
        return False
    return state.keys_sent.get(msg.sender) != state.own_key.version


def rekey_on_membership_change(state: NodeState, new_neighbors) -> list[KeyUpdateMessage]:
    """Adopt a new tree-neighbor set, bump the neighborhood key, distribute it.

    Keys of departed neighbors are purged. Neighbors whose public key is not
    known yet are skipped here and served by the HELLO-driven handshake.
    """
    new_neighbors = set(new_neighbors)
    state.tree_neighbors = new_neighbors
    for gone in [n for n in state.neighbor_keys if n not in new_neighbors]:
        del state.neighbor_keys[gone]
    state.keys_sent.clear()
    state.own_key = generate_neighborhood_key(state.id, state.own_key.version + 1, state.seed)
    state.key_history[(state.id, state.own_key.version)] = state.own_key
    out = []
    for nbr in sorted(new_neighbors):
        if nbr in state.neighbor_pubkeys:
            out.append(make_key_update(state, nbr))
    return out


# -- routing ------------------------------------------------------------------

def route_discover(tree: SpanningTree, origin: int, target: int,
                   nodes: Mapping[int, NodeState]) -> list[tuple[int, int, object]]:
    """Flood an RREQ along tree edges and answer it with an RREP.

    Every node on the discovered path learns next hops toward both ends.
    Returns the transmitted messages as ``(sender, receiver, message)``.
    """
    for n in (origin, target):
        if n not in tree.nodes:
            raise UnknownNodeError(f"unknown node {n}")
    if origin == target:
        return []
    adj = tree.adjacency()
    sent = []
    found = None
    queue = deque([(origin, None, (origin,))])
    while queue:
        node, came_from, trace = queue.popleft()
        if node == target:
            found = trace
            continue
        for nxt in sorted(adj[node]):
            if nxt == came_from:
                continue
            sent.append((node, nxt, RouteRequest(origin, target, trace)))
            queue.append((nxt, node, trace + (nxt,)))
    if found is None:
        raise DiscoveryTimeout(f"no route from {origin} to {target}")

    back = tuple(reversed(found))
    for i in range(len(back) - 1):
        sent.append((back[i], back[i + 1], RouteReply(origin, target, back)))
    for i, node in enumerate(found):
        routing = nodes[node].routing
        if i + 1 < len(found):
            routing[target] = found[i + 1]
        if i > 0:
            routing[origin] = found[i - 1]
    return sent


def invalidate_routes(state: NodeState, tree: SpanningTree) -> list[int]:
    """Drop routing entries whose next hop no longer matches the tree path."""
    stale = []
    for dest, nh in state.routing.items():
        if dest not in tree.nodes or state.id not in tree.nodes:
            stale.append(dest)
        elif tree_path(tree, state.id, dest)[1] != nh:
            stale.append(dest)
    for dest in stale:
        del state.routing[dest]
    return stale


def tree_neighbors_of(tree: SpanningTree, node: int) -> set[int]:
    return set(neighbor_table(tree, node).neighbors)
