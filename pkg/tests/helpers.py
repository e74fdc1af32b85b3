import random
from pathlib import Path

from adhocsec.crypto import MacAddress
from adhocsec.scenario import (
    JoinAction,
    LeaveAction,
    NodeSpec,
    Scenario,
    SendAction,
)
from adhocsec.topology import Position
from oracles import random_connected_points

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def mac_for(node_id: int) -> MacAddress:
    # locally administered, distinct per id
    return MacAddress(bytes([0x02, 0x5E, 0x10, (node_id >> 16) & 0xFF, (node_id >> 8) & 0xFF, node_id & 0xFF]))


def spec(node_id, x, y) -> NodeSpec:
    return NodeSpec(node_id, Position(float(x), float(y)), mac_for(node_id))


def chain_scenario(n=3, spacing=10.0, **kw) -> Scenario:
    params = dict(seed=1, range=spacing * 1.5, latency_per_unit=100.0)
    params.update(kw)
    sc = Scenario(**params)
    sc.nodes = [spec(i, i * spacing, 0) for i in range(n)]
    return sc


def random_scenario(rng: random.Random, n: int, side=100.0, radio_range=40.0, **kw) -> Scenario:
    pts = random_connected_points(rng, n, side, radio_range)
    params = dict(seed=rng.randrange(2 ** 31), range=radio_range, latency_per_unit=10.0)
    params.update(kw)
    sc = Scenario(**params)
    sc.nodes = [spec(i, x, y) for i, (x, y) in enumerate(pts)]
    return sc


def add_random_sends(sc: Scenario, rng: random.Random, count: int, start_us: int, step_us: int,
                     alive=None, size=(1, 32)):
    ids = sorted(alive if alive is not None else (n.id for n in sc.nodes))
    for k in range(count):
        src, dst = rng.sample(ids, 2)
        payload = rng.randbytes(rng.randint(*size))
        sc.script.append(SendAction(start_us + k * step_us, src, dst, payload))


def wired_nodes(tree, seed=0, handshake=True):
    """NodeStates for every tree node, HELLOs exchanged along radio = tree edges, keys shared."""
    from adhocsec import protocol as proto
    from adhocsec.topology import neighbor_table

    nodes = {n: proto.NodeState.create(n, mac_for(n), seed) for n in sorted(tree.nodes)}
    for n, st in nodes.items():
        st.tree_neighbors = set(neighbor_table(tree, n).neighbors)
    for i, j in sorted(tree.edges):
        proto.handle_hello(nodes[i], proto.make_hello(nodes[j], 0))
        proto.handle_hello(nodes[j], proto.make_hello(nodes[i], 0))
        if handshake:
            proto.handshake(nodes[i], nodes[j])
    return nodes


def chain_tree(n):
    from adhocsec.topology import SpanningTree

    edges = {(i, i + 1): 1.0 for i in range(n - 1)}
    return SpanningTree(frozenset(range(n)), frozenset(edges), edges)


def parse_trace(text_or_lines):
    """Trace lines -> dicts with time (int), kind, node and the key=value details."""
    lines = text_or_lines.splitlines() if isinstance(text_or_lines, str) else text_or_lines
    rows = []
    for line in lines:
        time, kind, node, *rest = line.split("\t")
        row = {"time": int(time), "kind": kind, "node": node}
        for item in rest:
            k, v = item.split("=", 1)
            row[k] = v
        rows.append(row)
    return rows
