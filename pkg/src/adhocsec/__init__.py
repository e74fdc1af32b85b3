"""Secure group communication over a spanning-tree overlay in ad hoc networks.

Submodules:

- ``topology``  radio graph, minimum spanning tree, neighbor tables, tree paths
- ``crypto``    toy RSA key wrapping, two symmetric ciphers, key derivation
- ``protocol``  node state machine: encrypt, forward/re-wrap, handshake, rekey
- ``scenario``  scenario model and file format
- ``sim``       deterministic discrete-event simulator and throughput metrics
- ``cli``       ``adhocsec run|tree|validate``
"""

from .crypto import MacAddress
from .protocol import NodeState
from .scenario import Scenario, parse_scenario, serialize_scenario
from .sim import Simulation, run, throughput_series
from .topology import Position, build_mst, build_radio_graph, tree_path

__version__ = "0.1.0"

__all__ = [
    "MacAddress",
    "NodeState",
    "Position",
    "Scenario",
    "Simulation",
    "build_mst",
    "build_radio_graph",
    "parse_scenario",
    "run",
    "serialize_scenario",
    "throughput_series",
    "tree_path",
]
