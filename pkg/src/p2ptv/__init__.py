"""Event-driven simulator of a BitTorrent-style live TV overlay.

Nodes (sources, superpeers, peers) self-organise through a tracker; goodput
is evaluated as the least fixed point of the stream-forwarding equations.
"""

from .config import ScenarioConfig, baseline, desk_preset, load_config
from .experiment import SweepSpec, run_scenario, run_sweep, simulate
from .goodput import solve
from .model import NodeClass, NodeParams, NodeRecord, OverlayGraph
from .protocol import Simulation

__all__ = [
    "NodeClass",
    "NodeParams",
    "NodeRecord",
    "OverlayGraph",
    "ScenarioConfig",
    "Simulation",
    "SweepSpec",
    "baseline",
    "desk_preset",
    "load_config",
    "run_scenario",
    "run_sweep",
    "simulate",
    "solve",
]

__version__ = "0.1.0"
