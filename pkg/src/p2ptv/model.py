"""Overlay entities: node classes, node records and the directed connection graph.

Direction convention: an edge ``(a, i)`` means *a downloads from i*. It is an
outgoing connection of ``a`` and an incoming connection of ``i``. The number of
incoming connections is the ``n`` that divides a node's upload goodput.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, TextIO


class ConfigurationError(ValueError):
    """A parameter set violates a node-class or scenario invariant."""


class GraphError(Exception):
    pass


class CapacityExceeded(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class SourceAsDownloader(GraphError):
    pass


class MissingEdge(GraphError):
    pass


class MissingNode(GraphError):
    pass


class InvalidEdge(GraphError):
    """Self-loop, cross-channel edge or an endpoint that is offline."""


class NodeClass(enum.Enum):
    SOURCE = "source"
    SUPERPEER = "superpeer"
    PEER = "peer"


@dataclass(frozen=True)
class NodeParams:
    """Class-level parameters used when minting nodes."""

    N: int = 8
    max_in: Optional[int] = None
    max_out: Optional[int] = None
    peer_R: float = 1.0
    # a saturated superpeer forwards a full copy to each of N=8 downloaders
    superpeer_R: float = 8.0
    source_R: float = 1.0
    source_dgmax: float = 1.5
    superpeer_dgmax: float = 2.0
    peer_dgmax_low: float = 0.5
    peer_dgmax_high: float = 1.0
    peer_dgmax_fixed: Optional[float] = None

    @property
    def in_limit(self) -> int:
        return self.N if self.max_in is None else self.max_in

    @property
    def out_limit(self) -> int:
        return self.N if self.max_out is None else self.max_out

    def validate(self) -> None:
        if self.N < 1:
            raise ConfigurationError(f"N must be >= 1, got {self.N}")
        if self.in_limit < 0 or self.out_limit < 0:
            raise ConfigurationError("connection limits must be >= 0")
        if not 0.0 <= self.peer_R <= 1.0:
            raise ConfigurationError(f"peer R must lie in [0, 1], got {self.peer_R}")
        if self.superpeer_R < 1.0:
            raise ConfigurationError(f"superpeer R must be >= 1, got {self.superpeer_R}")
        if self.source_R != 1.0:
            raise ConfigurationError(f"source R must equal 1, got {self.source_R}")
        if self.source_dgmax <= 0 or self.superpeer_dgmax <= 0:
            raise ConfigurationError("dg_max must be > 0")
        if not 0.0 < self.peer_dgmax_low <= self.peer_dgmax_high:
            raise ConfigurationError("peer dg_max range must satisfy 0 < low <= high")
        if self.peer_dgmax_fixed is not None and self.peer_dgmax_fixed <= 0:
            raise ConfigurationError("peer_dgmax_fixed must be > 0")


@dataclass(slots=True)
class NodeRecord:
    id: int
    cls: NodeClass
    R: float
    dg_max: float
    max_in: int
    max_out: int
    channel: int = 0
    alive: bool = True
    suspended_until: Optional[float] = None

    @property
    def suspended(self) -> bool:
        return self.suspended_until is not None

    @property
    def online(self) -> bool:
        return self.alive and self.suspended_until is None


def make_node(
    cls: NodeClass,
    node_id: int,
    channel: int,
    rng: random.Random,
    params: NodeParams = NodeParams(),
) -> NodeRecord:
    """Mint a node with its class parameters.

    Only common peers consume a random draw (``dg_max ~ U[low, high]``), so the
    RNG stream is unaffected by how many sources or superpeers exist.
    """
    params.validate()
    if cls is NodeClass.SOURCE:
        R, dg_max = params.source_R, params.source_dgmax
    elif cls is NodeClass.SUPERPEER:
        R, dg_max = params.superpeer_R, params.superpeer_dgmax
    else:
        R = params.peer_R
        if params.peer_dgmax_fixed is not None:
            dg_max = params.peer_dgmax_fixed
        else:
            dg_max = rng.uniform(params.peer_dgmax_low, params.peer_dgmax_high)
    return NodeRecord(node_id, cls, R, dg_max, params.in_limit, params.out_limit, channel)


@dataclass
class OverlayGraph:
    nodes: dict[int, NodeRecord] = field(default_factory=dict)
    # downloader -> uploaders it pulls from
    outgoing: dict[int, set[int]] = field(default_factory=dict)
    # uploader -> downloaders it feeds
    incoming: dict[int, set[int]] = field(default_factory=dict)

    def add_node(self, node: NodeRecord) -> None:
        if node.id in self.nodes:
            raise GraphError(f"node {node.id} already present")
        self.nodes[node.id] = node
        self.outgoing[node.id] = set()
        self.incoming[node.id] = set()

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def n_in(self, node_id: int) -> int:
        return len(self.incoming[node_id])

    def n_out(self, node_id: int) -> int:
        return len(self.outgoing[node_id])

    def has_edge(self, downloader: int, uploader: int) -> bool:
        return uploader in self.outgoing.get(downloader, ())

    def edges(self) -> Iterator[tuple[int, int]]:
        for a in sorted(self.outgoing):
            for i in sorted(self.outgoing[a]):
                yield a, i

    def edge_count(self) -> int:
        return sum(len(s) for s in self.outgoing.values())

    def add_edge(self, downloader: int, uploader: int) -> None:
        try:
            a = self.nodes[downloader]
            i = self.nodes[uploader]
        except KeyError as exc:
            raise MissingNode(f"node {exc.args[0]} not in graph") from None
        if a.cls is NodeClass.SOURCE:
            raise SourceAsDownloader(f"source {downloader} cannot download")
        if downloader == uploader:
            raise InvalidEdge(f"self-loop on {downloader}")
        if a.channel != i.channel:
            raise InvalidEdge(f"{downloader} and {uploader} are on different channels")
        if not (a.online and i.online):
            raise InvalidEdge(f"edge {downloader}->{uploader} touches an offline node")
        if uploader in self.outgoing[downloader]:
            raise DuplicateEdge(f"edge {downloader}->{uploader} exists")
        if len(self.outgoing[downloader]) >= a.max_out:
            raise CapacityExceeded(f"downloader {downloader} is at max_out={a.max_out}")
        if len(self.incoming[uploader]) >= i.max_in:
            raise CapacityExceeded(f"uploader {uploader} is at max_in={i.max_in}")
        self.outgoing[downloader].add(uploader)
        self.incoming[uploader].add(downloader)

    def remove_edge(self, downloader: int, uploader: int) -> None:
        ups = self.outgoing.get(downloader)
        if ups is None or uploader not in ups:
            raise MissingEdge(f"edge {downloader}->{uploader} absent")
        ups.remove(uploader)
        self.incoming[uploader].remove(downloader)

    def drop_edges(self, node_id: int) -> int:
        """Remove every edge touching ``node_id``; return how many were removed."""
        if node_id not in self.nodes:
            raise MissingNode(f"node {node_id} not in graph")
        removed = 0
        for i in self.outgoing[node_id]:
            self.incoming[i].discard(node_id)
            removed += 1
        for a in self.incoming[node_id]:
            self.outgoing[a].discard(node_id)
            removed += 1
        self.outgoing[node_id] = set()
        self.incoming[node_id] = set()
        return removed

    def remove_node(self, node_id: int) -> NodeRecord:
        self.drop_edges(node_id)
        del self.outgoing[node_id]
        del self.incoming[node_id]
        return self.nodes.pop(node_id)

    def check_invariants(self) -> None:
        """Assert capacity, direction and channel invariants over the whole graph."""
        for a, ups in self.outgoing.items():
            na = self.nodes[a]
            assert len(ups) <= na.max_out, f"{a} exceeds max_out"
            assert len(self.incoming[a]) <= na.max_in, f"{a} exceeds max_in"
            if na.cls is NodeClass.SOURCE:
                assert not ups, f"source {a} downloads"
            if not na.online:
                assert not ups and not self.incoming[a], f"offline node {a} holds edges"
            for i in ups:
                assert i != a, f"self-loop on {a}"
                assert a in self.incoming[i], f"direction mismatch on {a}->{i}"
                assert self.nodes[i].channel == na.channel, f"cross-channel edge {a}->{i}"
        for i, downs in self.incoming.items():
            for a in downs:
                assert i in self.outgoing[a], f"direction mismatch on {a}->{i}"

    def copy(self) -> "OverlayGraph":
        g = OverlayGraph()
        for nid, rec in self.nodes.items():
            g.nodes[nid] = NodeRecord(
                rec.id, rec.cls, rec.R, rec.dg_max, rec.max_in, rec.max_out,
                rec.channel, rec.alive, rec.suspended_until,
            )
            g.outgoing[nid] = set(self.outgoing[nid])
            g.incoming[nid] = set(self.incoming[nid])
        return g

    def same_as(self, other: "OverlayGraph") -> bool:
        return (
            self.nodes.keys() == other.nodes.keys()
            and all(self.outgoing[k] == other.outgoing[k] for k in self.nodes)
            and all(self.incoming[k] == other.incoming[k] for k in self.nodes)
        )


def dump_graph(g: OverlayGraph, out: TextIO) -> None:
    """Write the node table then the edge list.

    Node lines are ``id class R dg_max channel``; edge lines are
    ``downloader_id uploader_id``. A blank line separates the two blocks.
    """
    for nid in sorted(g.nodes):
        n = g.nodes[nid]
        out.write(f"{n.id} {n.cls.value} {n.R!r} {n.dg_max!r} {n.channel}\n")
    out.write("\n")
    for a, i in g.edges():
        out.write(f"{a} {i}\n")


def load_graph(lines: Iterable[str], N: int = 8) -> OverlayGraph:
    g = OverlayGraph()
    it = iter(lines)
    for line in it:
        if not line.strip():
            break
        nid, cls, R, dg_max, channel = line.split()
        g.add_node(NodeRecord(int(nid), NodeClass(cls), float(R), float(dg_max), N, N, int(channel)))
    for line in it:
        if line.strip():
            a, i = line.split()
            g.add_edge(int(a), int(i))
    return g
