"""Independent reference computations used by the solver tests."""

import random

import numpy as np

from p2ptv.model import NodeClass, NodeRecord, OverlayGraph


def random_graph(rng: random.Random, size: int, acyclic: bool, edge_p: float = 0.3) -> OverlayGraph:
    """Small random overlay: node 0 is a source, a few superpeers, the rest peers.

    With ``acyclic`` every edge points from a higher id (downloader) to a lower
    id (uploader), so the uploader -> downloader orientation is a DAG.
    """
    g = OverlayGraph()
    for nid in range(size):
        if nid == 0 or (nid < 3 and rng.random() < 0.3):
            g.add_node(NodeRecord(nid, NodeClass.SOURCE, 1.0, 1.5, size, size))
        elif rng.random() < 0.2:
            g.add_node(NodeRecord(nid, NodeClass.SUPERPEER, rng.uniform(1.0, 3.0), 2.0, size, size))
        else:
            g.add_node(NodeRecord(nid, NodeClass.PEER, rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0), size, size))
    for a in range(size):
        if g.nodes[a].cls is NodeClass.SOURCE:
            continue
        for i in range(size):
            if i == a or (acyclic and i > a):
                continue
            if rng.random() < edge_p:
                g.add_edge(a, i)
    return g


def brute_force_batch(graphs: list[OverlayGraph], rounds: int = 100_000) -> list[dict[int, float]]:
    """Apply the goodput update ``rounds`` times from zero, all graphs at once.

    Dense per-graph matrices padded to a common size; no convergence test.
    """
    size = max(len(g) for g in graphs)
    B = len(graphs)
    M = np.zeros((B, size, size))  # M[b, a, i] = R_i / n_i if a downloads from i
    cap = np.zeros((B, size))
    src = np.zeros((B, size), dtype=bool)
    order = []
    for b, g in enumerate(graphs):
        ids = sorted(g.nodes)
        order.append(ids)
        pos = {nid: k for k, nid in enumerate(ids)}
        for nid in ids:
            node = g.nodes[nid]
            cap[b, pos[nid]] = node.dg_max
            src[b, pos[nid]] = node.cls is NodeClass.SOURCE
        for a, i in g.edges():
            M[b, pos[a], pos[i]] = g.nodes[i].R / len(g.incoming[i])
    dg = np.where(src, cap, 0.0)
    for _ in range(rounds):
        dg = np.minimum(np.einsum("bai,bi->ba", M, dg), cap)
        dg[src] = cap[src]
    return [{nid: float(dg[b, k]) for k, nid in enumerate(ids)} for b, ids in enumerate(order)]
