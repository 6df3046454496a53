"""Download/upload goodput over the overlay graph.

A node's download goodput is the sum of the per-connection upload goodput of
the nodes it downloads from, clipped at its ``dg_max``; sources sit at their
``dg_max``. A node uploading on ``n >= 1`` incoming connections offers
``R * dg / n`` on each of them, and nothing when ``n == 0``.

The overlay is cyclic in general, so :func:`solve` returns the least fixed
point of that update, reached by iterating upward from ``dg = 0``. Goodput in
the result can always be traced back to a source or a pinned stub.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .model import NodeClass, OverlayGraph


class NonConvergence(RuntimeError):
    pass


class CycleDetected(ValueError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-9
    max_sweeps: int = 10_000

    def __post_init__(self) -> None:
        if not 0 < self.tolerance < 1:
            raise ValueError(f"tolerance must be in (0, 1), got {self.tolerance}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")


@dataclass
class GoodputAssignment:
    dg: dict[int, float] = field(default_factory=dict)
    ug_per_conn: dict[int, float] = field(default_factory=dict)
    sweeps: int = 0

    def __len__(self) -> int:
        return len(self.dg)


def solve(
    g: OverlayGraph,
    settings: SolverSettings = SolverSettings(),
    pinned: Optional[Mapping[int, float]] = None,
    check_monotone: bool = False,
) -> GoodputAssignment:
    """Least fixed point of the goodput equations by Jacobi-style Kleene sweeps.

    ``pinned`` maps node ids to a fixed per-connection upload rate; such nodes
    act as external stubs whatever their own download goodput is.
    Offline nodes hold no edges, so they come out at zero.
    """
    ids = sorted(g.nodes)
    if not ids:
        return GoodputAssignment()
    index = {nid: k for k, nid in enumerate(ids)}
    size = len(ids)

    cap = np.empty(size)
    R = np.empty(size)
    is_src = np.zeros(size, dtype=bool)
    n_in = np.empty(size)
    online = np.ones(size, dtype=bool)
    down: list[int] = []
    up: list[int] = []
    for k, nid in enumerate(ids):
        node = g.nodes[nid]
        cap[k] = node.dg_max
        R[k] = node.R
        is_src[k] = node.cls is NodeClass.SOURCE
        online[k] = node.online
        n_in[k] = len(g.incoming[nid])
        for i in g.outgoing[nid]:
            down.append(k)
            up.append(index[i])
    down_idx = np.asarray(down, dtype=np.intp)
    up_idx = np.asarray(up, dtype=np.intp)

    coef = np.divide(R, n_in, out=np.zeros(size), where=n_in > 0)
    fixed_ug = np.zeros(size)
    if pinned:
        for nid, value in pinned.items():
            k = index[nid]
            coef[k] = 0.0
            fixed_ug[k] = value
    coef[~online] = 0.0
    fixed_ug[~online] = 0.0

    src_on = is_src & online
    dg = np.zeros(size)
    dg[src_on] = cap[src_on]
    sweeps = 0
    while True:
        ug = coef * dg + fixed_ug
        new = np.minimum(np.bincount(down_idx, weights=ug[up_idx], minlength=size), cap)
        new[src_on] = cap[src_on]
        new[~online] = 0.0
        sweeps += 1
        if check_monotone and np.any(new < dg - 1e-12):
            raise AssertionError(f"Kleene sweep {sweeps} decreased a download goodput")
        delta = float(np.max(np.abs(new - dg))) if size else 0.0
        dg = new
        if delta < settings.tolerance:
            break
        if sweeps >= settings.max_sweeps:
            raise NonConvergence(
                f"no fixed point within {settings.max_sweeps} sweeps (last change {delta:.3e})"
            )

    ug = np.divide(R * dg, n_in, out=np.zeros(size), where=(n_in > 0) & online)
    if pinned:
        for nid, value in pinned.items():
            ug[index[nid]] = value
    return GoodputAssignment(
        dg=dict(zip(ids, dg.tolist())),
        ug_per_conn=dict(zip(ids, ug.tolist())),
        sweeps=sweeps,
    )


def solve_acyclic_oracle(
    g: OverlayGraph, pinned: Optional[Mapping[int, float]] = None
) -> GoodputAssignment:
    """Single pass in topological order; exact on graphs without cycles."""
    pinned = pinned or {}
    # edge uploader -> downloader; a node is ready once all its uploaders are done
    waiting = {nid: len(g.outgoing[nid]) for nid in g.nodes}
    ready = deque(sorted(nid for nid, k in waiting.items() if k == 0))
    dg: dict[int, float] = {}
    ug: dict[int, float] = {}
    while ready:
        nid = ready.popleft()
        node = g.nodes[nid]
        if not node.online:
            dg[nid] = 0.0
        elif node.cls is NodeClass.SOURCE:
            dg[nid] = node.dg_max
        else:
            total = 0.0
            for i in sorted(g.outgoing[nid]):
                total += ug[i]
            dg[nid] = min(total, node.dg_max)
        n = len(g.incoming[nid])
        if nid in pinned:
            ug[nid] = float(pinned[nid])
        elif node.online and n >= 1:
            ug[nid] = node.R * dg[nid] / n
        else:
            ug[nid] = 0.0
        for a in sorted(g.incoming[nid]):
            waiting[a] -= 1
            if waiting[a] == 0:
                ready.append(a)
    if len(dg) != len(g.nodes):
        raise CycleDetected(f"{len(g.nodes) - len(dg)} nodes sit on or behind a cycle")
    return GoodputAssignment(dg=dg, ug_per_conn=ug, sweeps=1)
