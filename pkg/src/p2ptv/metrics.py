"""Goodput snapshots at three granularities: global means, per-node rows, traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .goodput import GoodputAssignment
from .model import NodeClass, OverlayGraph

SNAPSHOT_HEADER = ["time", "mean_dg_peers", "mean_ug_peers", "mean_dg_all", "mean_ug_all", "alive_peers", "suspended"]
TRACE_HEADER = ["time", "dg", "ug_per_conn", "n_in", "n_out"]
SWEEP_HEADER = ["param_name", "param_value", "replication", "seed", "mean_dg", "mean_ug"]


class EmptyWindow(ValueError):
    pass


class UnknownNode(KeyError):
    pass


@dataclass(frozen=True)
class NodeRow:
    dg: float
    ug_per_conn: float
    cls: NodeClass
    n_in: int
    n_out: int
    online: bool = True


@dataclass(frozen=True)
class Aggregates:
    mean_dg_peers: float
    mean_ug_peers: float
    mean_dg_all: float
    mean_ug_all: float
    alive_peer_count: int
    suspended_count: int

    def as_row(self) -> list:
        return [
            self.mean_dg_peers,
            self.mean_ug_peers,
            self.mean_dg_all,
            self.mean_ug_all,
            self.alive_peer_count,
            self.suspended_count,
        ]


@dataclass
class Snapshot:
    time: float
    per_node: dict[int, NodeRow]
    aggregates: Aggregates


@dataclass(frozen=True)
class SummaryRow:
    mean_dg: float
    mean_ug: float
    snapshots: int


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def aggregate_rows(rows: Iterable[NodeRow]) -> Aggregates:
    """Means over online nodes only; suspended peers are counted, not averaged."""
    dg_p: list[float] = []
    ug_p: list[float] = []
    dg_all: list[float] = []
    ug_all: list[float] = []
    suspended = 0
    for row in rows:
        if not row.online:
            if row.cls is NodeClass.PEER:
                suspended += 1
            continue
        dg_all.append(row.dg)
        ug_all.append(row.ug_per_conn)
        if row.cls is NodeClass.PEER:
            dg_p.append(row.dg)
            ug_p.append(row.ug_per_conn)
    return Aggregates(_mean(dg_p), _mean(ug_p), _mean(dg_all), _mean(ug_all), len(dg_p), suspended)


def node_rows(g: OverlayGraph, assignment: GoodputAssignment) -> dict[int, NodeRow]:
    rows = {}
    dg, ug = assignment.dg, assignment.ug_per_conn
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        rows[nid] = NodeRow(
            dg.get(nid, 0.0),
            ug.get(nid, 0.0),
            node.cls,
            len(g.incoming[nid]),
            len(g.outgoing[nid]),
            node.online,
        )
    return rows


class MetricsRecorder:
    """Append-only store of snapshots.

    Aggregates always cover the whole population. Per-node rows are kept for
    the tracked ids only, or for every node when ``keep_per_node`` is set.
    """

    def __init__(self, tracked: Sequence[int] = (), keep_per_node: bool = False) -> None:
        self.tracked = list(tracked)
        self.keep_per_node = keep_per_node
        self.snapshots: list[Snapshot] = []

    def record(self, time: float, g: OverlayGraph, assignment: GoodputAssignment) -> Snapshot:
        rows = node_rows(g, assignment)
        aggregates = aggregate_rows(rows.values())
        if not self.keep_per_node:
            rows = {nid: rows[nid] for nid in self.tracked if nid in rows}
        snap = Snapshot(time, rows, aggregates)
        self.snapshots.append(snap)
        return snap


def aggregate_over_window(snapshots: Sequence[Snapshot], t_from: float, t_to: float) -> SummaryRow:
    """Average the peer means over snapshots with ``t_from <= time <= t_to``.

    Snapshots are equally spaced, so the plain mean is the time average.
    """
    if not t_from < t_to:
        raise ValueError(f"window needs t_from < t_to, got [{t_from}, {t_to}]")
    inside = [s for s in snapshots if t_from <= s.time <= t_to]
    if not inside:
        raise EmptyWindow(f"no snapshots in [{t_from}, {t_to}]")
    return SummaryRow(
        _mean([s.aggregates.mean_dg_peers for s in inside]),
        _mean([s.aggregates.mean_ug_peers for s in inside]),
        len(inside),
    )


def per_node_series(snapshots: Sequence[Snapshot], node_id: int) -> list[tuple[float, float, float, int, int]]:
    """``(time, dg, ug_per_conn, n_in, n_out)`` for every snapshot holding ``node_id``."""
    series = [
        (s.time, r.dg, r.ug_per_conn, r.n_in, r.n_out)
        for s in snapshots
        if (r := s.per_node.get(node_id)) is not None
    ]
    if not series:
        raise UnknownNode(node_id)
    return series


def write_snapshots_csv(path: Path, snapshots: Sequence[Snapshot]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_HEADER)
        for s in snapshots:
            w.writerow([repr(s.time), *(_fmt(v) for v in s.aggregates.as_row())])


def write_trace_csv(path: Path, series: Sequence[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in series:
            w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def steady_window(duration: float, warmup_fraction: float) -> tuple[float, float]:
    return warmup_fraction * duration, duration


def time_average(series: Sequence[tuple], column: int, t_from: float = 0.0, t_to: Optional[float] = None) -> float:
    values = [row[column] for row in series if row[0] >= t_from and (t_to is None or row[0] <= t_to)]
    if not values:
        raise EmptyWindow(f"no samples in [{t_from}, {t_to}]")
    return sum(values) / len(values)
