"""Seeded scenario runs, parameter sweeps and their CSV outputs."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .config import ScenarioConfig, ValidationError
from .metrics import (
    SWEEP_HEADER,
    Snapshot,
    SummaryRow,
    aggregate_over_window,
    per_node_series,
    steady_window,
    write_snapshots_csv,
    write_trace_csv,
)
from .model import NodeRecord
from .protocol import Simulation

log = logging.getLogger(__name__)

SWEEP_PARAMS = {
    "peer_R": "node.peer_R",
    "N": "node.N",
    "sources": "sources",
    "superpeers": "superpeers",
}


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    snapshots: list[Snapshot]
    traces: dict[int, list[tuple]]
    summary: Optional[SummaryRow]
    events: int
    event_log: Optional[str] = None
    files: list[Path] = field(default_factory=list)
    # records of the tracked nodes as they stood at the end of the run
    tracked: dict[int, NodeRecord] = field(default_factory=dict)


def simulate(config: ScenarioConfig, event_log: bool = False) -> ScenarioResult:
    """Run one scenario in memory."""
    buf = io.StringIO() if event_log else None
    sim = Simulation(config, event_log=buf)
    events = sim.run()
    snaps = sim.snapshots
    traces = {}
    for nid in sim.recorder.tracked:
        try:
            traces[nid] = per_node_series(snaps, nid)
        except KeyError:
            traces[nid] = []
    summary = None
    t_from, t_to = steady_window(config.duration, config.warmup_fraction)
    if any(t_from <= s.time <= t_to for s in snaps):
        summary = aggregate_over_window(snaps, t_from, t_to)
    tracked = {nid: sim.graph.nodes[nid] for nid in sim.recorder.tracked if nid in sim.graph}
    return ScenarioResult(
        config, snaps, traces, summary, events, buf.getvalue() if buf else None, tracked=tracked
    )


def run_scenario(
    config: ScenarioConfig, out_dir: Optional[Path] = None, event_log: bool = False
) -> ScenarioResult:
    """Run a scenario and write ``snapshots.csv``, ``trace_<id>.csv`` (and ``events.log``)."""
    result = simulate(config, event_log=event_log)
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "snapshots.csv"
    write_snapshots_csv(path, result.snapshots)
    result.files.append(path)
    for nid, series in result.traces.items():
        path = out / f"trace_{nid}.csv"
        write_trace_csv(path, series)
        result.files.append(path)
    if result.event_log is not None:
        path = out / "events.log"
        path.write_text(result.event_log)
        result.files.append(path)
    return result


def derive_seed(base_seed: int, point: int, replication: int) -> int:
    """64-bit seed from the base seed and the sweep coordinates."""
    digest = hashlib.blake2b(
        f"{base_seed}:{point}:{replication}".encode(), digest_size=8, person=b"p2ptv-sweep"
    ).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[Any, ...]
    replications: int = 1
    base: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self) -> None:
        if self.param not in SWEEP_PARAMS:
            raise ValidationError(f"cannot sweep {self.param!r}; choose from {sorted(SWEEP_PARAMS)}")
        if not self.values:
            raise ValidationError("sweep needs at least one value")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")

    def points(self) -> list[tuple[int, Any, int, int]]:
        """``(point, value, replication, seed)`` in output order."""
        return [
            (p, v, r, derive_seed(self.base.seed, p, r))
            for p, v in enumerate(self.values)
            for r in range(self.replications)
        ]

    def config_for(self, value: Any, seed: int) -> ScenarioConfig:
        return self.base.replace(**{SWEEP_PARAMS[self.param]: value, "seed": seed})


@dataclass(frozen=True)
class SweepRow:
    param_name: str
    param_value: Any
    replication: int
    seed: int
    mean_dg: Optional[float]
    mean_ug: Optional[float]
    error: Optional[str] = None

    def as_csv(self) -> list[str]:
        if self.error is not None:
            dg = ug = f"ERROR: {self.error}"
        else:
            dg, ug = repr(self.mean_dg), repr(self.mean_ug)
        return [self.param_name, str(self.param_value), str(self.replication), str(self.seed), dg, ug]


def _run_point(spec: SweepSpec, value: Any, replication: int, seed: int) -> SweepRow:
    try:
        config = spec.config_for(value, seed).validate()
        result = simulate(config)
        if result.summary is None:
            raise ValueError("no snapshots in the steady window")
        return SweepRow(spec.param, value, replication, seed, result.summary.mean_dg, result.summary.mean_ug)
    except Exception as exc:  # a failed point is recorded, the sweep goes on
        log.warning("sweep point %s=%s rep %d failed: %s", spec.param, value, replication, exc)
        return SweepRow(spec.param, value, replication, seed, None, None, f"{type(exc).__name__}: {exc}")


def run_sweep(spec: SweepSpec, workers: int = 1, out_path: Optional[Path] = None) -> list[SweepRow]:
    """Run every (value, replication) point; rows come back in spec order."""
    points = spec.points()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point, spec, v, r, s) for _, v, r, s in points]
            rows = [f.result() for f in futures]
    else:
        rows = [_run_point(spec, v, r, s) for _, v, r, s in points]
    if out_path is not None:
        write_sweep_csv(out_path, rows)
    return rows


def write_sweep_csv(path: Path, rows: Sequence[SweepRow]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow(row.as_csv())
