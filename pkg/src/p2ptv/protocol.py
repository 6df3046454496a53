"""Overlay self-organisation: tracker, peer maintenance, watchability and churn."""

from __future__ import annotations

import logging
import random
from typing import Callable, Generic, Iterator, Optional, TextIO, TypeVar

from .config import ScenarioConfig
from .engine import Engine, Event, EventKind
from .goodput import GoodputAssignment, NonConvergence, solve
from .metrics import MetricsRecorder, Snapshot
from .model import CapacityExceeded, NodeClass, NodeRecord, OverlayGraph, make_node

log = logging.getLogger(__name__)

T = TypeVar("T")


class IndexedSet(Generic[T]):
    """Set with O(1) add/remove and uniform random choice; iteration order is deterministic."""

    def __init__(self) -> None:
        self._items: list[T] = []
        self._pos: dict[T, int] = {}

    def add(self, item: T) -> bool:
        if item in self._pos:
            return False
        self._pos[item] = len(self._items)
        self._items.append(item)
        return True

    def remove(self, item: T) -> bool:
        k = self._pos.pop(item, None)
        if k is None:
            return False
        last = self._items.pop()
        if k < len(self._items):
            self._items[k] = last
            self._pos[last] = k
        return True

    def __contains__(self, item: object) -> bool:
        return item in self._pos

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[T]:
        return iter(self._items)

    def sample(self, k: int, rng: random.Random) -> list[T]:
        return rng.sample(self._items, min(k, len(self._items)))

    def choice(self, rng: random.Random) -> T:
        return self._items[rng.randrange(len(self._items))]


class Tracker:
    """Single in-simulation tracker: channel -> online node ids."""

    def __init__(self, sample_size: int = 50) -> None:
        self.sample_size = sample_size
        self.registry: dict[int, IndexedSet[int]] = {}

    def register(self, node_id: int, channel: int) -> None:
        if not self.registry.setdefault(channel, IndexedSet()).add(node_id):
            log.debug("node %d already registered on channel %d", node_id, channel)

    def unregister(self, node_id: int, channel: int) -> None:
        members = self.registry.get(channel)
        if members is None or not members.remove(node_id):
            log.debug("node %d was not registered on channel %d", node_id, channel)

    def members(self, channel: int) -> IndexedSet[int]:
        return self.registry.get(channel, IndexedSet())

    def sample(
        self,
        channel: int,
        requester: int,
        rng: random.Random,
        assignment: Optional[GoodputAssignment] = None,
    ) -> list[tuple[int, float]]:
        """Uniform sample of up to ``sample_size`` other nodes with their advertised ``ug_per_conn``."""
        members = self.members(channel)
        picked = members.sample(self.sample_size + 1, rng)
        if requester in members:
            picked = [n for n in picked if n != requester]
        picked = picked[: self.sample_size]
        if assignment is None:
            return [(n, 0.0) for n in picked]
        return [(n, assignment.ug_per_conn.get(n, 0.0)) for n in picked]


def rank_candidates(candidates: list[tuple[int, float]]) -> list[tuple[int, float]]:
    """Best first: highest advertised rate, then lowest id."""
    return sorted(candidates, key=lambda c: (-c[1], c[0]))


def maintenance_step(
    g: OverlayGraph,
    peer: int,
    candidates: list[tuple[int, float]],
    advertised: Callable[[int], float],
) -> list[tuple[str, int, int]]:
    """Fill free download slots from the ranking, then try one strict-improvement swap.

    Returns the applied mutations as ``("add"|"remove", downloader, uploader)``.
    """
    node = g.nodes[peer]
    current = g.outgoing[peer]
    ranked = [c for c in rank_candidates(candidates) if c[0] not in current]
    changes: list[tuple[str, int, int]] = []
    rest: list[tuple[int, float]] = []
    for k, (cand, rate) in enumerate(ranked):
        if len(current) >= node.max_out:
            rest = ranked[k:]
            break
        try:
            g.add_edge(peer, cand)
        except CapacityExceeded:
            continue
        changes.append(("add", peer, cand))

    if len(current) >= node.max_out and current and rest:
        worst = min(current, key=lambda u: (advertised(u), -u))
        worst_rate = advertised(worst)
        for cand, rate in rest:
            if rate <= worst_rate:
                break
            if len(g.incoming[cand]) >= g.nodes[cand].max_in:
                continue
            before = sum(advertised(u) for u in current)
            after = before - worst_rate + rate
            assert after >= before, "swap must not lower the decision-time rate sum"
            g.remove_edge(peer, worst)
            g.add_edge(peer, cand)
            changes.append(("remove", peer, worst))
            changes.append(("add", peer, cand))
            break
    return changes


class Simulation:
    """One self-contained scenario run: engine, overlay, tracker and metrics."""

    def __init__(self, config: ScenarioConfig, event_log: Optional[TextIO] = None) -> None:
        self.config = config.validate()
        self.engine = Engine(config.seed, trace=event_log)
        self.rng = self.engine.rng
        self.graph = OverlayGraph()
        self.tracker = Tracker(config.sample_size)
        self.assignment = GoodputAssignment()
        self.recorder = MetricsRecorder(keep_per_node=config.keep_per_node)
        self.peers: IndexedSet[int] = IndexedSet()
        # bumped on suspend/rejoin so stale periodic events are discarded
        self.generation: dict[int, int] = {}
        self.next_id = 0
        self.protected: set[int] = set()
        self.churn_bounds = config.churn.bounds(config.peers)
        self.population_log: list[int] = []

        e = self.engine
        e.on(EventKind.MAINTENANCE, self._on_maintenance)
        e.on(EventKind.WATCH, self._on_watch)
        e.on(EventKind.JOIN, self._on_join)
        e.on(EventKind.CHURN, self._on_churn)
        e.on(EventKind.METRICS, self._on_metrics)
        self._booted = False

    # -- setup -----------------------------------------------------------

    def _mint(self, cls: NodeClass, channel: int) -> NodeRecord:
        node = make_node(cls, self.next_id, channel, self.rng, self.config.node)
        self.next_id += 1
        self.graph.add_node(node)
        self.generation[node.id] = 0
        self.tracker.register(node.id, channel)
        if cls is NodeClass.PEER:
            self.peers.add(node.id)
        return node

    def _runs_maintenance(self, node: NodeRecord) -> bool:
        if node.cls is NodeClass.PEER:
            return True
        return node.cls is NodeClass.SUPERPEER and self.config.superpeer_maintenance

    def bootstrap(self) -> None:
        """Create every node with no edges and schedule the periodic machinery."""
        if self._booted:
            raise RuntimeError("bootstrap already ran")
        self._booted = True
        cfg = self.config
        nodes = []
        for k in range(cfg.sources):
            nodes.append(self._mint(NodeClass.SOURCE, k % cfg.channels))
        for k in range(cfg.superpeers):
            nodes.append(self._mint(NodeClass.SUPERPEER, k % cfg.channels))
        for k in range(cfg.peers):
            nodes.append(self._mint(NodeClass.PEER, k % cfg.channels))

        t = cfg.timers
        for node in nodes:
            if not self._runs_maintenance(node):
                continue
            first = self.rng.uniform(0.0, t.tracker_query_period)
            self.engine.schedule(first, EventKind.MAINTENANCE, node.id, 0)
            if node.cls is NodeClass.PEER:
                watch = first + t.watch_grace + self.rng.uniform(0.0, t.goodput_monitor_period)
                self.engine.schedule(watch, EventKind.WATCH, node.id, 0)
        if cfg.churn.enabled:
            self.engine.schedule(cfg.churn.interval, EventKind.CHURN)
        self.engine.schedule(cfg.metrics_period, EventKind.METRICS)
        self._select_traces()

    def _select_traces(self) -> None:
        cfg = self.config
        if cfg.trace_ids:
            missing = [n for n in cfg.trace_ids if n not in self.graph]
            if missing:
                raise ValueError(f"trace ids not in the initial population: {missing}")
            tracked = list(cfg.trace_ids)
        else:
            # separate stream: the number of traces must not perturb the run
            pick = random.Random(f"traces:{cfg.seed}")
            by_cls = {c: sorted(n for n, r in self.graph.nodes.items() if r.cls is c) for c in NodeClass}
            tracked = []
            for cls in (NodeClass.PEER, NodeClass.SUPERPEER, NodeClass.SOURCE):
                if len(tracked) < cfg.trace_count and by_cls[cls]:
                    tracked.append(pick.choice(by_cls[cls]))
            rest = sorted(set(self.graph.nodes) - set(tracked))
            pick.shuffle(rest)
            tracked.extend(rest[: max(0, cfg.trace_count - len(tracked))])
        self.recorder.tracked = tracked
        self.protected = set(tracked)

    # -- handlers --------------------------------------------------------

    def _current(self, event: Event) -> Optional[NodeRecord]:
        node = self.graph.nodes.get(event.node)
        if node is None or not node.online or self.generation[node.id] != event.payload:
            return None
        return node

    def _advertised(self, node_id: int) -> float:
        return self.assignment.ug_per_conn.get(node_id, 0.0)

    def _prospective(self, node_id: int) -> float:
        """Rate a new downloader would get from ``node_id``: R * dg / (n + 1)."""
        node = self.graph.nodes[node_id]
        return node.R * self.assignment.dg.get(node_id, 0.0) / (len(self.graph.incoming[node_id]) + 1)

    def maintenance_tick(self, peer: int) -> list[tuple[str, int, int]]:
        node = self.graph.nodes[peer]
        candidates = self.tracker.sample(node.channel, peer, self.rng, self.assignment)
        if self.config.advertise == "prospective":
            candidates = [(n, self._prospective(n)) for n, _ in candidates]
        changes = maintenance_step(self.graph, peer, candidates, self._advertised)
        for op, a, i in changes:
            self.engine.log(op, a, str(i))
        return changes

    def _on_maintenance(self, event: Event) -> None:
        node = self._current(event)
        if node is None:
            return
        self.maintenance_tick(node.id)
        self.engine.schedule_in(self.config.timers.tracker_query_period, EventKind.MAINTENANCE, node.id, event.payload)

    def watchability_check(self, peer: int) -> bool:
        """Suspend ``peer`` if its download goodput is not above the threshold."""
        node = self.graph.nodes[peer]
        dg = self.assignment.dg.get(peer, 0.0)
        if dg > self.config.watch_threshold:
            return False
        self.suspend(node)
        return True

    def suspend(self, node: NodeRecord) -> None:
        now = self.engine.now
        self.graph.drop_edges(node.id)
        self.tracker.unregister(node.id, node.channel)
        node.suspended_until = now + self.config.timers.suspension_duration
        self.generation[node.id] += 1
        self.engine.log("suspend", node.id, repr(node.suspended_until))
        self.engine.schedule(node.suspended_until, EventKind.JOIN, node.id, self.generation[node.id])

    def _on_watch(self, event: Event) -> None:
        node = self._current(event)
        if node is None or node.cls is not NodeClass.PEER:
            return
        if not self.watchability_check(node.id):
            self.engine.schedule_in(self.config.timers.goodput_monitor_period, EventKind.WATCH, node.id, event.payload)

    def _start(self, node: NodeRecord) -> None:
        """Kick off maintenance immediately and watchability after the grace period."""
        gen = self.generation[node.id]
        self.engine.schedule(self.engine.now, EventKind.MAINTENANCE, node.id, gen)
        if node.cls is NodeClass.PEER:
            self.engine.schedule_in(self.config.timers.watch_grace, EventKind.WATCH, node.id, gen)

    def _on_join(self, event: Event) -> None:
        node = self.graph.nodes.get(event.node)
        if node is None or self.generation[node.id] != event.payload or not node.suspended:
            return
        node.suspended_until = None
        self.generation[node.id] += 1
        self.tracker.register(node.id, node.channel)
        self.engine.log("rejoin", node.id)
        self._start(node)

    def churn_tick(self) -> Optional[tuple[str, int]]:
        cfg = self.config
        lo, hi = self.churn_bounds
        u = self.rng.random()
        if u < cfg.churn.p_add:
            if len(self.peers) >= hi:
                return None
            channel = self.rng.randrange(cfg.channels)
            node = self._mint(NodeClass.PEER, channel)
            self.engine.log("join", node.id, f"dg_max={node.dg_max!r}")
            self._start(node)
            return ("join", node.id)
        if len(self.peers) <= lo:
            return None
        victim = self.peers.choice(self.rng)
        if victim in self.protected:
            return None
        node = self.graph.remove_node(victim)
        assert node.cls is NodeClass.PEER
        self.peers.remove(victim)
        if not node.suspended:
            self.tracker.unregister(victim, node.channel)
        self.engine.log("leave", victim)
        return ("leave", victim)

    def _on_churn(self, event: Event) -> None:
        self.churn_tick()
        self.population_log.append(len(self.peers))
        self.engine.schedule_in(self.config.churn.interval, EventKind.CHURN)

    def evaluation_epoch(self) -> Snapshot:
        if self.config.check_invariants:
            self.graph.check_invariants()
            self.check_tracker()
        self.assignment = solve(self.graph, self.config.solver, check_monotone=self.config.check_invariants)
        return self.recorder.record(self.engine.now, self.graph, self.assignment)

    def _on_metrics(self, event: Event) -> None:
        try:
            self.evaluation_epoch()
        except NonConvergence as exc:
            raise NonConvergence(f"at epoch t={self.engine.now!r}: {exc}") from exc
        self.engine.schedule_in(self.config.metrics_period, EventKind.METRICS)

    def check_tracker(self) -> None:
        for channel, members in self.tracker.registry.items():
            for nid in members:
                node = self.graph.nodes[nid]
                assert node.online and node.channel == channel, f"tracker lists offline node {nid}"
        for nid, node in self.graph.nodes.items():
            if node.online:
                assert nid in self.tracker.members(node.channel), f"online node {nid} not registered"

    # -- driving ---------------------------------------------------------

    def run(self, until: Optional[float] = None, every_event: bool = False) -> int:
        """Advance to ``until`` (default: the configured duration).

        With ``check_invariants`` set, graph and tracker invariants are checked
        at every evaluation epoch; ``every_event`` checks after every event time.
        """
        if not self._booted:
            self.bootstrap()
        end = self.config.duration if until is None else until
        if every_event:
            return self._run_checked(end)
        return self.engine.run_until(end)

    def _run_checked(self, end: float) -> int:
        count = 0
        while (nxt := self.engine.peek()) is not None and nxt.fire_at <= end:
            count += self.engine.run_until(nxt.fire_at)
            self.graph.check_invariants()
            self.check_tracker()
        return count + self.engine.run_until(end)

    @property
    def snapshots(self) -> list[Snapshot]:
        return self.recorder.snapshots
