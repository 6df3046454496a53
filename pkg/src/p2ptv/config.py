"""Scenario configuration and its INI-file loader.

Config files are flat INI with one section per concern::

    [scenario]
    peers = 1200
    superpeers = 16
    sources = 4
    duration = 2000

    [node]
    N = 8
    peer_R = 1.0

Unknown sections or keys and duplicate keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .goodput import SolverSettings
from .model import ConfigurationError, NodeParams


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class PeerTimers:
    tracker_query_period: float = 5.0
    goodput_monitor_period: float = 1.0
    suspension_duration: float = 30.0
    # first watchability check happens this long after a (re)join connects
    watch_grace: float = 5.0


@dataclass(frozen=True)
class ChurnSettings:
    enabled: bool = True
    interval: float = 1.0
    p_add: float = 0.5
    min_population: Optional[int] = None
    max_population: Optional[int] = None

    def bounds(self, initial_peers: int) -> tuple[int, int]:
        lo = self.min_population if self.min_population is not None else math.floor(0.8 * initial_peers)
        hi = self.max_population if self.max_population is not None else math.ceil(1.2 * initial_peers)
        return lo, hi


@dataclass(frozen=True)
class ScenarioConfig:
    peers: int = 1200
    superpeers: int = 16
    sources: int = 4
    channels: int = 1
    duration: float = 2000.0
    seed: int = 1
    node: NodeParams = field(default_factory=NodeParams)
    timers: PeerTimers = field(default_factory=PeerTimers)
    churn: ChurnSettings = field(default_factory=ChurnSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    sample_size: int = 50
    # "prospective": R*dg/(n+1), the rate a new downloader would get;
    # "current": the uploader's ug_per_conn from the last epoch
    advertise: str = "prospective"
    watch_threshold: float = 0.5
    superpeer_maintenance: bool = True
    metrics_period: float = 1.0
    warmup_fraction: float = 0.2
    trace_count: int = 2
    trace_ids: tuple[int, ...] = ()
    keep_per_node: bool = False
    check_invariants: bool = False
    output_dir: str = "out"

    def validate(self) -> "ScenarioConfig":
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ValidationError(msg)

        need(self.sources >= 1, f"sources must be >= 1, got {self.sources}")
        need(self.peers >= 0, f"peers must be >= 0, got {self.peers}")
        need(self.superpeers >= 0, f"superpeers must be >= 0, got {self.superpeers}")
        need(self.channels >= 1, f"channels must be >= 1, got {self.channels}")
        need(self.sources >= self.channels, "every channel needs a source: sources must be >= channels")
        need(self.duration > 0, f"duration must be > 0, got {self.duration}")
        need(self.sample_size >= 1, "sample_size must be >= 1")
        need(self.advertise in ("prospective", "current"), f"advertise must be prospective or current, got {self.advertise!r}")
        need(self.metrics_period > 0, "metrics_period must be > 0")
        need(0.0 <= self.warmup_fraction < 1.0, "warmup_fraction must lie in [0, 1)")
        need(self.trace_count >= 0, "trace_count must be >= 0")
        t = self.timers
        need(
            min(t.tracker_query_period, t.goodput_monitor_period, t.suspension_duration) > 0,
            "timer periods must be strictly positive",
        )
        need(t.watch_grace >= 0, "watch_grace must be >= 0")
        c = self.churn
        need(c.interval > 0, "churn interval must be > 0")
        need(0.0 <= c.p_add <= 1.0, f"churn p_add must lie in [0, 1], got {c.p_add}")
        lo, hi = c.bounds(self.peers)
        need(0 <= lo <= hi, f"churn bounds must satisfy 0 <= min <= max, got {lo}, {hi}")
        try:
            self.node.validate()
        except ConfigurationError as exc:
            raise ValidationError(str(exc)) from None
        return self

    def replace(self, **changes: Any) -> "ScenarioConfig":
        """Copy with top-level or dotted (``node.N``) fields changed."""
        nested: dict[str, dict[str, Any]] = {}
        flat: dict[str, Any] = {}
        for key, value in changes.items():
            if "." in key:
                section, name = key.split(".", 1)
                nested.setdefault(section, {})[name] = value
            else:
                flat[key] = value
        for section, values in nested.items():
            flat[section] = dataclasses.replace(getattr(self, section), **values)
        return dataclasses.replace(self, **flat)


def desk_preset(**changes: Any) -> ScenarioConfig:
    """Baseline ratios scaled down: 300 peers, 4 superpeers, 1 source."""
    base = ScenarioConfig(peers=300, superpeers=4, sources=1, duration=600.0)
    return base.replace(**changes).validate() if changes else base.validate()


def baseline() -> ScenarioConfig:
    return ScenarioConfig().validate()


# section -> key -> (target field, parser)
def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(parse):
    def inner(text: str):
        return None if text.strip().lower() in ("", "none") else parse(text)

    return inner


def _ids(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


_SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "scenario": {
        "peers": ("peers", int),
        "superpeers": ("superpeers", int),
        "sources": ("sources", int),
        "channels": ("channels", int),
        "duration": ("duration", float),
        "seed": ("seed", int),
    },
    "node": {
        "n": ("node.N", int),
        "max_in": ("node.max_in", _opt(int)),
        "max_out": ("node.max_out", _opt(int)),
        "peer_r": ("node.peer_R", float),
        "superpeer_r": ("node.superpeer_R", float),
        "source_dgmax": ("node.source_dgmax", float),
        "superpeer_dgmax": ("node.superpeer_dgmax", float),
        "peer_dgmax_low": ("node.peer_dgmax_low", float),
        "peer_dgmax_high": ("node.peer_dgmax_high", float),
        "peer_dgmax_fixed": ("node.peer_dgmax_fixed", _opt(float)),
    },
    "protocol": {
        "sample_size": ("sample_size", int),
        "advertise": ("advertise", str),
        "tracker_query_period": ("timers.tracker_query_period", float),
        "goodput_monitor_period": ("timers.goodput_monitor_period", float),
        "suspension_duration": ("timers.suspension_duration", float),
        "watch_grace": ("timers.watch_grace", float),
        "watch_threshold": ("watch_threshold", float),
        "superpeer_maintenance": ("superpeer_maintenance", _bool),
    },
    "churn": {
        "enabled": ("churn.enabled", _bool),
        "interval": ("churn.interval", float),
        "p_add": ("churn.p_add", float),
        "min_population": ("churn.min_population", _opt(int)),
        "max_population": ("churn.max_population", _opt(int)),
    },
    "solver": {
        "tolerance": ("solver.tolerance", float),
        "max_sweeps": ("solver.max_sweeps", int),
    },
    "metrics": {
        "period": ("metrics_period", float),
        "warmup_fraction": ("warmup_fraction", float),
        "trace_count": ("trace_count", int),
        "trace_ids": ("trace_ids", _ids),
        "keep_per_node": ("keep_per_node", _bool),
        "check_invariants": ("check_invariants", _bool),
    },
    "output": {
        "dir": ("output_dir", str),
    },
}


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    parser = configparser.ConfigParser(strict=True, interpolation=None, default_section="__none__")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None

    changes: dict[str, Any] = {}
    for section in parser.sections():
        schema = _SCHEMA.get(section.lower())
        if schema is None:
            raise ParseError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            entry = schema.get(key.lower())
            if entry is None:
                raise ParseError(f"{source}: unknown key {key!r} in [{section}]")
            target, conv = entry
            try:
                changes[target] = conv(raw)
            except ValueError as exc:
                raise ParseError(f"{source}: [{section}] {key}: {exc}") from None
    try:
        config = ScenarioConfig().replace(**changes)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return config.validate()


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def dump_config(config: ScenarioConfig) -> str:
    """Render a config back to INI text accepted by :func:`parse_config`."""
    lines: list[str] = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (target, _) in keys.items():
            obj: Any = config
            for part in target.split("."):
                obj = getattr(obj, part)
            if obj is None:
                text = "none"
            elif isinstance(obj, tuple):
                text = ",".join(str(x) for x in obj)
            elif isinstance(obj, float):
                text = repr(obj)
            else:
                text = str(obj)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)
