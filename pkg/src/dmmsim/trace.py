"""Allocation traces: parsing, statistics, and synthetic generation.

A trace is an ordered malloc/free event stream. The on-disk format is
line-oriented UTF-8 text:

    M <id> <size>     allocation of <size> bytes, labeled <id>
    F <id>            release of the most recent live allocation labeled <id>
    # ...             comment

Ids are opaque whitespace-free tokens (captured address values by
convention); simulated positions are never taken from them.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

MALLOC = "M"
FREE = "F"


class TraceParseError(ValueError):
    """Malformed trace input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True, slots=True)
class TraceEvent:
    kind: str  # MALLOC or FREE
    object_id: str
    size_in_b: int = 0  # > 0 for MALLOC, ignored for FREE


@dataclass(slots=True)
class Trace:
    """Ordered event sequence. Immutable by convention once built."""

    events: list[TraceEvent] = field(default_factory=list)
    dropped_zero_size: int = 0  # zero-size mallocs skipped in permissive parsing

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)


@dataclass(slots=True)
class TraceStats:
    objects: int = 0
    total_bytes: int = 0
    max_in_use_bytes: int = 0
    avg_size_in_b: float = 0.0
    memory_ops: int = 0
    distinct_sizes: set[int] = field(default_factory=set)
    max_size_in_b: int = 0
    invalid_mallocs: int = 0
    invalid_frees: int = 0

    def as_dict(self) -> dict:
        return {
            "objects": self.objects,
            "totalBytes": self.total_bytes,
            "maxInUseBytes": self.max_in_use_bytes,
            "avgSizeInB": round(self.avg_size_in_b, 2),
            "memoryOps": self.memory_ops,
            "distinctSizes": sorted(self.distinct_sizes),
            "maxSizeInB": self.max_size_in_b,
            "invalidMallocs": self.invalid_mallocs,
            "invalidFrees": self.invalid_frees,
        }


def parse_trace(lines: Iterable[str], permissive: bool = False) -> Trace:
    """Parse line-oriented trace text into a Trace.

    Malformed lines raise TraceParseError naming the offending line.
    With permissive=True, zero-size mallocs are dropped (counted in
    Trace.dropped_zero_size) instead of rejected.
    """
    events: list[TraceEvent] = []
    dropped = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        op = parts[0]
        if op == MALLOC:
            if len(parts) != 3:
                raise TraceParseError(line_no, f"malloc needs '{MALLOC} <id> <size>', got {line!r}")
            try:
                size = int(parts[2])
            except ValueError:
                raise TraceParseError(line_no, f"non-numeric size {parts[2]!r}") from None
            if size == 0:
                if permissive:
                    dropped += 1
                    continue
                raise TraceParseError(line_no, "zero-size allocation")
            if size < 0:
                raise TraceParseError(line_no, f"negative size {size}")
            events.append(TraceEvent(MALLOC, parts[1], size))
        elif op == FREE:
            if len(parts) != 2:
                raise TraceParseError(line_no, f"free needs '{FREE} <id>', got {line!r}")
            events.append(TraceEvent(FREE, parts[1]))
        else:
            raise TraceParseError(line_no, f"unknown opcode {op!r}")
    return Trace(events, dropped_zero_size=dropped)


def parse_trace_text(text: str, permissive: bool = False) -> Trace:
    return parse_trace(text.splitlines(), permissive=permissive)


def parse_trace_file(path: str, permissive: bool = False) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh, permissive=permissive)


def emit_trace(trace: Trace, stream: TextIO) -> None:
    for ev in trace.events:
        if ev.kind == MALLOC:
            stream.write(f"M {ev.object_id} {ev.size_in_b}\n")
        else:
            stream.write(f"F {ev.object_id}\n")


def trace_to_text(trace: Trace) -> str:
    out: list[str] = []
    for ev in trace.events:
        if ev.kind == MALLOC:
            out.append(f"M {ev.object_id} {ev.size_in_b}")
        else:
            out.append(f"F {ev.object_id}")
    return "\n".join(out) + ("\n" if out else "")


def write_trace_file(trace: Trace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        emit_trace(trace, fh)


def trace_stats(trace: Trace) -> TraceStats:
    """Single-pass summary of a trace.

    Frees with no live matching id count as invalid and do not change the
    live byte total. Duplicate live ids stack; the newest malloc is the one
    a free matches (address reuse produces exactly this pattern).
    """
    stats = TraceStats()
    live: dict[str, list[int]] = {}
    live_bytes = 0
    for ev in trace.events:
        stats.memory_ops += 1
        if ev.kind == MALLOC:
            stats.objects += 1
            stats.total_bytes += ev.size_in_b
            stats.distinct_sizes.add(ev.size_in_b)
            if ev.size_in_b > stats.max_size_in_b:
                stats.max_size_in_b = ev.size_in_b
            live.setdefault(ev.object_id, []).append(ev.size_in_b)
            live_bytes += ev.size_in_b
            if live_bytes > stats.max_in_use_bytes:
                stats.max_in_use_bytes = live_bytes
        else:
            stack = live.get(ev.object_id)
            if stack:
                live_bytes -= stack.pop()
                if not stack:
                    del live[ev.object_id]
            else:
                stats.invalid_frees += 1
    stats.invalid_mallocs = sum(len(s) for s in live.values())
    stats.avg_size_in_b = stats.total_bytes / stats.objects if stats.objects else 0.0
    return stats


# --- synthetic generation ---------------------------------------------------

LIFO_BURST = "lifo-burst"
UNIFORM_RANDOM = "uniform-random"
BIMODAL = "bimodal"


@dataclass(slots=True)
class LifetimeModel:
    kind: str = UNIFORM_RANDOM
    # bimodal: fraction of short-lived objects and both lifetimes (in events)
    short_frac: float = 0.5
    short_life_ops: int = 16
    long_life_ops: int = 4096
    # uniform-random: lifetime ~ U(1, max_life_ops); 0 means derive from objectCount
    max_life_ops: int = 0
    # lifo-burst: burst length ~ U(1, max_burst)
    max_burst: int = 32


@dataclass(slots=True)
class GeneratorSpec:
    object_count: int
    size_distribution: list[tuple[int, float]]
    lifetime: LifetimeModel = field(default_factory=LifetimeModel)
    leak_fraction: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.object_count < 0:
            raise ValueError("objectCount must be >= 0")
        if not self.size_distribution:
            raise ValueError("sizeDistribution must be nonempty")
        for size, weight in self.size_distribution:
            if size < 1:
                raise ValueError(f"size {size} must be >= 1")
            if weight <= 0:
                raise ValueError(f"weight {weight} must be positive")
        if not 0.0 <= self.leak_fraction <= 1.0:
            raise ValueError("leakFraction must be in [0, 1]")
        if self.lifetime.kind not in (LIFO_BURST, UNIFORM_RANDOM, BIMODAL):
            raise ValueError(f"unknown lifetime model {self.lifetime.kind!r}")
        if self.lifetime.kind == BIMODAL and not 0.0 <= self.lifetime.short_frac <= 1.0:
            raise ValueError("shortFrac must be in [0, 1]")


def generator_spec_from_dict(doc: dict) -> GeneratorSpec:
    lt = doc.get("lifetimeModel", {})
    model = LifetimeModel(
        kind=lt.get("kind", UNIFORM_RANDOM),
        short_frac=lt.get("shortFrac", 0.5),
        short_life_ops=lt.get("shortLifeOps", 16),
        long_life_ops=lt.get("longLifeOps", 4096),
        max_life_ops=lt.get("maxLifeOps", 0),
        max_burst=lt.get("maxBurst", 32),
    )
    spec = GeneratorSpec(
        object_count=doc["objectCount"],
        size_distribution=[(int(s), float(w)) for s, w in doc["sizeDistribution"]],
        lifetime=model,
        leak_fraction=doc.get("leakFraction", 0.0),
        seed=doc.get("seed", 0),
    )
    spec.validate()
    return spec


def load_generator_spec(path: str) -> GeneratorSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return generator_spec_from_dict(json.load(fh))


def generate_trace(spec: GeneratorSpec, seed: int | None = None) -> Trace:
    """Synthesize a trace; byte-identical for a fixed spec and seed."""
    spec.validate()
    rng = random.Random(spec.seed if seed is None else seed)
    n = spec.object_count
    sizes = [s for s, _ in spec.size_distribution]
    weights = [w for _, w in spec.size_distribution]
    drawn = rng.choices(sizes, weights=weights, k=n) if n else []
    leaked = [rng.random() < spec.leak_fraction for _ in range(n)]
    ids = [f"0x{i + 1:x}" for i in range(n)]

    events: list[TraceEvent] = []
    lt = spec.lifetime
    if lt.kind == LIFO_BURST:
        i = 0
        while i < n:
            burst = min(rng.randint(1, max(1, lt.max_burst)), n - i)
            for j in range(i, i + burst):
                events.append(TraceEvent(MALLOC, ids[j], drawn[j]))
            for j in range(i + burst - 1, i - 1, -1):
                if not leaked[j]:
                    events.append(TraceEvent(FREE, ids[j]))
            i += burst
        return Trace(events)

    if lt.kind == UNIFORM_RANDOM:
        horizon = lt.max_life_ops if lt.max_life_ops > 0 else max(2, n)
        lifetimes = [rng.randint(1, horizon) for _ in range(n)]
    else:  # bimodal
        lifetimes = [
            lt.short_life_ops if rng.random() < lt.short_frac else lt.long_life_ops
            for _ in range(n)
        ]

    # Interleave by scheduling each free `lifetime` events after its malloc.
    pending: list[tuple[int, int, str]] = []
    clock = 0
    made = 0
    while made < n or pending:
        if pending and (made == n or pending[0][0] <= clock):
            _, _, oid = heapq.heappop(pending)
            events.append(TraceEvent(FREE, oid))
        else:
            events.append(TraceEvent(MALLOC, ids[made], drawn[made]))
            if not leaked[made]:
                heapq.heappush(pending, (clock + max(1, lifetimes[made]), made, ids[made]))
            made += 1
        clock += 1
    return Trace(events)
