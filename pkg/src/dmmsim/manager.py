"""The composed dynamic memory manager: routes events to allocators through
a two-level size index, owns the live-block pool and the virtual-memory
arena (a monotone bump cursor), and accumulates metrics.

Config files are JSON mirroring the per-allocator table layout:

    {"allocators": [{"klass": ..., "range": [lo, hi], "split": ...,
                     "coalesce": ..., "dataStructure": ..., "mechanism": ...,
                     "policy": ..., "sizeSeries": [...]?}, ...],
     "wordInB": 8?}

Dumps are canonical (2-space indent, fixed key order) and round-trip
byte-identically.
"""

from __future__ import annotations

import heapq
import json
from bisect import bisect_left
from dataclasses import dataclass

from .allocators import (
    Allocator,
    AllocatorKlass,
    AllocatorSpec,
    ArenaLike,
    SpecError,
    build_allocator,
)
from .freelist import Block, CostDelta, Mechanism, ZERO_COST
from .metrics import Metrics

_INDEX_LOOKUP = CostDelta(2, 2)  # 1 time / 1 access per index level, 2 levels


@dataclass(frozen=True)
class DMMSpec:
    """Ordered allocators whose ranges partition (0, maxSizeInB]."""

    allocators: tuple[AllocatorSpec, ...]
    word_in_b: int = 8

    @property
    def max_size_in_b(self) -> int:
        return self.allocators[-1].hi

    def validate(self) -> None:
        if not self.allocators:
            raise SpecError("a DMM needs at least one allocator")
        prev = 0
        for a in self.allocators:
            a.validate()
            if a.lo < prev:
                raise SpecError(f"allocator ranges overlap at {a.lo}")
            if a.lo > prev:
                raise SpecError(f"allocator ranges leave a gap at ({prev}, {a.lo}]")
            prev = a.hi
        if self.allocators[0].lo != 0:
            raise SpecError("coverage must start at (0, ...]")

    def to_dict(self) -> dict:
        doc = {"allocators": [a.to_dict() for a in self.allocators]}
        if self.word_in_b != 8:
            doc["wordInB"] = self.word_in_b
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "DMMSpec":
        word = int(doc.get("wordInB", 8))
        allocs = []
        for adoc in doc.get("allocators", []):
            base = AllocatorSpec.from_dict(adoc)
            if base.word_in_b != word:
                base = AllocatorSpec(base.klass, base.lo, base.hi, base.allow_split,
                                     base.allow_coalesce, base.list_config,
                                     base.size_series, word)
            allocs.append(base)
        spec = DMMSpec(tuple(allocs), word)
        spec.validate()
        return spec


def dump_dmm_spec(spec: DMMSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2) + "\n"


def load_dmm_spec(path: str) -> DMMSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return DMMSpec.from_dict(json.load(fh))


def format_dmm_table(spec: DMMSpec) -> str:
    """Human-readable per-allocator table (the config-table layout)."""
    out = []
    for aspec in spec.allocators:
        alloc = build_allocator(aspec)
        out.append(f"{aspec.klass.value}, split={'true' if aspec.allow_split else 'false'}, "
                   f"coalesce={'true' if aspec.allow_coalesce else 'false'}")
        out.append(f"{'Data Structure':<16}{'Mechanism(Policy)':<22}Range (bytes)")
        cfg = aspec.list_config
        for lst in alloc.lists:
            mp = f"{cfg.mechanism.value}({cfg.policy.value})"
            out.append(f"{cfg.data_structure.value:<16}{mp:<22}({lst.lo}, {lst.hi}]")
        out.append("")
    return "\n".join(out)


class SimulationAbort(RuntimeError):
    """Replay cannot continue; carries the failing event index."""

    def __init__(self, event_index: int, message: str):
        super().__init__(f"event {event_index}: {message}")
        self.event_index = event_index


class Arena(ArenaLike):
    """Monotone bump cursor over simulated virtual memory."""

    __slots__ = ("top",)

    def __init__(self):
        self.top = 0

    def draw(self, nbytes: int) -> int:
        pos = self.top
        self.top += nbytes
        return pos


class DMM:
    """One composed manager instance; confined to a single replay."""

    def __init__(self, spec: DMMSpec):
        spec.validate()
        self.spec = spec
        self.allocators: list[Allocator] = []
        base = 0
        for i, aspec in enumerate(spec.allocators):
            if aspec.word_in_b != spec.word_in_b:
                aspec = AllocatorSpec(aspec.klass, aspec.lo, aspec.hi, aspec.allow_split,
                                      aspec.allow_coalesce, aspec.list_config,
                                      aspec.size_series, spec.word_in_b)
            alloc = build_allocator(aspec, base)
            alloc.index = i
            base += len(alloc.all_lists())
            self.allocators.append(alloc)
        self._alloc_his = [a.spec.hi for a in self.allocators]
        self.max_size_in_b = spec.max_size_in_b
        self.arena = Arena()
        self.metrics = Metrics()
        self.live_pool: dict[str, list[tuple[Block, int]]] = {}
        self.live_bytes = 0
        self.live_blocks = 0
        self._live_by_list: dict[int, int] = {}
        self._live_count_by_list: dict[int, int] = {}
        self._frag_live = 0
        self._needs_hottest = any(
            a.spec.list_config.mechanism is Mechanism.FARTHEST for a in self.allocators)
        self._touch_heap: list[tuple[int, int, Block]] = []
        self._heap_seq = 0

    # -- hottest-block tracking (FARTHEST support) ---------------------------

    def _touch(self, block: Block) -> None:
        block.touches += 1
        if self._needs_hottest:
            self._heap_seq += 1
            heapq.heappush(self._touch_heap, (-block.touches, self._heap_seq, block))

    def _hottest_pos(self) -> int | None:
        heap = self._touch_heap
        while heap:
            neg, _, block = heap[0]
            if block.live and block.touches == -neg:
                return block.position
            heapq.heappop(heap)
        return None

    # -- events ---------------------------------------------------------------

    def malloc(self, object_id: str, request_in_b: int, now: int) -> CostDelta:
        if request_in_b > self.max_size_in_b:
            raise SpecError(f"request {request_in_b} exceeds the composed "
                            f"maximum {self.max_size_in_b}")
        if request_in_b < 1:
            raise SpecError("request must be >= 1")
        m = self.metrics
        alloc = self.allocators[bisect_left(self._alloc_his, request_in_b)]
        hottest = self._hottest_pos() if self._needs_hottest else None
        block, c2 = alloc.malloc(request_in_b, now, hottest)
        time_units = 2 + c2.time_units  # two index levels at 1/1 each
        accesses = 2 + c2.mem_accesses
        if block is None:
            free_now = sum(a.free_total for a in self.allocators)
            if free_now >= request_in_b:
                m.external_frag_events += 1
                m.external_frag_wasted_bytes += free_now
            block, c3 = alloc.carve(request_in_b, now, self.arena)
            time_units += c3.time_units
            accesses += c3.mem_accesses
        if block.owner_list_id < 0:  # fresh carve or split piece
            block.owner_list_id = alloc.home_list(block).list_id
        block.owner_alloc = alloc.index
        block.live = True
        self._touch(block)
        self.live_pool.setdefault(object_id, []).append((block, request_in_b))
        self.live_bytes += block.size_in_b
        self.live_blocks += 1
        lid = block.owner_list_id
        self._live_by_list[lid] = self._live_by_list.get(lid, 0) + block.size_in_b
        self._live_count_by_list[lid] = self._live_count_by_list.get(lid, 0) + 1
        frag = block.size_in_b - block.header_in_b - request_in_b
        if frag > 0:
            self._frag_live += frag
            if self._frag_live > m.internal_frag_bytes:
                m.internal_frag_bytes = self._frag_live
        m.malloc_count += 1
        m.time_units += time_units
        m.mem_accesses += accesses
        if self.arena.top > m.hwm_bytes:
            m.hwm_bytes = self.arena.top
        return CostDelta(time_units, accesses)

    def free(self, object_id: str, now: int) -> CostDelta:
        m = self.metrics
        stack = self.live_pool.get(object_id)
        if not stack:
            m.invalid_frees += 1
            m.time_units += 2
            m.mem_accesses += 2
            return _INDEX_LOOKUP
        block, requested = stack.pop()
        if not stack:
            del self.live_pool[object_id]
        block.live = False
        self._touch(block)
        self.live_bytes -= block.size_in_b
        self.live_blocks -= 1
        lid = block.owner_list_id
        self._live_by_list[lid] -= block.size_in_b
        self._live_count_by_list[lid] -= 1
        frag = block.size_in_b - block.header_in_b - requested
        if frag > 0:
            self._frag_live -= frag
        c2 = self.allocators[block.owner_alloc].free(block, now)
        time_units = 2 + c2.time_units
        accesses = 2 + c2.mem_accesses
        m.free_count += 1
        m.time_units += time_units
        m.mem_accesses += accesses
        return CostDelta(time_units, accesses)

    # -- accounting -----------------------------------------------------------

    def free_bytes(self) -> int:
        return sum(a.free_total for a in self.allocators)

    def slack_bytes(self) -> int:
        return sum(a.slack_bytes for a in self.allocators)

    def conservation_holds(self) -> bool:
        """live + free-listed + slack bytes must equal the arena cursor."""
        return self.live_bytes + self.free_bytes() + self.slack_bytes() == self.arena.top

    def collect_metrics(self) -> Metrics:
        m = self.metrics
        m.split_count = sum(a.split_count for a in self.allocators)
        m.coalesce_count = sum(a.coalesce_count for a in self.allocators)
        m.farthest_fallbacks = sum(
            lst.farthest_fallbacks for a in self.allocators for lst in a.all_lists())
        m.invalid_mallocs = sum(len(s) for s in self.live_pool.values())
        m.hwm_bytes = self.arena.top
        return m

    def snapshot(self) -> dict:
        return {
            "arenaTop": self.arena.top,
            "liveBytes": self.live_bytes,
            "liveBlocks": self.live_blocks,
            "freeBytes": self.free_bytes(),
            "slackBytes": self.slack_bytes(),
            "allocators": [a.snapshot(self._live_by_list, self._live_count_by_list)
                           for a in self.allocators],
        }


def compose_dmm(spec: DMMSpec) -> DMM:
    """Build and validate; errors name overlaps/gaps before any replay."""
    return DMM(spec)
