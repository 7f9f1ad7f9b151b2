"""Allocator taxonomy: segregated lists, segregated fits, and buddy systems.

An allocator owns one or more free lists partitioning its size range and
implements class rounding, splitting, and coalescing. Buddy blocks carry no
per-block header (their bookkeeping is the class-indexed array) so their
sizes stay exactly on the class series; list-backed allocators pay one
header per block on top of the class size.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass, field
from enum import Enum

from .freelist import (
    Block,
    CostDelta,
    DataStructure,
    FreeList,
    Mechanism,
    Policy,
    ZERO_COST,
    header_bytes,
    DEFAULT_WORD_IN_B,
)


class AllocatorKlass(Enum):
    SEGREGATED_FREE_LIST = "SegregatedFreeList"
    SIMPLE_SEGREGATED_STORAGE = "SimpleSegregatedStorage"
    SEGREGATED_FIT = "SegregatedFit"
    EXACT_SEGREGATED_FIT = "ExactSegregatedFit"
    STRICT_SEGREGATED_FIT = "StrictSegregatedFit"
    BUDDY_BINARY = "BuddySystemBinary"
    BUDDY_FIBONACCI = "BuddySystemFibonacci"
    DIRECT_MAPPED = "DirectMapped"  # draw-only region; freed blocks are never reused


_DISCRETE = {
    AllocatorKlass.SIMPLE_SEGREGATED_STORAGE,
    AllocatorKlass.EXACT_SEGREGATED_FIT,
    AllocatorKlass.STRICT_SEGREGATED_FIT,
}
_BUDDIES = {AllocatorKlass.BUDDY_BINARY, AllocatorKlass.BUDDY_FIBONACCI}
_SERIES_REQUIRED = {
    AllocatorKlass.EXACT_SEGREGATED_FIT,
    AllocatorKlass.STRICT_SEGREGATED_FIT,
}


class SpecError(ValueError):
    """Invalid allocator or DMM configuration."""


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def fib_series(limit: int) -> list[int]:
    """Fibonacci sizes 1, 2, 3, 5, ... up to the first term >= limit."""
    series = [1, 2]
    while series[-1] < limit:
        series.append(series[-1] + series[-2])
    return series if limit > 1 else [1]


@dataclass(frozen=True)
class ListConfig:
    data_structure: DataStructure = DataStructure.SLL
    mechanism: Mechanism = Mechanism.FIRST
    policy: Policy = Policy.FIFO


@dataclass(frozen=True)
class AllocatorSpec:
    klass: AllocatorKlass
    lo: int
    hi: int
    allow_split: bool = False
    allow_coalesce: bool = False
    list_config: ListConfig = field(default_factory=ListConfig)
    size_series: tuple[int, ...] | None = None
    word_in_b: int = DEFAULT_WORD_IN_B

    def validate(self) -> None:
        if not 0 <= self.lo < self.hi:
            raise SpecError(f"bad range ({self.lo}, {self.hi}]")
        if self.klass in _SERIES_REQUIRED and not self.size_series:
            raise SpecError(f"{self.klass.value} requires an explicit sizeSeries")
        if self.klass is AllocatorKlass.SIMPLE_SEGREGATED_STORAGE and (
                self.allow_split or self.allow_coalesce):
            raise SpecError("SimpleSegregatedStorage cannot split or coalesce")
        if self.klass in _BUDDIES:
            if self.size_series and list(self.size_series) != derive_buddy_classes(
                    self.klass, self.lo, self.hi):
                raise SpecError(
                    f"buddy sizeSeries {list(self.size_series)} does not match the "
                    f"derived series {derive_buddy_classes(self.klass, self.lo, self.hi)}")
        elif self.size_series:
            series = list(self.size_series)
            if series != sorted(set(series)):
                raise SpecError("sizeSeries must be strictly ascending")
            if series[0] <= self.lo or series[-1] != self.hi:
                raise SpecError(f"sizeSeries must lie in ({self.lo}, {self.hi}] and "
                                f"end at {self.hi}")

    def to_dict(self) -> dict:
        doc = {
            "klass": self.klass.value,
            "range": [self.lo, self.hi],
            "split": self.allow_split,
            "coalesce": self.allow_coalesce,
            "dataStructure": self.list_config.data_structure.value,
            "mechanism": self.list_config.mechanism.value,
            "policy": self.list_config.policy.value,
        }
        if self.size_series is not None and self.klass not in _BUDDIES:
            doc["sizeSeries"] = list(self.size_series)
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "AllocatorSpec":
        try:
            klass = AllocatorKlass(doc["klass"])
            cfg = ListConfig(
                DataStructure(doc["dataStructure"]),
                Mechanism(doc["mechanism"]),
                Policy(doc["policy"]),
            )
            lo, hi = doc["range"]
            spec = AllocatorSpec(
                klass=klass,
                lo=int(lo),
                hi=int(hi),
                allow_split=bool(doc["split"]),
                allow_coalesce=bool(doc["coalesce"]),
                list_config=cfg,
                size_series=tuple(doc["sizeSeries"]) if "sizeSeries" in doc else None,
            )
        except (KeyError, ValueError) as exc:
            raise SpecError(f"bad allocator config: {exc}") from exc
        spec.validate()
        return spec


def derive_buddy_classes(klass: AllocatorKlass, lo: int, hi: int) -> list[int]:
    """Consecutive powers of two / Fibonacci numbers covering (lo, hi].

    The top class is the first series value >= hi, so a range clipped at a
    non-series boundary still gets full coverage.
    """
    if klass is AllocatorKlass.BUDDY_BINARY:
        c = next_pow2(lo + 1)
        classes = []
        while c < hi:
            classes.append(c)
            c <<= 1
        classes.append(c)
        return classes
    series = fib_series(hi)
    first = bisect_left(series, lo + 1)
    idx = first
    while series[idx] < hi:
        idx += 1
    return series[first:idx + 1]


def geometric_boundaries(lo: int, hi: int) -> list[int]:
    """Power-of-two sub-range boundaries over (lo, hi], top clipped to hi."""
    bounds = []
    c = next_pow2(lo + 1)
    while c < hi:
        bounds.append(c)
        c <<= 1
    bounds.append(hi)
    return bounds


class Allocator:
    """Base: free lists over a partitioned range, with split/coalesce hooks.

    Subclasses fix the class rounding (continuous vs discrete vs buddy) and
    the arena-carve geometry.
    """

    CONTINUOUS = True  # class_of == request

    def __init__(self, spec: AllocatorSpec, list_id_base: int = 0):
        spec.validate()
        self.spec = spec
        self.index = -1  # assigned by the composing DMM
        self.header_in_b = header_bytes(spec.list_config.data_structure, spec.word_in_b)
        self.lists: list[FreeList] = []
        self.internal_lists: list[FreeList] = []  # buddy split residue below lo
        self.split_count = 0
        self.coalesce_count = 0
        self.free_total = 0
        self.slack_bytes = 0
        self.bytes_drawn = 0
        self._by_start: dict[int, Block] = {}
        self._by_end: dict[int, Block] = {}
        cfg = spec.list_config
        for i, (llo, lhi, cls) in enumerate(self._list_plan()):
            self.lists.append(FreeList(
                list_id_base + i, cfg.data_structure, cfg.mechanism, cfg.policy,
                llo, lhi, class_size=cls, header_in_b=self.header_in_b,
                open_ended=False))
        self.lists[-1].open_ended = True
        self._his = [l.hi for l in self.lists]

    # -- layout ------------------------------------------------------------

    def _list_plan(self) -> list[tuple[int, int, int | None]]:
        raise NotImplementedError

    def class_of(self, request_in_b: int) -> int:
        """Smallest class size serving the request; the request itself for
        continuous (range-binned) allocators."""
        return self._class_and_index(request_in_b)[0]

    def _class_and_index(self, request_in_b: int) -> tuple[int, int]:
        if not self.spec.lo < request_in_b <= self.spec.hi:
            raise SpecError(f"request {request_in_b} outside ({self.spec.lo}, {self.spec.hi}]")
        return request_in_b, bisect_left(self._his, request_in_b)

    def covering_index(self, usable_in_b: int) -> int:
        idx = bisect_left(self._his, usable_in_b)
        return min(idx, len(self.lists) - 1)

    def covering_list(self, block: Block) -> FreeList:
        return self.lists[self.covering_index(block.size_in_b - self.header_in_b)]

    def home_list(self, block: Block) -> FreeList:
        """The list managing this block's size class (for ownership labels)."""
        return self.covering_list(block)

    def carve_gross(self, request_in_b: int) -> int:
        """Gross bytes a fresh arena draw takes for this request."""
        return self.class_of(request_in_b) + self.header_in_b

    # -- registries ---------------------------------------------------------

    def _track_insert(self, lst: FreeList, block: Block) -> CostDelta:
        cost = lst.insert(block)
        self.free_total += block.size_in_b
        if self.spec.allow_coalesce:
            self._by_start[block.position] = block
            self._by_end[block.position + block.size_in_b] = block
        return cost

    def _untrack(self, block: Block) -> None:
        self.free_total -= block.size_in_b
        if self.spec.allow_coalesce:
            del self._by_start[block.position]
            del self._by_end[block.position + block.size_in_b]

    def _track_extract(self, lst: FreeList, need: int,
                       hottest: int | None) -> tuple[Block | None, CostDelta]:
        block, cost = lst.extract(need, hottest)
        if block is not None:
            self._untrack(block)
        return block, cost

    def _track_remove(self, lst: FreeList, block: Block) -> CostDelta:
        cost = lst.remove_block(block)
        self._untrack(block)
        return cost

    # -- malloc / free -------------------------------------------------------

    def malloc(self, request_in_b: int, now: int,
               hottest: int | None = None) -> tuple[Block | None, CostDelta]:
        """Extract a block for the request; None means the arena must grow."""
        cls, idx = self._class_and_index(request_in_b)
        block, cost = self._track_extract(self.lists[idx], cls, hottest)
        if block is not None:
            return block, cost
        if self.spec.allow_split:
            for j in range(idx + 1, len(self.lists)):
                big, c2 = self._track_extract(self.lists[j], cls, hottest)
                cost = cost + c2
                if big is not None:
                    return self._split_down(big, cls, now, cost)
        return None, cost

    def _split_down(self, big: Block, cls: int, now: int,
                    cost: CostDelta) -> tuple[Block, CostDelta]:
        piece_gross = cls + self.header_in_b
        rem_gross = big.size_in_b - piece_gross
        if rem_gross <= 0:
            return big, cost  # too tight to split; hand the block out whole
        piece = Block(big.position, piece_gross, self.header_in_b, now)
        self.split_count += 1
        rem_usable = rem_gross - self.header_in_b
        if rem_usable <= self.spec.lo:
            self.slack_bytes += rem_gross
            return piece, cost
        rem = Block(big.position + piece_gross, rem_gross, self.header_in_b, now)
        cost = cost + self._track_insert(self.lists[self.covering_index(rem_usable)], rem)
        return piece, cost

    def free(self, block: Block, now: int) -> CostDelta:
        """Insert a returned block; coalesce with position-adjacent free
        neighbors when enabled."""
        lst = self.covering_list(block)
        cost = self._track_insert(lst, block)
        if not self.spec.allow_coalesce:
            return cost
        cur = block
        right = self._by_start.get(cur.position + cur.size_in_b)
        if right is not None:
            cost = cost + self._merge(cur, right, cur.position, now)
            cur = self._by_start[cur.position]
        left = self._by_end.get(cur.position)
        if left is not None:
            cost = cost + self._merge(left, cur, left.position, now)
        return cost

    def _merge(self, first: Block, second: Block, pos: int, now: int) -> CostDelta:
        cost = self._track_remove(self.lists[self.covering_index(
            first.size_in_b - self.header_in_b)], first)
        cost = cost + self._track_remove(self.lists[self.covering_index(
            second.size_in_b - self.header_in_b)], second)
        merged = Block(pos, first.size_in_b + second.size_in_b, self.header_in_b, now)
        self.coalesce_count += 1
        usable = merged.size_in_b - self.header_in_b
        return cost + self._track_insert(self.lists[self.covering_index(usable)], merged)

    def carve(self, request_in_b: int, now: int, arena: "ArenaLike") -> tuple[Block, CostDelta]:
        """Create a fresh block from virtual memory (NeedArena path)."""
        gross = self.carve_gross(request_in_b)
        pos = arena.draw(gross)
        self.bytes_drawn += gross
        return Block(pos, gross, self.header_in_b, now), ZERO_COST

    # -- reporting ------------------------------------------------------------

    def all_lists(self) -> list[FreeList]:
        return self.internal_lists + self.lists

    def free_bytes(self) -> int:
        return self.free_total

    def snapshot(self, live_bytes_by_list: dict[int, int] | None = None,
                 live_count_by_list: dict[int, int] | None = None) -> dict:
        lists = []
        for lst in self.all_lists():
            lists.append({
                "range": [lst.lo, lst.hi],
                "classSize": lst.class_size,
                "dataStructure": lst.ds.value,
                "mechanism": lst.mechanism.value,
                "policy": lst.policy.value,
                "blockCount": len(lst),
                "freeBytes": lst.free_bytes,
                "liveBlocks": (live_count_by_list or {}).get(lst.list_id, 0),
                "liveBytes": (live_bytes_by_list or {}).get(lst.list_id, 0),
                "internal": lst in self.internal_lists,
            })
        return {
            "klass": self.spec.klass.value,
            "range": [self.spec.lo, self.spec.hi],
            "split": self.spec.allow_split,
            "coalesce": self.spec.allow_coalesce,
            "splitCount": self.split_count,
            "coalesceCount": self.coalesce_count,
            "slackBytes": self.slack_bytes,
            "freeLists": lists,
        }


class ArenaLike:
    """Anything with draw(nbytes) -> position; the DMM's bump cursor."""

    def draw(self, nbytes: int) -> int:
        raise NotImplementedError


class RangeAllocator(Allocator):
    """SegregatedFreeList / SegregatedFit: range-binned lists, continuous classes."""

    def _list_plan(self):
        spec = self.spec
        if spec.size_series:
            bounds = list(spec.size_series)
        elif spec.klass is AllocatorKlass.SEGREGATED_FIT:
            bounds = geometric_boundaries(spec.lo, spec.hi)
        else:
            bounds = [spec.hi]
        plan = []
        prev = spec.lo
        for b in bounds:
            plan.append((prev, b, None))
            prev = b
        return plan


class DirectMappedAllocator(Allocator):
    """Large-object pass-through: every malloc draws fresh virtual memory and
    frees park in a graveyard list that is never reused (mmap-style)."""

    def __init__(self, spec: AllocatorSpec, list_id_base: int = 0):
        super().__init__(spec, list_id_base)
        self.header_in_b = 0
        for lst in self.lists:
            lst.header_in_b = 0

    def _list_plan(self):
        return [(self.spec.lo, self.spec.hi, None)]

    def carve_gross(self, request_in_b: int) -> int:
        return self.class_of(request_in_b)

    def malloc(self, request_in_b, now, hottest=None):
        self.class_of(request_in_b)  # range check only
        return None, ZERO_COST

    def free(self, block: Block, now: int) -> CostDelta:
        return self._track_insert(self.lists[0], block)


class ClassAllocator(Allocator):
    """Discrete size classes: exact / strict segregated fit and simple
    segregated storage. Requests round up to the next class."""

    CONTINUOUS = False

    def __init__(self, spec: AllocatorSpec, list_id_base: int = 0):
        super().__init__(spec, list_id_base)
        self.classes = [lst.class_size for lst in self.lists]

    def _list_plan(self):
        spec = self.spec
        series = list(spec.size_series) if spec.size_series else [spec.hi]
        plan = []
        prev = spec.lo
        for s in series:
            plan.append((prev, s, s))
            prev = s
        return plan

    def _class_and_index(self, request_in_b: int) -> tuple[int, int]:
        if not self.spec.lo < request_in_b <= self.spec.hi:
            raise SpecError(f"request {request_in_b} outside ({self.spec.lo}, {self.spec.hi}]")
        idx = bisect_left(self.classes, request_in_b)
        return self.classes[idx], idx


class BuddyAllocator(Allocator):
    """Binary / Fibonacci buddy: class-array lists, zero per-block headers,
    positions tracked in a private aligned coordinate space."""

    CONTINUOUS = False

    def __init__(self, spec: AllocatorSpec, list_id_base: int = 0):
        self._klass = spec.klass
        super().__init__(spec, list_id_base)
        self.header_in_b = 0
        for lst in self.all_lists():
            lst.header_in_b = 0
        self.classes = [lst.class_size for lst in self.lists]
        self.top_class = self.classes[-1]
        self._local_top = 0
        self._free_at: dict[int, Block] = {}
        self._siblings: dict[tuple[int, int], tuple[int, int, int, int]] = {}
        if spec.klass is AllocatorKlass.BUDDY_FIBONACCI:
            self._fibs = fib_series(self.top_class)
        # Residue lists for Fibonacci splits that drop below the exposed range.
        if spec.allow_split and spec.klass is AllocatorKlass.BUDDY_FIBONACCI:
            below = [f for f in self._fibs if f < self.classes[0]]
            cfg = spec.list_config
            for j, c in enumerate(below):
                prev = below[j - 1] if j else 0
                self.internal_lists.append(FreeList(
                    list_id_base + len(self.lists) + j, cfg.data_structure,
                    cfg.mechanism, cfg.policy, prev, c, class_size=c, header_in_b=0))

    def _list_plan(self):
        spec = self.spec
        classes = derive_buddy_classes(self._klass, spec.lo, spec.hi)
        plan = []
        prev = spec.lo
        for c in classes:
            plan.append((prev, min(c, spec.hi), c))
            prev = min(c, spec.hi)
        return plan

    def class_of(self, request_in_b: int) -> int:
        if not self.spec.lo < request_in_b <= self.spec.hi:
            raise SpecError(f"request {request_in_b} outside ({self.spec.lo}, {self.spec.hi}]")
        if self._klass is AllocatorKlass.BUDDY_BINARY:
            return max(next_pow2(request_in_b), self.classes[0])
        return self.classes[bisect_left(self._his, request_in_b)]

    def carve_gross(self, request_in_b: int) -> int:
        if self.spec.allow_split:
            return self.top_class
        return self.class_of(request_in_b)

    def _class_list(self, size: int) -> FreeList:
        for lst in self.internal_lists:
            if lst.class_size == size:
                return lst
        idx = bisect_left(self.classes, size)
        if idx == len(self.classes) or self.classes[idx] != size:
            raise SpecError(f"size {size} is not a class of this buddy system")
        return self.lists[idx]

    def home_list(self, block: Block) -> FreeList:
        return self._class_list(block.size_in_b)

    # registries keyed on the buddy's local positions
    def _track_insert(self, lst: FreeList, block: Block) -> CostDelta:
        cost = lst.insert(block)
        self.free_total += block.size_in_b
        self._free_at[block.position] = block
        return cost

    def _untrack(self, block: Block) -> None:
        self.free_total -= block.size_in_b
        del self._free_at[block.position]

    def malloc(self, request_in_b, now, hottest=None):
        cls = self.class_of(request_in_b)
        idx = bisect_left(self.classes, cls)
        block, cost = self._track_extract(self.lists[idx], cls, hottest)
        if block is not None:
            return block, cost
        if self.spec.allow_split:
            for j in range(idx + 1, len(self.lists)):
                big, c2 = self._track_extract(self.lists[j], cls, hottest)
                cost = cost + c2
                if big is not None:
                    block, c3 = self._split_to_class(big, cls, now)
                    return block, cost + c3
        return None, cost

    def _split_to_class(self, block: Block, cls: int, now: int) -> tuple[Block, CostDelta]:
        cost = ZERO_COST
        while block.size_in_b > cls:
            self.split_count += 1
            if self._klass is AllocatorKlass.BUDDY_BINARY:
                half = block.size_in_b // 2
                keep = Block(block.position, half, 0, now)
                other = Block(block.position + half, half, 0, now)
            else:
                k = self._fibs.index(block.size_in_b)
                if k >= 2:
                    left_sz, right_sz = self._fibs[k - 1], self._fibs[k - 2]
                else:  # size 2 splits into the 1 + 1 pair
                    left_sz = right_sz = 1
                left = Block(block.position, left_sz, 0, now)
                right = Block(block.position + left_sz, right_sz, 0, now)
                self._siblings[(left.position, left_sz)] = (
                    right.position, right_sz, block.position, block.size_in_b)
                self._siblings[(right.position, right_sz)] = (
                    left.position, left_sz, block.position, block.size_in_b)
                keep, other = (right, left) if right_sz >= cls else (left, right)
            cost = cost + self._track_insert(self._class_list(other.size_in_b), other)
            block = keep
        return block, cost

    def free(self, block: Block, now: int) -> CostDelta:
        cost = self._track_insert(self._class_list(block.size_in_b), block)
        if not self.spec.allow_coalesce:
            return cost
        cur = block
        while True:
            merged_info = self._partner_of(cur)
            if merged_info is None:
                return cost
            partner, parent_pos, parent_size = merged_info
            cost = cost + self._track_remove(self._class_list(partner.size_in_b), partner)
            cost = cost + self._track_remove(self._class_list(cur.size_in_b), cur)
            if self._klass is AllocatorKlass.BUDDY_FIBONACCI:
                del self._siblings[(cur.position, cur.size_in_b)]
                del self._siblings[(partner.position, partner.size_in_b)]
            merged = Block(parent_pos, parent_size, 0, now)
            self.coalesce_count += 1
            cost = cost + self._track_insert(self._class_list(parent_size), merged)
            cur = merged

    def _partner_of(self, cur: Block) -> tuple[Block, int, int] | None:
        if self._klass is AllocatorKlass.BUDDY_BINARY:
            if cur.size_in_b >= self.top_class:
                return None
            partner_pos = cur.position ^ cur.size_in_b
            partner = self._free_at.get(partner_pos)
            if partner is None or partner.size_in_b != cur.size_in_b:
                return None
            return partner, min(cur.position, partner_pos), 2 * cur.size_in_b
        rec = self._siblings.get((cur.position, cur.size_in_b))
        if rec is None:
            return None
        sib_pos, sib_size, parent_pos, parent_size = rec
        partner = self._free_at.get(sib_pos)
        if partner is None or partner.size_in_b != sib_size:
            return None
        return partner, parent_pos, parent_size

    def carve(self, request_in_b: int, now: int, arena: ArenaLike) -> tuple[Block, CostDelta]:
        cls = self.class_of(request_in_b)
        if self.spec.allow_split:
            # always draw a top-class chunk so the local space stays aligned
            arena.draw(self.top_class)
            self.bytes_drawn += self.top_class
            pos = self._local_top
            self._local_top += self.top_class
            block = Block(pos, self.top_class, 0, now)
            if cls == self.top_class:
                return block, ZERO_COST
            return self._split_to_class(block, cls, now)
        aligned = -(-self._local_top // cls) * cls
        gap = aligned - self._local_top
        if gap:
            self.slack_bytes += gap
        arena.draw(gap + cls)
        self.bytes_drawn += gap + cls
        self._local_top = aligned + cls
        return Block(aligned, cls, 0, now), ZERO_COST


_BUILDERS = {
    AllocatorKlass.SEGREGATED_FREE_LIST: RangeAllocator,
    AllocatorKlass.SEGREGATED_FIT: RangeAllocator,
    AllocatorKlass.DIRECT_MAPPED: DirectMappedAllocator,
    AllocatorKlass.SIMPLE_SEGREGATED_STORAGE: ClassAllocator,
    AllocatorKlass.EXACT_SEGREGATED_FIT: ClassAllocator,
    AllocatorKlass.STRICT_SEGREGATED_FIT: ClassAllocator,
    AllocatorKlass.BUDDY_BINARY: BuddyAllocator,
    AllocatorKlass.BUDDY_FIBONACCI: BuddyAllocator,
}


def build_allocator(spec: AllocatorSpec, list_id_base: int = 0) -> Allocator:
    return _BUILDERS[spec.klass](spec, list_id_base)
