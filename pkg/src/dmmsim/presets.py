"""Reference DMM factories: KNG, LEA, FIB, S10, EXA.

Each returns a DMMSpec sized to a maximum request; EXA is built from trace
statistics. Undocumented disciplines (Kingsley's list order, S10's
boundaries) are fixed, overridable defaults.
"""

from __future__ import annotations

from .allocators import AllocatorKlass, AllocatorSpec, ListConfig, SpecError, next_pow2
from .freelist import DataStructure, Mechanism, Policy
from .manager import DMMSpec
from .trace import TraceStats

LEA_SMALL_TOP = 56  # largest multiple-of-8 class below 64 bytes
LEA_MEDIUM_TOP = 131072 - 1  # medium objects stay under 128 KiB
S10_LIST_COUNT = 10


def kingsley(max_size_in_b: int) -> DMMSpec:
    """Power-of-two classes, no splitting or coalescing: fast, memory-hungry."""
    if max_size_in_b < 1:
        raise SpecError("maxSizeInB must be >= 1")
    top = next_pow2(max_size_in_b)
    classes = []
    c = 1
    while c <= top:
        classes.append(c)
        c <<= 1
    return DMMSpec((AllocatorSpec(
        klass=AllocatorKlass.STRICT_SEGREGATED_FIT,
        lo=0, hi=top,
        allow_split=False, allow_coalesce=False,
        list_config=ListConfig(DataStructure.SLL, Mechanism.EXACT, Policy.LIFO),
        size_series=tuple(classes),
    ),))


def lea(max_size_in_b: int) -> DMMSpec:
    """Three-regime approximation: exact small bins (multiples of 8), a
    coalescing best-fit medium region, and direct-mapped large objects."""
    if max_size_in_b < 1:
        raise SpecError("maxSizeInB must be >= 1")
    allocs = []
    small_top = min(LEA_SMALL_TOP, max_size_in_b)
    small_classes = [c for c in range(8, small_top + 1, 8)]
    if not small_classes or small_classes[-1] != small_top:
        small_classes.append(small_top)
    allocs.append(AllocatorSpec(
        klass=AllocatorKlass.EXACT_SEGREGATED_FIT,
        lo=0, hi=small_top,
        allow_split=False, allow_coalesce=False,
        list_config=ListConfig(DataStructure.SLL, Mechanism.EXACT, Policy.FIFO),
        size_series=tuple(small_classes),
    ))
    if max_size_in_b > small_top:
        medium_top = min(LEA_MEDIUM_TOP, max_size_in_b)
        allocs.append(AllocatorSpec(
            klass=AllocatorKlass.SEGREGATED_FIT,
            lo=small_top, hi=medium_top,
            allow_split=True, allow_coalesce=True,
            list_config=ListConfig(DataStructure.DLL, Mechanism.BEST, Policy.FIFO),
        ))
        if max_size_in_b > medium_top:
            allocs.append(AllocatorSpec(
                klass=AllocatorKlass.DIRECT_MAPPED,
                lo=medium_top, hi=max_size_in_b,
                allow_split=False, allow_coalesce=False,
                list_config=ListConfig(DataStructure.SLL, Mechanism.FIRST, Policy.FIFO),
            ))
    return DMMSpec(tuple(allocs))


def fibonacci_buddy(max_size_in_b: int) -> DMMSpec:
    if max_size_in_b < 1:
        raise SpecError("maxSizeInB must be >= 1")
    return DMMSpec((AllocatorSpec(
        klass=AllocatorKlass.BUDDY_FIBONACCI,
        lo=0, hi=max_size_in_b,
        allow_split=True, allow_coalesce=True,
        list_config=ListConfig(DataStructure.SLL, Mechanism.FIRST, Policy.FIFO),
    ),))


def _ceil_nth_root_power(base: int, i: int, n: int) -> int:
    """Smallest integer k with k**n >= base**i (exact integer arithmetic)."""
    k = max(1, int(round(base ** (i / n))))
    target = base ** i
    while k ** n < target:
        k += 1
    while k > 1 and (k - 1) ** n >= target:
        k -= 1
    return k


def s10_boundaries(max_size_in_b: int) -> list[int]:
    """Geometric boundaries with ratio max^(1/10), rounded up and forced
    strictly increasing; exactly 10 for any max >= 10."""
    n = min(S10_LIST_COUNT, max_size_in_b)
    bounds: list[int] = []
    for i in range(1, n + 1):
        b = _ceil_nth_root_power(max_size_in_b, i, n)
        b = max(b, (bounds[-1] + 1) if bounds else 1)
        bounds.append(min(b, max_size_in_b - (n - i)))
    bounds[-1] = max_size_in_b
    return bounds


def segregated10(max_size_in_b: int) -> DMMSpec:
    if max_size_in_b < 1:
        raise SpecError("maxSizeInB must be >= 1")
    return DMMSpec((AllocatorSpec(
        klass=AllocatorKlass.SEGREGATED_FIT,
        lo=0, hi=max_size_in_b,
        allow_split=False, allow_coalesce=False,
        list_config=ListConfig(DataStructure.SLL, Mechanism.FIRST, Policy.FIFO),
        size_series=tuple(s10_boundaries(max_size_in_b)),
    ),))


def exact_segregated(stats: TraceStats) -> DMMSpec:
    """One list per distinct size observed in the trace."""
    if not stats.distinct_sizes:
        raise SpecError("trace has no allocation sizes; cannot build EXA")
    return DMMSpec((AllocatorSpec(
        klass=AllocatorKlass.EXACT_SEGREGATED_FIT,
        lo=0, hi=stats.max_size_in_b,
        allow_split=False, allow_coalesce=False,
        list_config=ListConfig(DataStructure.SLL, Mechanism.EXACT, Policy.LIFO),
        size_series=tuple(sorted(stats.distinct_sizes)),
    ),))


PRESET_NAMES = ("kng", "lea", "fib", "s10", "exa")


def preset_by_name(name: str, max_size_in_b: int,
                   stats: TraceStats | None = None) -> DMMSpec:
    name = name.lower()
    if name == "kng":
        return kingsley(max_size_in_b)
    if name == "lea":
        return lea(max_size_in_b)
    if name == "fib":
        return fibonacci_buddy(max_size_in_b)
    if name == "s10":
        return segregated10(max_size_in_b)
    if name == "exa":
        if stats is None:
            raise SpecError("the exa preset needs trace statistics")
        return exact_segregated(stats)
    raise SpecError(f"unknown preset {name!r}; expected one of {', '.join(PRESET_NAMES)}")
