import random

import pytest

from dmmsim.allocators import (
    AllocatorKlass,
    AllocatorSpec,
    ListConfig,
    SpecError,
    build_allocator,
    derive_buddy_classes,
    fib_series,
    next_pow2,
)
from dmmsim.freelist import Block, DataStructure, Mechanism, Policy

K = AllocatorKlass
CFG = ListConfig(DataStructure.SLL, Mechanism.FIRST, Policy.FIFO)


class FakeArena:
    def __init__(self):
        self.top = 0

    def draw(self, n):
        pos = self.top
        self.top += n
        return pos


def spec(klass, lo, hi, split=False, coalesce=False, cfg=CFG, series=None, word=8):
    return AllocatorSpec(klass, lo, hi, split, coalesce, cfg, series, word)


def seed_free(alloc, pos, size, t=0):
    b = Block(pos, size, alloc.header_in_b if alloc.spec.klass not in
              (K.BUDDY_BINARY, K.BUDDY_FIBONACCI, K.DIRECT_MAPPED) else 0, t)
    alloc._track_insert(alloc.home_list(b), b)
    return b


def test_next_pow2():
    assert [next_pow2(n) for n in (1, 2, 3, 5, 33, 64)] == [1, 2, 4, 8, 64, 64]


def test_fib_series():
    assert fib_series(13) == [1, 2, 3, 5, 8, 13]
    assert fib_series(14) == [1, 2, 3, 5, 8, 13, 21]


def test_binary_buddy_lists_over_0_8():
    a = build_allocator(spec(K.BUDDY_BINARY, 0, 8))
    assert [(l.lo, l.hi) for l in a.lists] == [(0, 1), (1, 2), (2, 4), (4, 8)]
    assert a.classes == [1, 2, 4, 8]


def test_exact_fit_lists_from_series():
    a = build_allocator(spec(K.EXACT_SEGREGATED_FIT, 0, 40, series=(2, 4, 40)))
    assert len(a.lists) == 3
    assert a.classes == [2, 4, 40]


def test_fibonacci_buddy_classes_to_13():
    a = build_allocator(spec(K.BUDDY_FIBONACCI, 0, 13))
    assert a.classes == [1, 2, 3, 5, 8, 13]


def test_buddy_clipped_range_classes():
    assert derive_buddy_classes(K.BUDDY_BINARY, 1724, 4096) == [2048, 4096]
    a = build_allocator(spec(K.BUDDY_BINARY, 1724, 4096))
    assert [(l.lo, l.hi) for l in a.lists] == [(1724, 2048), (2048, 4096)]


def test_class_of_rounding():
    buddy = build_allocator(spec(K.BUDDY_BINARY, 0, 64))
    assert buddy.class_of(33) == 64
    fib = build_allocator(spec(K.BUDDY_FIBONACCI, 0, 13))
    assert fib.class_of(6) == 8
    exact = build_allocator(spec(K.EXACT_SEGREGATED_FIT, 0, 40, series=(2, 4, 40)))
    assert exact.class_of(4) == 4
    assert exact.class_of(3) == 4
    with pytest.raises(SpecError):
        buddy.class_of(65)
    with pytest.raises(SpecError):
        exact.class_of(0)


def test_buddy_split_cascade():
    a = build_allocator(spec(K.BUDDY_BINARY, 0, 64, split=True, coalesce=True))
    seed_free(a, 0, 64)
    got, _ = a.malloc(5, now=1)
    assert got.size_in_b == 8 and got.position == 0
    assert a.split_count == 3  # 64 -> 32+32, 32 -> 16+16, 16 -> 8+8
    assert sorted(b.size_in_b for b in a._free_at.values()) == [8, 16, 32]


def test_malloc_without_split_needs_arena():
    a = build_allocator(spec(K.SEGREGATED_FIT, 0, 128))
    got, _ = a.malloc(24, now=0)
    assert got is None


def test_segregated_fit_split_remainder():
    a = build_allocator(spec(K.SEGREGATED_FIT, 8, 128, split=True, cfg=CFG, word=0))
    seed_free(a, 0, 128)
    got, _ = a.malloc(24, now=1)
    assert (got.position, got.size_in_b) == (0, 24)
    assert a.split_count == 1
    free_blocks = [b for lst in a.lists for b in lst.iter_blocks()]
    assert [(b.position, b.size_in_b) for b in free_blocks] == [(24, 104)]
    # conservation: handed 24 + free 104 == received 128
    assert got.size_in_b + a.free_total == 128


def test_buddy_coalesce_requires_aligned_partner():
    a = build_allocator(spec(K.BUDDY_BINARY, 0, 64, coalesce=True))
    b1 = Block(0, 8, 0, 0)
    b2 = Block(8, 8, 0, 0)
    a.free(b1, now=1)
    a.free(b2, now=2)  # 0 ^ 8 == 8: buddies, merge into 16 at 0
    assert a.coalesce_count == 1
    assert [(b.position, b.size_in_b) for b in a._free_at.values()] == [(0, 16)]

    b = build_allocator(spec(K.BUDDY_BINARY, 0, 64, coalesce=True))
    b.free(Block(8, 8, 0, 0), now=1)
    b.free(Block(16, 8, 0, 0), now=2)  # 8 ^ 8 == 0, 16 ^ 8 == 24: not buddies
    assert b.coalesce_count == 0
    assert len(b._free_at) == 2


def test_adjacent_coalesce_in_segregated_list():
    a = build_allocator(spec(K.SEGREGATED_FREE_LIST, 0, 1 << 16, coalesce=True, word=0))
    a.free(Block(0, 16, 0, 0), now=1)
    a.free(Block(16, 32, 0, 0), now=2)
    assert a.coalesce_count == 1
    merged = [b for lst in a.lists for b in lst.iter_blocks()]
    assert [(b.position, b.size_in_b) for b in merged] == [(0, 48)]


def test_split_then_coalesce_restores_block():
    a = build_allocator(spec(K.BUDDY_BINARY, 0, 256, split=True, coalesce=True))
    seed_free(a, 0, 256)
    got, _ = a.malloc(3, now=1)
    assert (got.position, got.size_in_b) == (0, 4)
    a.free(got, now=2)
    assert [(b.position, b.size_in_b) for b in a._free_at.values()] == [(0, 256)]


def test_fibonacci_split_pair_sizes():
    a = build_allocator(spec(K.BUDDY_FIBONACCI, 0, 13, split=True, coalesce=True))
    seed_free(a, 0, 13)
    got, _ = a.malloc(8, now=1)
    assert got.size_in_b == 8
    assert [b.size_in_b for b in a._free_at.values()] == [5]  # 13 -> 8 + 5
    a.free(got, now=2)
    assert [(b.position, b.size_in_b) for b in a._free_at.values()] == [(0, 13)]


def test_buddy_invariants_random_ops():
    rng = random.Random(23)
    a = build_allocator(spec(K.BUDDY_BINARY, 0, 1024, split=True, coalesce=True))
    arena = FakeArena()
    live = []
    for i in range(3000):
        if live and rng.random() < 0.45:
            a.free(live.pop(rng.randrange(len(live))), now=i)
        else:
            got, _ = a.malloc(rng.randint(1, 1024), now=i)
            if got is None:
                got, _ = a.carve(rng.randint(1, 1024), i, arena)
            live.append(got)
        for b in list(a._free_at.values()) + live:
            assert b.size_in_b & (b.size_in_b - 1) == 0  # power of two
            assert b.position % b.size_in_b == 0  # aligned to its size
    handed = sum(b.size_in_b for b in live)
    assert handed + a.free_total + a.slack_bytes == a.bytes_drawn


def test_fibonacci_invariants_random_ops():
    rng = random.Random(29)
    fibs = set(fib_series(1597))
    a = build_allocator(spec(K.BUDDY_FIBONACCI, 0, 1000, split=True, coalesce=True))
    arena = FakeArena()
    live = []
    for i in range(2000):
        if live and rng.random() < 0.45:
            a.free(live.pop(rng.randrange(len(live))), now=i)
        else:
            got, _ = a.malloc(rng.randint(1, 1000), now=i)
            if got is None:
                got, _ = a.carve(rng.randint(1, 1000), i, arena)
            live.append(got)
        for b in list(a._free_at.values()) + live:
            assert b.size_in_b in fibs
    handed = sum(b.size_in_b for b in live)
    assert handed + a.free_total + a.slack_bytes == a.bytes_drawn


def test_no_split_flag_means_no_splits():
    rng = random.Random(31)
    a = build_allocator(spec(K.STRICT_SEGREGATED_FIT, 0, 64, series=(8, 16, 32, 64)))
    arena = FakeArena()
    live = []
    for i in range(1000):
        if live and rng.random() < 0.5:
            a.free(live.pop(), now=i)
        else:
            got, _ = a.malloc(rng.randint(1, 64), now=i)
            if got is None:
                got, _ = a.carve(rng.randint(1, 64), i, arena)
            live.append(got)
    assert a.split_count == 0
    assert a.coalesce_count == 0


def test_byte_conservation_non_buddy():
    rng = random.Random(37)
    a = build_allocator(spec(K.SEGREGATED_FIT, 0, 512, split=True, coalesce=True))
    arena = FakeArena()
    live = []
    for i in range(2000):
        if live and rng.random() < 0.5:
            a.free(live.pop(rng.randrange(len(live))), now=i)
        else:
            req = rng.randint(1, 512)
            got, _ = a.malloc(req, now=i)
            if got is None:
                got, _ = a.carve(req, i, arena)
            live.append(got)
        handed = sum(b.size_in_b for b in live)
        assert handed + a.free_total + a.slack_bytes == a.bytes_drawn


def test_simple_segregated_storage_rejects_split():
    with pytest.raises(SpecError):
        spec(K.SIMPLE_SEGREGATED_STORAGE, 0, 64, split=True).validate()


def test_series_required():
    with pytest.raises(SpecError, match="sizeSeries"):
        spec(K.EXACT_SEGREGATED_FIT, 0, 64).validate()


def test_bad_series():
    with pytest.raises(SpecError):
        spec(K.STRICT_SEGREGATED_FIT, 0, 64, series=(8, 8, 64)).validate()
    with pytest.raises(SpecError):
        spec(K.STRICT_SEGREGATED_FIT, 0, 64, series=(8, 32)).validate()


def test_allocator_spec_dict_round_trip():
    s = spec(K.EXACT_SEGREGATED_FIT, 0, 40, series=(2, 4, 40))
    assert AllocatorSpec.from_dict(s.to_dict()) == s
    b = spec(K.BUDDY_BINARY, 0, 8)
    assert AllocatorSpec.from_dict(b.to_dict()) == b


def test_free_of_unrepresentable_buddy_size():
    a = build_allocator(spec(K.BUDDY_BINARY, 0, 64))
    with pytest.raises(SpecError, match="not a class"):
        a.free(Block(0, 24, 0, 0), now=0)
