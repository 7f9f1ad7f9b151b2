"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each test prints a PASS line in the terminal summary (see conftest). The
directional search criterion is the slow one (a few minutes); everything
else is seconds.
"""

import json
import random
import time

import pytest

from dmmsim.allocators import AllocatorKlass, AllocatorSpec, ListConfig, build_allocator
from dmmsim.freelist import Block, CostDelta, DataStructure, FreeList, Mechanism, Policy
from dmmsim.manager import DMMSpec, compose_dmm, dump_dmm_spec, load_dmm_spec
from dmmsim.presets import exact_segregated, fibonacci_buddy, kingsley, lea, segregated10
from dmmsim.search import GEParams, evolve
from dmmsim.simulator import compare, simulate
from dmmsim.trace import (
    Trace,
    TraceEvent,
    generate_trace,
    load_generator_spec,
    trace_stats,
)

from reference_replayer import NaiveReplayer


@pytest.fixture(scope="module")
def bimodal_trace(fixtures_dir):
    spec = load_generator_spec(str(fixtures_dir / "bimodal_generator.json"))
    return generate_trace(spec)


def test_table1_fixture_round_trip(fixtures_dir):
    t0 = time.perf_counter()
    path = fixtures_dir / "table1_dmm.json"
    original = path.read_text()
    spec = load_dmm_spec(str(path))
    assert dump_dmm_spec(spec) == original  # byte-identical round-trip

    dmm = compose_dmm(spec)
    buddy, seg = dmm.allocators
    assert buddy.spec.klass is AllocatorKlass.BUDDY_BINARY
    assert [(l.lo, l.hi) for l in buddy.lists] == [(0, 1), (1, 2), (2, 4), (4, 8)]
    assert len(buddy.lists) == 4
    assert (seg.spec.lo, seg.spec.hi) == (8, 1490944)
    assert time.perf_counter() - t0 < 1.0


def test_table4_fixture_replays_cfrac_sizes(fixtures_dir):
    t0 = time.perf_counter()
    path = fixtures_dir / "cfrac_custom_dmm.json"
    original = path.read_text()
    spec = load_dmm_spec(str(path))
    assert dump_dmm_spec(spec) == original
    assert len(spec.allocators) == 3
    assert [(a.lo, a.hi) for a in spec.allocators] == [(0, 64), (64, 1724), (1724, 4096)]

    dmm = compose_dmm(spec)
    assert sum(len(a.all_lists()) for a in dmm.allocators) == 10

    rng = random.Random(101)
    events = []
    live = []
    for i in range(4000):
        if live and rng.random() < 0.5:
            events.append(TraceEvent("F", live.pop(rng.randrange(len(live)))))
        else:
            events.append(TraceEvent("M", f"o{i}", rng.randint(2, 3616)))
            live.append(f"o{i}")
    simulate(Trace(events), spec)  # must not abort
    assert time.perf_counter() - t0 < 1.0


def test_kingsley_bound_and_no_split_coalesce():
    t0 = time.perf_counter()
    rng = random.Random(7)
    dmm = compose_dmm(kingsley(1 << 20))
    for i in range(100_000):
        r = rng.randint(2, 1 << 20)
        oid = f"o{i}"
        dmm.malloc(oid, r, i)
        block, _ = dmm.live_pool[oid][0]
        cls = block.size_in_b - block.header_in_b
        assert cls < 2 * r
    m = dmm.collect_metrics()
    assert m.split_count == 0 and m.coalesce_count == 0
    assert time.perf_counter() - t0 < 5.0


def test_cost_rule_first_fit_scan_exact():
    # +1 time / +2 accesses per visited node, against a brute-force oracle
    rng = random.Random(13)
    for trial in range(1000):
        n = rng.randint(0, 30)
        sizes = [rng.randint(1, 256) for _ in range(n)]
        lst = FreeList(0, DataStructure.SLL, Mechanism.FIRST, Policy.FIFO,
                       0, 1 << 20, header_in_b=0)
        for i, s in enumerate(sizes):
            lst.insert(Block(i * 1000, s, 0, i))
        need = rng.randint(1, 256)

        visits, pick = 0, None
        for i, s in enumerate(sizes):
            visits += 1
            if s >= need:
                pick = i
                break
        got, cost = lst.extract(need)
        if pick is None:
            assert got is None
            assert cost == CostDelta(visits if n else 0, 2 * visits if n else 0)
        else:
            assert got.size_in_b == sizes[pick]
            assert cost == CostDelta(visits + 1, 2 * visits + 2)  # scan + unlink


def test_conservation_under_all_presets():
    rng = random.Random(17)
    sizes = [3, 8, 24, 33, 100, 517, 2048, 3000]
    events = []
    live = []
    for i in range(100_000):
        if live and rng.random() < 0.5:
            events.append(("F", live.pop(rng.randrange(len(live))), 0))
        else:
            oid = f"o{i}"
            events.append(("M", oid, rng.choice(sizes)))
            live.append(oid)
    stats_max = max(sizes)
    fake_stats = trace_stats(Trace([TraceEvent(k, o, s) for k, o, s in events]))
    presets = {
        "kng": kingsley(stats_max),
        "lea": lea(stats_max),
        "fib": fibonacci_buddy(stats_max),
        "s10": segregated10(stats_max),
        "exa": exact_segregated(fake_stats),
    }
    for name, spec in presets.items():
        dmm = compose_dmm(spec)
        prev_top = 0
        for i, (kind, oid, sz) in enumerate(events):
            if kind == "M":
                dmm.malloc(oid, sz, i)
            else:
                dmm.free(oid, i)
            assert dmm.live_bytes + dmm.free_bytes() + dmm.slack_bytes() \
                == dmm.arena.top, (name, i)
            assert dmm.arena.top >= prev_top, (name, i)
            prev_top = dmm.arena.top


def test_buddy_algebra_random_sequences():
    rng = random.Random(19)
    spec = AllocatorSpec(AllocatorKlass.BUDDY_BINARY, 0, 4096, True, True,
                         ListConfig(DataStructure.SLL, Mechanism.FIRST, Policy.FIFO))
    alloc = build_allocator(spec)

    class Arena:
        top = 0

        def draw(self, n):
            pos = self.top
            Arena.top += n
            return pos

    arena = Arena()
    live = []
    for i in range(10_000):
        if live and rng.random() < 0.5:
            alloc.free(live.pop(rng.randrange(len(live))), i)
        else:
            got, _ = alloc.malloc(rng.randint(1, 4096), i)
            if got is None:
                got, _ = alloc.carve(rng.randint(1, 4096), i, arena)
            live.append(got)
        for b in live:
            assert b.size_in_b & (b.size_in_b - 1) == 0
            assert b.position % b.size_in_b == 0
        for b in alloc._free_at.values():
            assert b.size_in_b & (b.size_in_b - 1) == 0
            assert b.position % b.size_in_b == 0

    # split-then-coalesce restores the original block exactly
    alloc2 = build_allocator(spec)
    seed = Block(0, 4096, 0, 0)
    alloc2._track_insert(alloc2.home_list(seed), seed)
    got, _ = alloc2.malloc(1, 1)
    assert (got.position, got.size_in_b) == (0, 1)
    alloc2.free(got, 2)
    assert [(b.position, b.size_in_b) for b in alloc2._free_at.values()] == [(0, 4096)]


def test_oracle_equivalence_against_naive_replayer():
    rng = random.Random(23)
    for trial in range(100):
        sizes = rng.sample(range(1, 4000), rng.randint(2, 12))
        events = []
        live = []
        n_events = rng.randint(10, 1000)
        for i in range(n_events):
            roll = rng.random()
            if live and roll < 0.45:
                events.append(TraceEvent("F", live.pop(rng.randrange(len(live)))))
            elif roll < 0.5:
                events.append(TraceEvent("F", f"ghost{i}"))  # invalid free
            else:
                oid = f"o{i}"
                events.append(TraceEvent("M", oid, rng.choice(sizes)))
                live.append(oid)
        trace = Trace(events)
        stats = trace_stats(trace)
        if not stats.objects:
            continue
        candidates = [
            kingsley(stats.max_size_in_b),
            exact_segregated(stats),
            segregated10(stats.max_size_in_b),
            DMMSpec((AllocatorSpec(AllocatorKlass.SEGREGATED_FREE_LIST, 0,
                                   stats.max_size_in_b, False, False,
                                   ListConfig(DataStructure.SLL, Mechanism.FIRST,
                                              Policy.FIFO)),)),
            DMMSpec((AllocatorSpec(AllocatorKlass.SEGREGATED_FREE_LIST, 0,
                                   stats.max_size_in_b, False, False,
                                   ListConfig(DataStructure.DLL, Mechanism.BEST,
                                              Policy.LIFO)),)),
        ]
        spec = candidates[trial % len(candidates)]

        dmm = compose_dmm(spec)
        positions = []
        for i, ev in enumerate(trace.events):
            if ev.kind == "M":
                dmm.malloc(ev.object_id, ev.size_in_b, i)
                positions.append(dmm.live_pool[ev.object_id][-1][0].position)
            else:
                dmm.free(ev.object_id, i)
        m = dmm.collect_metrics()

        naive = NaiveReplayer(spec.to_dict()).run(trace)
        assert m.hwm_bytes == naive["hwm"], trial
        assert m.malloc_count == naive["mallocCount"], trial
        assert m.free_count == naive["freeCount"], trial
        assert m.invalid_frees == naive["invalidFrees"], trial
        assert positions == naive["positions"], trial


def test_table2_calibration(fixtures_dir):
    spec = load_generator_spec(str(fixtures_dir / "cfrac_like_generator.json"))
    assert spec.object_count == 10_000  # 570014 scaled proportionally
    trace = generate_trace(spec)
    stats = trace_stats(trace)
    assert stats.objects == 10_000
    assert stats.avg_size_in_b == pytest.approx(4.24, abs=0.05)
    assert abs(stats.max_in_use_bytes - 6656) / 6656 <= 0.20
    # identities hold exactly
    assert stats.avg_size_in_b == stats.total_bytes / stats.objects
    frees = sum(1 for e in trace.events if e.kind == "F")
    assert stats.memory_ops == stats.objects + frees
    assert max(stats.distinct_sizes) <= 40 and min(stats.distinct_sizes) >= 2


def test_directional_reproduction_at_desk_scale(bimodal_trace):
    t0 = time.perf_counter()
    stats = trace_stats(bimodal_trace)
    assert stats.memory_ops == 50_000
    named = [
        ("kng", kingsley(stats.max_size_in_b)),
        ("lea", lea(stats.max_size_in_b)),
        ("fib", fibonacci_buddy(stats.max_size_in_b)),
        ("s10", segregated10(stats.max_size_in_b)),
        ("exa", exact_segregated(stats)),
    ]
    report = compare(bimodal_trace, named, "kng")
    rows = {r["name"]: r for r in report["rows"]}
    # (a) LEA reduces memory relative to Kingsley
    assert rows["lea"]["memoryRatio"] > rows["kng"]["memoryRatio"] == 1.0

    # (b) the evolved DMM is at least as fit as the best preset
    best_preset = min(row["fitness"] for row in rows.values())
    result = evolve(bimodal_trace, GEParams())  # stock defaults, fixed seed
    assert result.best_fitness <= best_preset
    assert time.perf_counter() - t0 < 600.0


def test_throughput_at_least_100k_events_per_second(fixtures_dir):
    gen = load_generator_spec(str(fixtures_dir / "cfrac_like_generator.json"))
    gen.object_count = 570_014  # full-scale cfrac shape, 1.14M events
    trace = generate_trace(gen)
    assert len(trace) >= 1_000_000
    spec = kingsley(trace_stats(trace).max_size_in_b)
    t0 = time.perf_counter()
    res = simulate(trace, spec)
    elapsed = time.perf_counter() - t0
    m = res.metrics
    assert m.malloc_count + m.free_count + m.invalid_frees == len(trace)
    assert len(trace) / elapsed >= 100_000, f"{len(trace) / elapsed:.0f} events/s"


def test_determinism_all_subcommands(tmp_path, fixtures_dir, capsys):
    from dmmsim.cli import run_cli

    trace_path = tmp_path / "t.mem"
    lines = []
    rng = random.Random(3)
    for i in range(300):
        lines.append(f"M o{i} {rng.randint(1, 3000)}")
        if i % 2:
            lines.append(f"F o{i}")
    trace_path.write_text("\n".join(lines) + "\n")

    def run(argv):
        assert run_cli(argv) == 0
        return capsys.readouterr().out

    gen_a, gen_b = tmp_path / "a.mem", tmp_path / "b.mem"
    run(["gen", str(fixtures_dir / "bimodal_generator.json"), "-o", str(gen_a)])
    run(["gen", str(fixtures_dir / "bimodal_generator.json"), "-o", str(gen_b)])
    assert gen_a.read_bytes() == gen_b.read_bytes()

    for argv in (
        ["stats", str(trace_path)],
        ["sim", str(trace_path), "--dmm", "kng", "--baseline", "kng"],
        ["sim", str(trace_path), "--dmm", str(fixtures_dir / "table1_dmm.json")],
        ["compare", str(trace_path), "--dmms", "kng,lea,fib,s10,exa", "--baseline", "kng"],
        ["search", str(trace_path), "--pop", "8", "--gens", "3", "--seed", "11"],
    ):
        assert run(argv) == run(argv), argv
