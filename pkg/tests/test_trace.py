import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmmsim.trace import (
    FREE,
    MALLOC,
    GeneratorSpec,
    LifetimeModel,
    Trace,
    TraceEvent,
    TraceParseError,
    generate_trace,
    parse_trace_text,
    trace_stats,
    trace_to_text,
)


def test_parse_basic():
    t = parse_trace_text("M 0x1a 40\nF 0x1a")
    assert len(t) == 2
    assert t.events[0] == TraceEvent(MALLOC, "0x1a", 40)
    assert t.events[1] == TraceEvent(FREE, "0x1a")


def test_parse_empty_input():
    assert len(parse_trace_text("")) == 0


def test_parse_comments_and_blanks():
    t = parse_trace_text("# header\n\nM a 8\n  \nF a\n# tail\n")
    assert len(t) == 2


def test_parse_zero_size_rejected():
    with pytest.raises(TraceParseError, match="line 1"):
        parse_trace_text("M 0x1 0")


def test_parse_zero_size_permissive_drops():
    t = parse_trace_text("M a 0\nM b 4\nF a\n", permissive=True)
    assert len(t) == 2
    assert t.dropped_zero_size == 1


@pytest.mark.parametrize("line,frag", [
    ("X a 4", "unknown opcode"),
    ("M a", "malloc needs"),
    ("M a four", "non-numeric"),
    ("F", "free needs"),
    ("M a 4 extra", "malloc needs"),
    ("M a -3", "negative"),
])
def test_parse_malformed(line, frag):
    with pytest.raises(TraceParseError, match=frag):
        parse_trace_text(line)


def test_parse_error_names_line_number():
    with pytest.raises(TraceParseError, match="line 3"):
        parse_trace_text("M a 1\nF a\nM b 0\n")


_ids = st.text(alphabet="0123456789abcdefx", min_size=1, max_size=8)


@settings(max_examples=60)
@given(st.lists(st.tuples(st.booleans(), _ids, st.integers(1, 1 << 20)), max_size=40))
def test_emit_parse_round_trip(items):
    events = [TraceEvent(MALLOC, oid, sz) if is_m else TraceEvent(FREE, oid)
              for is_m, oid, sz in items]
    # frees drop the size field, so normalize before comparing
    norm = [e if e.kind == MALLOC else TraceEvent(FREE, e.object_id) for e in events]
    trace = Trace(norm)
    assert parse_trace_text(trace_to_text(trace)).events == norm


def test_stats_single_pair():
    s = trace_stats(parse_trace_text("M a 100\nF a"))
    assert (s.objects, s.total_bytes, s.max_in_use_bytes) == (1, 100, 100)
    assert (s.memory_ops, s.invalid_frees, s.invalid_mallocs) == (2, 0, 0)


def test_stats_free_without_malloc():
    s = trace_stats(parse_trace_text("F z"))
    assert s.invalid_frees == 1
    assert s.objects == 0


def test_stats_cfrac_scale_average():
    # 570014 allocations totaling 2415228 bytes report a 4.24 average
    sizes = [5] * 135172 + [4] * (570014 - 135172)
    events = [TraceEvent(MALLOC, "x", sz) for sz in sizes]
    s = trace_stats(Trace(events))
    assert s.objects == 570014
    assert s.total_bytes == 2415228
    assert round(s.avg_size_in_b, 2) == 4.24
    assert s.as_dict()["avgSizeInB"] == 4.24


def test_stats_duplicate_ids_newest_wins():
    s = trace_stats(parse_trace_text("M a 10\nM a 12\nF a"))
    assert s.objects == 2
    assert s.invalid_frees == 0
    assert s.invalid_mallocs == 1  # the 10-byte allocation is never freed
    assert s.max_in_use_bytes == 22


def test_stats_identities_random():
    rng = random.Random(9)
    lines = []
    for i in range(500):
        if rng.random() < 0.55:
            lines.append(f"M {rng.randrange(40)} {rng.randint(1, 99)}")
        else:
            lines.append(f"F {rng.randrange(40)}")
    t = parse_trace_text("\n".join(lines))
    s = trace_stats(t)
    frees = sum(1 for e in t.events if e.kind == FREE)
    assert s.memory_ops == s.objects + frees
    assert s.max_in_use_bytes <= s.total_bytes
    assert s.avg_size_in_b * s.objects == pytest.approx(s.total_bytes)


def test_stats_max_in_use_against_naive_fold():
    rng = random.Random(4)
    events = []
    for i in range(800):
        if rng.random() < 0.5:
            events.append(TraceEvent(MALLOC, str(rng.randrange(60)), rng.randint(1, 50)))
        else:
            events.append(TraceEvent(FREE, str(rng.randrange(60))))
    # independent oracle: explicit per-event live-set fold
    live, cur, peak = {}, 0, 0
    for e in events:
        if e.kind == MALLOC:
            live.setdefault(e.object_id, []).append(e.size_in_b)
            cur += e.size_in_b
            peak = max(peak, cur)
        elif live.get(e.object_id):
            cur -= live[e.object_id].pop()
    assert trace_stats(Trace(events)).max_in_use_bytes == peak


def _spec(**kw):
    base = dict(object_count=1000, size_distribution=[(8, 1.0)],
                lifetime=LifetimeModel("uniform-random"), leak_fraction=0.0, seed=7)
    base.update(kw)
    return GeneratorSpec(**base)


def test_generate_counts_and_sizes():
    t = generate_trace(_spec())
    s = trace_stats(t)
    assert s.objects == 1000
    assert s.distinct_sizes == {8}


def test_generate_deterministic():
    a = trace_to_text(generate_trace(_spec()))
    b = trace_to_text(generate_trace(_spec()))
    assert a == b


def test_generate_seed_changes_stream():
    a = trace_to_text(generate_trace(_spec(), seed=1))
    b = trace_to_text(generate_trace(_spec(), seed=2))
    assert a != b


@pytest.mark.parametrize("kind", ["lifo-burst", "uniform-random", "bimodal"])
def test_generate_no_leak_is_clean(kind):
    t = generate_trace(_spec(lifetime=LifetimeModel(kind, 0.5, 8, 64)))
    s = trace_stats(t)
    assert s.invalid_mallocs == 0
    assert s.invalid_frees == 0
    assert s.memory_ops == 2 * s.objects


def test_generate_leak_fraction():
    t = generate_trace(_spec(leak_fraction=1.0))
    s = trace_stats(t)
    assert s.invalid_mallocs == 1000
    assert s.memory_ops == 1000


def test_generate_weighted_sizes_converge():
    t = generate_trace(_spec(object_count=20000,
                             size_distribution=[(8, 0.75), (64, 0.25)]))
    s = trace_stats(t)
    small = sum(1 for e in t.events if e.kind == MALLOC and e.size_in_b == 8)
    assert abs(small / s.objects - 0.75) < 0.02


@pytest.mark.parametrize("bad", [
    dict(object_count=-1),
    dict(size_distribution=[]),
    dict(size_distribution=[(0, 1.0)]),
    dict(size_distribution=[(8, 0.0)]),
    dict(leak_fraction=1.5),
    dict(lifetime=LifetimeModel("nope")),
])
def test_generate_invalid_specs(bad):
    with pytest.raises(ValueError):
        generate_trace(_spec(**bad))
