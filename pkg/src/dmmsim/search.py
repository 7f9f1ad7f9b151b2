"""Grammatical-evolution search over the DMM design space.

Integer codons map through a fixed grammar to DMMSpecs: each decision with
k choices consumes one codon as codon mod k, wrapping around the genome up
to a wrap budget. Boundary choices come from a finite vocabulary (powers of
two plus observed trace sizes) and are sorted and deduplicated, so every
complete derivation partitions the size range by construction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .allocators import AllocatorKlass, AllocatorSpec, ListConfig, next_pow2
from .freelist import DataStructure, Mechanism, Policy
from .manager import DMMSpec, SimulationAbort
from .metrics import EnergyModel, FitnessWeights, Metrics
from .presets import kingsley
from .simulator import simulate
from .trace import Trace, TraceStats, trace_stats

CODON_BITS = 16
CODON_SPAN = 1 << CODON_BITS
MIN_GENOME_LENGTH = 16

Genome = list[int]

_KLASS_CHOICES = (
    AllocatorKlass.SEGREGATED_FREE_LIST,
    AllocatorKlass.SIMPLE_SEGREGATED_STORAGE,
    AllocatorKlass.SEGREGATED_FIT,
    AllocatorKlass.EXACT_SEGREGATED_FIT,
    AllocatorKlass.STRICT_SEGREGATED_FIT,
    AllocatorKlass.BUDDY_BINARY,
    AllocatorKlass.BUDDY_FIBONACCI,
)
_DS_CHOICES = (DataStructure.SLL, DataStructure.DLL, DataStructure.BTREE)
_MECH_CHOICES = (Mechanism.FIRST, Mechanism.BEST, Mechanism.EXACT, Mechanism.FARTHEST)
_POLICY_CHOICES = (Policy.FIFO, Policy.LIFO)
_SERIES_KLASSES = {
    AllocatorKlass.SIMPLE_SEGREGATED_STORAGE,
    AllocatorKlass.EXACT_SEGREGATED_FIT,
    AllocatorKlass.STRICT_SEGREGATED_FIT,
}
MAX_ALLOCATORS = 4


@dataclass(frozen=True)
class Grammar:
    max_size_in_b: int
    trace_sizes: tuple[int, ...]  # sorted distinct request sizes
    boundary_vocab: tuple[int, ...]  # interior range boundaries, all < max

    @staticmethod
    def from_stats(stats: TraceStats) -> "Grammar":
        if stats.max_size_in_b < 1:
            raise ValueError("grammar needs a trace with at least one allocation")
        mx = stats.max_size_in_b
        vocab = set()
        p = 1
        while p < mx:
            vocab.add(p)
            p <<= 1
        vocab.update(s for s in stats.distinct_sizes if s < mx)
        return Grammar(mx, tuple(sorted(stats.distinct_sizes)), tuple(sorted(vocab)))

    @staticmethod
    def from_trace(trace: Trace) -> "Grammar":
        return Grammar.from_stats(trace_stats(trace))


class _OutOfCodons(Exception):
    pass


class _Reader:
    __slots__ = ("codons", "i", "wraps", "max_wraps")

    def __init__(self, codons: Genome, max_wraps: int):
        self.codons = codons
        self.i = 0
        self.wraps = 0
        self.max_wraps = max_wraps

    def choose(self, k: int) -> int:
        if self.i >= len(self.codons):
            self.wraps += 1
            if self.wraps > self.max_wraps:
                raise _OutOfCodons
            self.i = 0
        c = self.codons[self.i]
        self.i += 1
        return c % k


def map_genome(genome: Genome, grammar: Grammar, max_wraps: int = 2) -> DMMSpec | None:
    """Left-to-right codon consumption; None when the derivation runs out of
    codons past the wrap budget (an Invalid genome, not an error)."""
    if len(genome) < MIN_GENOME_LENGTH:
        raise ValueError(f"genome length must be >= {MIN_GENOME_LENGTH}")
    r = _Reader(genome, max_wraps)
    try:
        n_alloc = r.choose(MAX_ALLOCATORS) + 1
        bounds: set[int] = set()
        vocab = grammar.boundary_vocab
        if vocab:
            for _ in range(n_alloc - 1):
                bounds.add(vocab[r.choose(len(vocab))])
        edges = sorted(bounds) + [grammar.max_size_in_b]
        allocs = []
        lo = 0
        for hi in edges:
            allocs.append(_derive_region(r, grammar, lo, hi))
            lo = hi
        return DMMSpec(tuple(allocs))
    except _OutOfCodons:
        return None


def _derive_region(r: _Reader, grammar: Grammar, lo: int, hi: int) -> AllocatorSpec:
    klass = _KLASS_CHOICES[r.choose(len(_KLASS_CHOICES))]
    if klass is AllocatorKlass.SIMPLE_SEGREGATED_STORAGE:
        split = coalesce = False  # forbidden for this class; no codons consumed
    else:
        split = bool(r.choose(2))
        coalesce = bool(r.choose(2))
    cfg = ListConfig(
        _DS_CHOICES[r.choose(len(_DS_CHOICES))],
        _MECH_CHOICES[r.choose(len(_MECH_CHOICES))],
        _POLICY_CHOICES[r.choose(len(_POLICY_CHOICES))],
    )
    series = None
    if klass in _SERIES_KLASSES:
        sizes = [s for s in grammar.trace_sizes if lo < s <= hi]
        if not sizes or sizes[-1] != hi:
            sizes.append(hi)
        series = tuple(sizes)
    return AllocatorSpec(klass, lo, hi, split, coalesce, cfg, series)


@dataclass
class GEParams:
    population_size: int = 32
    generations: int = 20
    crossover_rate: float = 0.8
    mutation_rate: float = 0.01
    tournament_size: int = 2
    elite_count: int = 1
    max_wraps: int = 2
    invalid_penalty: float = 1e9
    seed: int = 0
    genome_length: int = 64
    # per-candidate replay budget: time units per trace event (0 = uncapped)
    eval_cap_per_event: int = 200

    def validate(self) -> None:
        if self.population_size < 2:
            raise ValueError("populationSize must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournamentSize must be >= 1")
        if not 1 <= self.elite_count <= self.population_size:
            raise ValueError("eliteCount must be in [1, populationSize]")
        if self.max_wraps < 0:
            raise ValueError("maxWraps must be >= 0")
        if self.genome_length < MIN_GENOME_LENGTH:
            raise ValueError(f"genome length must be >= {MIN_GENOME_LENGTH}")
        if self.invalid_penalty <= 1.0:
            raise ValueError("invalidPenalty must exceed any feasible fitness")


def evaluate(spec: DMMSpec | None, trace: Trace, baseline: Metrics,
             w: FitnessWeights | None = None, model: EnergyModel | None = None,
             invalid_penalty: float = 1e9,
             time_unit_cap: int | None = None) -> float:
    """Fitness of one candidate replay; Invalid specs and aborted replays
    earn the penalty."""
    if spec is None:
        return invalid_penalty
    try:
        res = simulate(trace, spec, model, w or FitnessWeights(), baseline,
                       time_unit_cap=time_unit_cap)
    except SimulationAbort:
        return invalid_penalty
    return res.fitness_vs_baseline


@dataclass
class EvolveResult:
    best_spec: DMMSpec
    best_fitness: float
    best_genome: Genome
    history: list[float] = field(default_factory=list)  # best fitness per generation
    baseline: Metrics | None = None


def evolve(trace: Trace, params: GEParams | None = None, grammar: Grammar | None = None,
           w: FitnessWeights | None = None, model: EnergyModel | None = None,
           baseline_spec: DMMSpec | None = None) -> EvolveResult:
    """Generational GA: tournament selection, single-point codon crossover,
    per-codon uniform mutation, elitism. Deterministic for a fixed seed."""
    params = params or GEParams()
    params.validate()
    w = w or FitnessWeights()
    model = model or EnergyModel()
    stats = trace_stats(trace)
    grammar = grammar or Grammar.from_stats(stats)
    baseline_spec = baseline_spec or kingsley(stats.max_size_in_b)
    baseline = simulate(trace, baseline_spec, model).metrics
    cap = params.eval_cap_per_event * len(trace) if params.eval_cap_per_event else None

    rng = random.Random(params.seed)
    size, length = params.population_size, params.genome_length
    pop: list[Genome] = [[rng.randrange(CODON_SPAN) for _ in range(length)]
                         for _ in range(size)]
    cache: dict[tuple[int, ...], float] = {}

    def fitness_of(genome: Genome) -> float:
        key = tuple(genome)
        got = cache.get(key)
        if got is None:
            spec = map_genome(genome, grammar, params.max_wraps)
            got = evaluate(spec, trace, baseline, w, model,
                           params.invalid_penalty, cap)
            cache[key] = got
        return got

    history: list[float] = []
    best_gen: Genome | None = None
    best_fit = float("inf")
    for gen in range(params.generations):
        fits = [fitness_of(g) for g in pop]
        order = sorted(range(size), key=lambda i: (fits[i], i))
        if fits[order[0]] < best_fit:
            best_fit = fits[order[0]]
            best_gen = pop[order[0]][:]
        history.append(best_fit)
        if gen == params.generations - 1:
            break

        def pick() -> Genome:
            contenders = [rng.randrange(size) for _ in range(params.tournament_size)]
            return pop[min(contenders, key=lambda i: (fits[i], i))]

        nxt = [pop[i][:] for i in order[:params.elite_count]]
        while len(nxt) < size:
            a, b = pick(), pick()
            if rng.random() < params.crossover_rate:
                point = rng.randrange(1, length)
                c1, c2 = a[:point] + b[point:], b[:point] + a[point:]
            else:
                c1, c2 = a[:], b[:]
            for child in (c1, c2):
                for j in range(length):
                    if rng.random() < params.mutation_rate:
                        child[j] = rng.randrange(CODON_SPAN)
                if len(nxt) < size:
                    nxt.append(child)
        pop = nxt

    spec = map_genome(best_gen, grammar, params.max_wraps)
    if spec is None:  # every candidate was invalid; fall back to the baseline shape
        spec = baseline_spec
    return EvolveResult(spec, best_fit, best_gen, history, baseline)
