"""Trace-driven simulation and evolutionary search for composed dynamic
memory managers (DMMs)."""

from .allocators import (
    Allocator,
    AllocatorKlass,
    AllocatorSpec,
    ListConfig,
    SpecError,
    build_allocator,
    derive_buddy_classes,
    fib_series,
    next_pow2,
)
from .freelist import (
    Block,
    CostDelta,
    DataStructure,
    FreeList,
    Mechanism,
    Policy,
    header_bytes,
)
from .manager import (
    DMM,
    DMMSpec,
    SimulationAbort,
    compose_dmm,
    dump_dmm_spec,
    format_dmm_table,
    load_dmm_spec,
)
from .metrics import (
    EnergyModel,
    FitnessWeights,
    Metrics,
    energy,
    fitness,
    normalized_report,
)
from .presets import (
    PRESET_NAMES,
    exact_segregated,
    fibonacci_buddy,
    kingsley,
    lea,
    preset_by_name,
    segregated10,
)
from .search import (
    EvolveResult,
    GEParams,
    Grammar,
    evaluate,
    evolve,
    map_genome,
)
from .simulator import BudgetExceeded, SimulationResult, compare, compare_csv, simulate
from .trace import (
    GeneratorSpec,
    LifetimeModel,
    Trace,
    TraceEvent,
    TraceParseError,
    TraceStats,
    emit_trace,
    generate_trace,
    generator_spec_from_dict,
    load_generator_spec,
    parse_trace,
    parse_trace_file,
    parse_trace_text,
    trace_stats,
    trace_to_text,
    write_trace_file,
)

__version__ = "0.1.0"
