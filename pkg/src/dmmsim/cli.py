"""Batch command-line surface: stats, gen, sim, compare, search.

All reports are deterministic for fixed inputs and seeds; JSON output uses
2-space indentation and fixed key order so runs diff cleanly.
"""

from __future__ import annotations

import argparse
import json
import sys

from .allocators import SpecError
from .manager import DMMSpec, SimulationAbort, dump_dmm_spec, format_dmm_table, load_dmm_spec
from .metrics import EnergyModel, FitnessWeights
from .presets import PRESET_NAMES, preset_by_name
from .search import GEParams, evolve
from .simulator import compare, compare_csv, simulate
from .trace import (
    TraceParseError,
    generate_trace,
    load_generator_spec,
    parse_trace_file,
    trace_stats,
    write_trace_file,
)


def _three_floats(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
    try:
        a, b, c = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return a, b, c


def _weights(args) -> FitnessWeights:
    if args.weights is None:
        return FitnessWeights()
    return FitnessWeights.normalized(*args.weights)


def _energy_model(args) -> EnergyModel:
    if args.energy_model is None:
        return EnergyModel()
    return EnergyModel(*args.energy_model)


def _resolve_dmm(token: str, trace) -> DMMSpec:
    if token.lower() in PRESET_NAMES:
        stats = trace_stats(trace)
        if stats.max_size_in_b < 1:
            raise SpecError("cannot size a preset from an empty trace")
        return preset_by_name(token, stats.max_size_in_b, stats)
    return load_dmm_spec(token)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--permissive", action="store_true",
                   help="drop zero-size mallocs with a warning instead of failing")
    p.add_argument("--weights", type=_three_floats, default=None, metavar="T,M,E",
                   help="fitness weights (normalized to sum 1)")
    p.add_argument("--energy-model", type=_three_floats, default=None, metavar="A,T,B",
                   help="energy per access, per time unit, per high-water byte")


def _load_trace(args):
    trace = parse_trace_file(args.trace, permissive=args.permissive)
    if trace.dropped_zero_size:
        print(f"warning: dropped {trace.dropped_zero_size} zero-size mallocs",
              file=sys.stderr)
    return trace


def _cmd_stats(args) -> int:
    stats = trace_stats(_load_trace(args))
    doc = stats.as_dict()
    if args.format == "csv":
        cols = list(doc)
        vals = [";".join(map(str, v)) if isinstance(v, list) else str(v) for v in doc.values()]
        print(",".join(cols))
        print(",".join(vals))
    else:
        print(json.dumps(doc, indent=2))
    return 0


def _cmd_gen(args) -> int:
    spec = load_generator_spec(args.genspec)
    trace = generate_trace(spec, seed=args.seed)
    write_trace_file(trace, args.output)
    stats = trace_stats(trace)
    print(json.dumps({"output": args.output, "events": stats.memory_ops,
                      "objects": stats.objects}, indent=2))
    return 0


def _cmd_sim(args) -> int:
    trace = _load_trace(args)
    spec = _resolve_dmm(args.dmm, trace)
    model, w = _energy_model(args), _weights(args)
    baseline = None
    if args.baseline:
        base_spec = _resolve_dmm(args.baseline, trace)
        baseline = simulate(trace, base_spec, model).metrics
    result = simulate(trace, spec, model, w, baseline)
    if args.format == "csv":
        doc = result.metrics.as_dict()
        doc["energy"] = result.energy
        doc["fitness"] = result.fitness_vs_baseline
        print(",".join(doc))
        print(",".join("" if v is None else str(v) for v in doc.values()))
    else:
        doc = result.as_dict()
        if args.no_snapshot:
            del doc["snapshot"]
        print(json.dumps(doc, indent=2))
    return 0


def _cmd_compare(args) -> int:
    trace = _load_trace(args)
    names = [t.strip() for t in args.dmms.split(",") if t.strip()]
    specs = [(name, _resolve_dmm(name, trace)) for name in names]
    report = compare(trace, specs, args.baseline, _energy_model(args), _weights(args),
                     parallel=args.parallel)
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        print(compare_csv(report), end="")
    return 0


def _cmd_search(args) -> int:
    trace = _load_trace(args)
    params = GEParams(
        population_size=args.pop,
        generations=args.gens,
        crossover_rate=args.crossover,
        mutation_rate=args.mutation,
        tournament_size=args.tournament,
        elite_count=args.elite,
        max_wraps=args.max_wraps,
        invalid_penalty=args.invalid_penalty,
        seed=args.seed,
        genome_length=args.genome_length,
    )
    result = evolve(trace, params, w=_weights(args), model=_energy_model(args))
    print(f"best fitness vs kng baseline: {result.best_fitness:.6f}")
    print()
    print(format_dmm_table(result.best_spec))
    history_csv = "generation,bestFitness\n" + "".join(
        f"{i},{f:.9f}\n" for i, f in enumerate(result.history))
    if args.history:
        with open(args.history, "w", encoding="utf-8") as fh:
            fh.write(history_csv)
        print(f"history written to {args.history}")
    else:
        print(history_csv, end="")
    spec_json = dump_dmm_spec(result.best_spec)
    if args.out_spec:
        with open(args.out_spec, "w", encoding="utf-8") as fh:
            fh.write(spec_json)
        print(f"best DMM config written to {args.out_spec}")
    else:
        print(spec_json, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="dmmsim",
                                  description="Trace-driven DMM simulator and design-space search")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="summarize a trace")
    p.add_argument("trace")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_common(p)
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("gen", help="generate a synthetic trace from a generator spec")
    p.add_argument("genspec")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("sim", help="replay a trace through one DMM")
    p.add_argument("trace")
    p.add_argument("--dmm", required=True, help=f"preset ({'|'.join(PRESET_NAMES)}) or config path")
    p.add_argument("--baseline", default=None, help="preset or config path for fitness")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--no-snapshot", action="store_true", help="omit the map from JSON output")
    _add_common(p)
    p.set_defaults(fn=_cmd_sim)

    p = sub.add_parser("compare", help="replay several DMMs and normalize to a baseline")
    p.add_argument("trace")
    p.add_argument("--dmms", required=True, help="comma-separated presets or config paths")
    p.add_argument("--baseline", default="kng")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--parallel", action="store_true",
                   help="replay candidates concurrently (one accumulator each)")
    _add_common(p)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("search", help="evolve a custom DMM for the trace")
    p.add_argument("trace")
    p.add_argument("--pop", type=int, default=GEParams.population_size)
    p.add_argument("--gens", type=int, default=GEParams.generations)
    p.add_argument("--seed", type=int, default=GEParams.seed)
    p.add_argument("--crossover", type=float, default=GEParams.crossover_rate)
    p.add_argument("--mutation", type=float, default=GEParams.mutation_rate)
    p.add_argument("--tournament", type=int, default=GEParams.tournament_size)
    p.add_argument("--elite", type=int, default=GEParams.elite_count)
    p.add_argument("--max-wraps", type=int, default=GEParams.max_wraps)
    p.add_argument("--genome-length", type=int, default=GEParams.genome_length)
    p.add_argument("--invalid-penalty", type=float, default=GEParams.invalid_penalty)
    p.add_argument("--out-spec", default=None, help="write the best DMM config here")
    p.add_argument("--history", default=None, help="write per-generation CSV here")
    _add_common(p)
    p.set_defaults(fn=_cmd_search)
    return top


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (TraceParseError, SpecError, SimulationAbort, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
